"""
PNG image IO.

Images are 8-bit RGB PNG files on disk (other PNG color types and bit
depths are rejected) and float tensors (1, 3, H, W) in
[0, 1] in memory: loading maps v to v / 255, saving maps t to
floor(t * 255 + 0.5). Decoding uses QtGui.QImage when PySide6 is
available and falls back to Pillow otherwise.
"""

import logging
from pathlib import Path

import numpy as np

from .errors import ImageFormatError, ImageIOError
from .kernels import dtype_for

logger = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = {'.png'}
PNG_SIGNATURE = b'\x89PNG\r\n\x1a\n'
COLOR_TYPES = {0: 'grayscale', 2: 'RGB', 3: 'palette', 4: 'grayscale+alpha', 6: 'RGBA'}


def _check_suffix(path: Path):
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ImageFormatError(f"unsupported image format {path.suffix or '(none)'!r}: only PNG is supported")


def _check_header(path: Path):
    """Only 8-bit RGB PNGs load; the IHDR chunk follows the signature at a fixed offset."""
    with open(path, 'rb') as f:
        head = f.read(26)
    if len(head) < 26 or not head.startswith(PNG_SIGNATURE) or head[12:16] != b'IHDR':
        raise ImageFormatError(f"could not decode {path} as PNG")
    depth, color_type = head[24], head[25]
    if (depth, color_type) != (8, 2):
        kind = COLOR_TYPES.get(color_type, f'color type {color_type}')
        raise ImageFormatError(f"{path} is a {depth}-bit {kind} PNG, only 8-bit RGB is supported")


def _read_qt(path: Path) -> np.ndarray:
    from PySide6.QtGui import QImage

    image = QImage(str(path))
    if image.isNull():
        raise ImageFormatError(f"could not decode {path} as PNG")
    image = image.convertToFormat(QImage.Format.Format_RGB888)
    width, height, stride = image.width(), image.height(), image.bytesPerLine()
    data = np.frombuffer(image.constBits(), dtype=np.uint8, count=stride * height)
    return data.reshape(height, stride)[:, :width * 3].reshape(height, width, 3).copy()


def _read_pillow(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as image:
            return np.asarray(image.convert('RGB'), dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise ImageFormatError(f"could not decode {path} as PNG") from e


def _write_qt(pixels: np.ndarray, path: Path):
    from PySide6.QtGui import QImage

    height, width = pixels.shape[:2]
    # QImage borrows the buffer; keep it referenced until save() returns
    data = pixels.tobytes()
    image = QImage(data, width, height, 3 * width, QImage.Format.Format_RGB888)
    if not image.save(str(path), 'PNG'):
        raise ImageIOError(f"failed to write {path}")


def _write_pillow(pixels: np.ndarray, path: Path):
    from PIL import Image

    Image.fromarray(pixels, 'RGB').save(path, format='PNG')


def load_image(path, precision: str = 'single') -> np.ndarray:
    """
    读取 8 位 RGB PNG；带 alpha、灰度、调色板和 16 位的文件一律拒绝。

    参数:
        path: 文件路径
        precision: "single"（float32）或 "double"（float64）

    返回:
        np.ndarray: 形状 (1, 3, H, W) 的张量，像素值为 v / 255

    异常:
        ImageFormatError: 不是 PNG、不是 8 位 RGB 或无法解码
        ImageIOError: 文件不存在或读取失败
    """
    path = Path(path)
    _check_suffix(path)
    if not path.is_file():
        raise ImageIOError(f"image file not found: {path}")

    try:
        _check_header(path)
        try:
            pixels = _read_qt(path)
        except ImportError:
            logger.debug("[Images] PySide6 unavailable, decoding %s with Pillow", path)
            pixels = _read_pillow(path)
    except OSError as e:
        raise ImageIOError(f"failed to read {path}: {e}") from e

    return (pixels.transpose(2, 0, 1)[None] / 255.0).astype(dtype_for(precision))


def to_pixels(t: np.ndarray) -> np.ndarray:
    """(1, 3, H, W) tensor to (H, W, 3) uint8 with round-half-up quantization."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 4 or t.shape[0] != 1 or t.shape[1] != 3:
        raise ImageFormatError(f"only (1, 3, H, W) tensors can be saved as RGB PNG, got {t.shape}")
    values = np.floor(np.clip(t[0], 0, 1) * 255 + 0.5).astype(np.uint8)
    return np.ascontiguousarray(values.transpose(1, 2, 0))


def save_image(t: np.ndarray, path) -> Path:
    """
    Save a tensor as an 8-bit RGB PNG, creating parent directories.

    Raises:
        ImageFormatError: the path is not a .png or the tensor is not (1, 3, H, W)
        ImageIOError: writing failed
    """
    path = Path(path)
    _check_suffix(path)
    pixels = to_pixels(t)
    path.parent.mkdir(parents=True, exist_ok=True)

    try:
        try:
            _write_qt(pixels, path)
        except ImportError:
            _write_pillow(pixels, path)
    except ImageIOError:
        raise
    except OSError as e:
        raise ImageIOError(f"failed to write {path}: {e}") from e
    return path
