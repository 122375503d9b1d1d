"""
Extractor weights and the on-disk weight container.

The container is a JSON manifest next to a flat binary file:

    {
      "format": "sesim-weights",
      "version": 1,
      "dtype": "f32",
      "byte_order": "little-endian",
      "binary": "<name>.bin",
      "arch": {...},                       # optional, ArchSpec.to_dict()
      "normalization": {"mean": [...], "std": [...]} | null,
      "meta": {...},                       # free-form, e.g. selection hidden width
      "tensors": [{"name": "conv0.weight", "shape": [16, 3, 3, 3]}, ...]
    }

The binary holds the row-major float32 tensors concatenated in manifest order.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, WeightFileMissingError, WeightLengthError, WeightShapeError
from ..kernels import ConvSpec, dtype_for
from .arch import ArchSpec

logger = logging.getLogger(__name__)

CONTAINER_FORMAT = 'sesim-weights'
CONTAINER_VERSION = 1
_F32_LE = np.dtype('<f4')

PROVENANCES = ('loaded', 'seeded-random')


@dataclass
class Normalization:
    """Per-channel mean/std applied to images before the first conv."""

    mean: Tuple[float, ...]
    std: Tuple[float, ...]

    def __post_init__(self):
        self.mean = tuple(float(v) for v in self.mean)
        self.std = tuple(float(v) for v in self.std)
        if len(self.mean) != len(self.std):
            raise ConfigError("normalization mean and std must have the same length")
        if any(s <= 0 for s in self.std):
            raise ConfigError("normalization std values must be positive")

    def to_dict(self) -> Dict:
        return {'mean': list(self.mean), 'std': list(self.std)}


@dataclass
class ExtractorWeights:
    """
    Weights and biases of every conv layer of an ArchSpec, in layer order.
    """

    arch: ArchSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    provenance: str = 'seeded-random'
    normalization: Optional[Normalization] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        convs = self.arch.conv_indices
        if len(self.weights) != len(convs) or len(self.biases) != len(convs):
            raise WeightShapeError(
                f"architecture has {len(convs)} conv layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for n, index in enumerate(convs):
            layer = self.arch.layers[index]
            expected = (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
            if self.weights[n].shape != expected:
                raise WeightShapeError(
                    f"layer conv{n} weight has shape {self.weights[n].shape}, expected {expected}"
                )
            if self.biases[n].shape != (layer.out_ch,):
                raise WeightShapeError(
                    f"layer conv{n} bias has shape {self.biases[n].shape}, expected ({layer.out_ch},)"
                )

    def conv_specs(self, precision: str = 'single') -> Dict[int, ConvSpec]:
        """ConvSpec per layer index, cast to the requested precision."""
        dtype = dtype_for(precision)
        specs = {}
        for n, index in enumerate(self.arch.conv_indices):
            layer = self.arch.layers[index]
            specs[index] = ConvSpec(
                self.weights[n].astype(dtype),
                self.biases[n].astype(dtype),
                stride=layer.stride,
                padding=layer.padding,
            )
        return specs

    def named_tensors(self) -> List[Tuple[str, np.ndarray]]:
        tensors = []
        for n, (w, b) in enumerate(zip(self.weights, self.biases)):
            tensors.append((f'conv{n}.weight', w))
            tensors.append((f'conv{n}.bias', b))
        return tensors

    def copy(self) -> 'ExtractorWeights':
        return ExtractorWeights(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.provenance,
            self.normalization,
        )


def init_random(arch: ArchSpec, seed: int = 0) -> ExtractorWeights:
    """
    He-initialized weights: N(0, 2 / fan_in) with fan_in = in_ch * k * k, zero biases.

    Deterministic per (arch, seed).
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for index in arch.conv_indices:
        layer = arch.layers[index]
        fan_in = layer.in_ch * layer.kernel * layer.kernel
        std = np.sqrt(2.0 / fan_in)
        shape = (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
        weights.append(rng.normal(0.0, std, size=shape).astype(np.float32))
        biases.append(np.zeros(layer.out_ch, dtype=np.float32))
    return ExtractorWeights(arch, weights, biases, provenance='seeded-random')


def write_container(manifest_path, tensors: List[Tuple[str, np.ndarray]], arch: Optional[ArchSpec] = None,
                    normalization: Optional[Normalization] = None, meta: Optional[Dict] = None) -> Path:
    """
    Write tensors as float32 into a manifest + binary pair.

    Returns:
        Path: the manifest path
    """
    manifest_path = Path(manifest_path)
    binary_path = manifest_path.with_suffix('.bin')
    manifest_path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    with open(binary_path, 'wb') as handle:
        for name, tensor in tensors:
            data = np.ascontiguousarray(tensor, dtype=_F32_LE)
            handle.write(data.tobytes(order='C'))
            entries.append({'name': name, 'shape': list(data.shape)})

    manifest = {
        'format': CONTAINER_FORMAT,
        'version': CONTAINER_VERSION,
        'dtype': 'f32',
        'byte_order': 'little-endian',
        'binary': binary_path.name,
        'arch': arch.to_dict() if arch is not None else None,
        'normalization': normalization.to_dict() if normalization is not None else None,
        'meta': meta or {},
        'tensors': entries,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding='utf-8')
    logger.debug("[Weights] wrote %d tensors to %s", len(entries), manifest_path)
    return manifest_path


def read_container(manifest_path) -> Tuple[Dict, List[Tuple[str, np.ndarray]]]:
    """
    Read a manifest + binary pair.

    Returns:
        tuple: (manifest dict, list of (name, float32 array))

    Raises:
        WeightFileMissingError: manifest or binary missing
        WeightLengthError: binary length disagrees with the declared shapes
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise WeightFileMissingError(f"weight manifest not found: {manifest_path}")

    try:
        manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ConfigError(f"weight manifest {manifest_path} is not valid JSON: {e}")

    if manifest.get('format') != CONTAINER_FORMAT:
        raise ConfigError(f"{manifest_path} is not a {CONTAINER_FORMAT} manifest")
    if manifest.get('dtype') != 'f32' or manifest.get('byte_order') != 'little-endian':
        raise ConfigError(f"{manifest_path}: only little-endian f32 containers are supported")

    binary_path = manifest_path.parent / manifest['binary']
    if not binary_path.exists():
        raise WeightFileMissingError(f"weight binary not found: {binary_path}")

    raw = np.fromfile(binary_path, dtype=_F32_LE)
    declared = sum(int(np.prod(entry['shape'], dtype=np.int64)) for entry in manifest['tensors'])
    if raw.size != declared or binary_path.stat().st_size != 4 * declared:
        raise WeightLengthError(
            f"{binary_path} holds {binary_path.stat().st_size} bytes, manifest declares {4 * declared}"
        )

    tensors = []
    offset = 0
    for entry in manifest['tensors']:
        shape = tuple(int(s) for s in entry['shape'])
        count = int(np.prod(shape, dtype=np.int64))
        tensors.append((entry['name'], raw[offset:offset + count].reshape(shape).astype(np.float32)))
        offset += count
    return manifest, tensors


def save_weights(weights: ExtractorWeights, manifest_path) -> Path:
    return write_container(
        manifest_path,
        weights.named_tensors(),
        arch=weights.arch,
        normalization=weights.normalization,
    )


def load_weights(manifest_path, arch: Optional[ArchSpec] = None) -> ExtractorWeights:
    """
    Load extractor weights from a container.

    Args:
        manifest_path: Path to the JSON manifest
        arch: Architecture to check against; defaults to the one stored in the manifest

    Raises:
        WeightFileMissingError, WeightLengthError, WeightShapeError
    """
    manifest, tensors = read_container(manifest_path)

    if arch is None:
        if not manifest.get('arch'):
            raise ConfigError(f"{manifest_path} carries no architecture and none was given")
        arch = ArchSpec.from_dict(manifest['arch'])

    by_name = dict(tensors)
    weights, biases = [], []
    for n, index in enumerate(arch.conv_indices):
        layer = arch.layers[index]
        for suffix, expected, bucket in (
            ('weight', (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel), weights),
            ('bias', (layer.out_ch,), biases),
        ):
            name = f'conv{n}.{suffix}'
            if name not in by_name:
                raise WeightShapeError(f"layer conv{n}: tensor {name!r} missing from {manifest_path}")
            if by_name[name].shape != expected:
                raise WeightShapeError(
                    f"layer conv{n}: {suffix} has shape {by_name[name].shape}, architecture expects {expected}"
                )
            bucket.append(by_name[name])

    normalization = None
    if manifest.get('normalization'):
        normalization = Normalization(**manifest['normalization'])

    logger.info("[Weights] loaded %d conv layers from %s", len(weights), manifest_path)
    return ExtractorWeights(arch, weights, biases, provenance='loaded', normalization=normalization)
