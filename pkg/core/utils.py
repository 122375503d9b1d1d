import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .errors import ConfigError

LOG_FORMAT = '%(levelname)s [%(name)s] %(message)s'


def setup_logging(level='INFO'):
    """
    Install a single stderr handler on the root logger.

    Only the command-line entry point calls this; library modules just log.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level if isinstance(level, int) else str(level).upper())


def tap_seed(seed, index: int) -> List[int]:
    """
    为配置中第 index 个 tap 派生采样种子。

    参数:
        seed: 整数或整数列表（训练循环传入 [seed, marker, step]）
        index: tap 在配置 tap 列表中的位置

    返回:
        list: seed 展开后追加 index + 1

    SeedSequence 会用 0 补齐较短的熵，追加 0 会让 tap 0 与裸种子得到同一随机流，所以用 index + 1。
    """
    return [int(v) for v in np.atleast_1d(np.asarray(seed, dtype=np.int64)).ravel()] + [int(index) + 1]


def strict_fields(cls, data: Dict, section: str) -> Dict:
    """
    按 dataclass 的字段校验配置字典，并原样返回作为构造参数。

    参数:
        cls: 目标 dataclass
        data: 从 JSON 读入的配置段
        section: 配置段名称，用于错误信息

    异常:
        ConfigError: data 不是字典，或含有 dataclass 未声明的键
    """
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    return dict(data)


def format_value(value) -> str:
    """Stable text form for CSV cells: integers as-is, floats with 12 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f'{float(value):.12g}'
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """
    Write rows to a CSV file with a header line and Unix line endings.

    Returns:
        Path: the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))
