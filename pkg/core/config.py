"""
Run configuration.

A RunConfig is read from a JSON document whose top-level keys are the
sections below; every key has a default, unknown keys are rejected and the
resolved configuration is written back as config.json next to the outputs.

    {
      "sesim": {...},       SesimConfig
      "augment": {...},     AugmentSpec
      "synth": {...},       SynthSpec
      "optimizer": {...},   OptimizerConfig for train-structure
      "stylize": {...},     StylizeSettings
      "net": "fsesim",
      "arch": "default",
      ...
    }
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .contrast import AugmentSpec
from .errors import ConfigError
from .harness import OptimizerConfig, SynthSpec
from .kernels import DTYPES, PADDINGS
from .sesim import SesimConfig
from .utils import strict_fields

logger = logging.getLogger(__name__)

ARCHS = ('default', 'vgg16')
NETS = ('fsesim', 'lsesim')
SECTIONS = {
    'sesim': SesimConfig,
    'augment': AugmentSpec,
    'synth': SynthSpec,
}


@dataclass
class StylizeSettings:
    steps: int = 300
    lr: float = 0.01

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"stylize steps must be at least 1, got {self.steps}")
        if self.lr <= 0:
            raise ConfigError(f"stylize lr must be positive, got {self.lr}")

    @classmethod
    def from_dict(cls, data: Dict) -> 'StylizeSettings':
        return cls(**strict_fields(cls, data, 'stylize'))


@dataclass
class RunConfig:
    """
    Attributes:
        net: Structure network for selfsim, error-map and stylize ("fsesim" or "lsesim")
        arch: Trunk architecture, "default" or "vgg16"
        padding: Convolution padding of the default architecture
        weights: Weight manifest; seeded-random weights from weight_seed when omitted
        weight_seed: Seed for seeded-random trunk weights
        selection: Selection-layer manifest for the "lsesim" network
        holdout: Synthetic images kept out of training for held-out retrieval
        query: Image-space (row, col) of the selfsim query, image centre when omitted
        tap: Tap for selfsim and error-map, first configured tap when omitted
        precision: "single" or "double" for image tensors
        out_dir: Output directory
        log_level: Logging level name
        progress: Show progress bars
    """

    sesim: SesimConfig = field(default_factory=SesimConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    synth: SynthSpec = field(default_factory=SynthSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    stylize: StylizeSettings = field(default_factory=StylizeSettings)
    net: str = 'fsesim'
    arch: str = 'default'
    padding: str = 'zero'
    weights: Optional[str] = None
    weight_seed: int = 0
    selection: Optional[str] = None
    holdout: int = 2
    query: Optional[List[int]] = None
    tap: Optional[str] = None
    precision: str = 'single'
    out_dir: str = 'out'
    log_level: str = 'INFO'
    progress: bool = True

    def __post_init__(self):
        if self.net not in NETS:
            raise ConfigError(f"net must be one of {NETS}, got {self.net!r}")
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.padding not in PADDINGS:
            raise ConfigError(f"padding must be one of {PADDINGS}, got {self.padding!r}")
        if self.precision not in DTYPES:
            raise ConfigError(f"precision must be one of {tuple(DTYPES)}, got {self.precision!r}")
        if self.holdout < 0 or self.holdout == 1:
            raise ConfigError(f"holdout must be 0 or at least 2, got {self.holdout}")
        if self.query is not None:
            if len(self.query) != 2:
                raise ConfigError(f"query must be [row, col], got {self.query}")
            self.query = [int(v) for v in self.query]

    def with_seed(self, seed: int) -> 'RunConfig':
        """Copy with the sampling, augmentation and corpus seeds replaced."""
        data = self.to_dict()
        for section in ('sesim', 'augment', 'synth'):
            data[section]['seed'] = int(seed)
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict:
        data = {name: getattr(self, name).to_dict() for name in SECTIONS}
        data['optimizer'] = self.optimizer.to_dict()
        data['stylize'] = asdict(self.stylize)
        for key, value in asdict(self).items():
            if key not in data:
                data[key] = value
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'RunConfig':
        """
        Build a RunConfig from a parsed JSON document.

        Raises:
            ConfigError: unknown keys at any level or invalid values
        """
        kwargs = strict_fields(cls, data, 'run')
        for name, section_cls in SECTIONS.items():
            if name in kwargs:
                kwargs[name] = section_cls.from_dict(kwargs[name])
        if 'optimizer' in kwargs:
            kwargs['optimizer'] = OptimizerConfig.from_dict(kwargs['optimizer'])
        if 'stylize' in kwargs:
            kwargs['stylize'] = StylizeSettings.from_dict(kwargs['stylize'])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding='utf-8')
        return path


def load_run_config(path=None) -> RunConfig:
    """
    Read a RunConfig from a JSON file, or return the defaults when path is None.

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown keys or bad values
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    logger.info("[Config] loaded %s", path)
    return RunConfig.from_dict(data)
