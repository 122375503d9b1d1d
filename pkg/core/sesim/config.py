"""
Hyperparameters shared by the FSeSim and LSeSim losses.
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

from ..errors import ConfigError
from ..utils import strict_fields

MODES = ('patch_random', 'patch_grid', 'global', 'scattered_random')
METRICS = ('l1', 'cos')


@dataclass
class SesimConfig:
    """
    Attributes:
        taps: Tap names the loss is evaluated at
        n_samples: Number of query points N_s per tap
        patch: Patch side p, so N_p = p * p
        mode: Query sampling mode, one of MODES
        metric: Map distance, "l1" or "cos"
        lam: Weight of the structure term when it is combined with another loss
        tau: InfoNCE temperature
        k: Negatives per query for the contrastive loss
        seed: Seed for query sampling and negative drawing
        normalize_features: L2-normalize each feature vector before building maps
        internal_negatives: Negatives drawn from x_aug; None means ceil(k / 2)
    """

    taps: Tuple[str, ...] = ('tapA', 'tapB')
    n_samples: int = 64
    patch: int = 8
    mode: str = 'patch_random'
    metric: str = 'cos'
    lam: float = 10.0
    tau: float = 0.07
    k: int = 255
    seed: int = 0
    normalize_features: bool = False
    internal_negatives: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.taps, str):
            self.taps = (self.taps,)
        self.taps = tuple(self.taps)
        if not self.taps or len(set(self.taps)) != len(self.taps):
            raise ConfigError(f"taps must be a non-empty list of distinct names, got {self.taps}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.lam <= 0:
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.patch < 1:
            raise ConfigError(f"patch must be at least 1, got {self.patch}")
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be at least 1, got {self.n_samples}")
        if self.internal_negatives is not None and not 0 <= self.internal_negatives <= self.k:
            raise ConfigError(f"internal_negatives must lie in [0, k], got {self.internal_negatives}")

    @property
    def n_internal(self) -> int:
        if self.internal_negatives is None:
            return math.ceil(self.k / 2)
        return self.internal_negatives

    @property
    def n_external(self) -> int:
        return self.k - self.n_internal

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['taps'] = list(self.taps)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SesimConfig':
        return cls(**strict_fields(cls, data, 'sesim'))
