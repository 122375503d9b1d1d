"""
Training of the LSeSim selection layers with the patchwise contrastive loss.

Only the selection layers are optimized; the extractor trunk stays frozen and
its features for the corpus images are computed once and reused.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import ConfigError
from ..extractor import (ExtractorWeights, FeatureStack, SelectionLayers, apply_selection, default_arch, extract,
                         init_random, init_selection, selection_backward)
from ..harness.optim import OptimizerConfig, OptState, adam_step
from ..sesim import SesimConfig, sample_queries
from ..utils import tap_seed, write_csv
from .augment import AugmentSpec, augment
from .batch import batch_backward, batch_from_features
from .infonce import infonce

logger = logging.getLogger(__name__)

PATCH_MODES = ('patch_random', 'patch_grid')
LOG_COLUMNS = ('step', 'loss', 'retrieval_rate')


@dataclass
class TrainingLog:
    """Per-step loss and top-1 positive retrieval rate on the training batches."""

    steps: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    retrieval: List[float] = field(default_factory=list)
    holdout_retrieval: Optional[float] = None

    def append(self, step: int, loss: float, rate: float):
        self.steps.append(step)
        self.losses.append(loss)
        self.retrieval.append(rate)

    def smoothed_losses(self, window: int = 50) -> np.ndarray:
        """Moving average of the loss over non-overlapping windows."""
        losses = np.asarray(self.losses)
        usable = len(losses) // window * window
        if usable == 0:
            return losses.copy()
        return losses[:usable].reshape(-1, window).mean(axis=1)

    def rows(self):
        return zip(self.steps, self.losses, self.retrieval)

    def to_csv(self, path):
        return write_csv(path, LOG_COLUMNS, self.rows())


def _step_seed(seed: int, step: int) -> List[int]:
    return [int(seed), 1_000_003, int(step)]


def _check_training(corpus, cfg: SesimConfig):
    if len(corpus) < 2:
        raise ConfigError(f"training needs a corpus of at least 2 images, got {len(corpus)}")
    if cfg.mode not in PATCH_MODES:
        raise ConfigError(f"contrastive training needs a patch sampling mode, got {cfg.mode!r}")


def _contrast_step(trunk_x: FeatureStack, trunk_aug: FeatureStack, trunk_y: FeatureStack,
                   sel: SelectionLayers, cfg: SesimConfig, rng: np.random.Generator, seed,
                   with_grads: bool = True):
    """
    One contrastive evaluation over every configured tap.

    Returns:
        tuple: (mean loss over taps, retrieval rate, parameter gradients or None)
    """
    stacks = [apply_selection(stack, sel) for stack in (trunk_x, trunk_aug, trunk_y)]
    n_taps = len(cfg.taps)

    losses, hits = [], []
    tap_grads = ({}, {}, {})
    for index, tap in enumerate(cfg.taps):
        fx, faug, fy = (stack.features(tap) for stack in stacks)
        samples = sample_queries(fx.shape, cfg, seed=tap_seed(seed, index))
        batch = batch_from_features(fx, faug, fy, samples, cfg, tap, rng)
        loss, grads, tap_hits = infonce(batch, cfg.tau, return_hits=True)
        losses.append(loss)
        hits.append(tap_hits)
        if with_grads:
            for target, grad in zip(tap_grads, batch_backward(batch, *grads)):
                target[tap] = grad / n_taps

    rate = float(np.mean(np.concatenate(hits)))
    if not with_grads:
        return float(np.mean(losses)), rate, None

    param_grads = {key: np.zeros_like(value) for key, value in sel.params.items()}
    for stack, grads in zip(stacks, tap_grads):
        _, partial = selection_backward(stack, grads)
        for key, value in partial.items():
            param_grads[key] += value
    return float(np.mean(losses)), rate, param_grads


def retrieval_rate(corpus: Sequence[np.ndarray], weights: ExtractorWeights, sel: SelectionLayers,
                   cfg: SesimConfig, aug_spec: Optional[AugmentSpec] = None, seed: Optional[int] = None,
                   trunks: Optional[List[FeatureStack]] = None) -> float:
    """
    Top-1 positive retrieval over K+1 candidates on a set of images.

    Each image is paired with an augmented copy of itself and with the next
    image of the set as the source of external negatives.

    Raises:
        ConfigError: fewer than 2 images, or a non-patch sampling mode
    """
    _check_training(corpus, cfg)
    aug_spec = aug_spec or AugmentSpec()
    seed = cfg.seed if seed is None else seed
    trunks = trunks or [extract(image, weights) for image in corpus]

    rates = []
    for index, image in enumerate(corpus):
        other = (index + 1) % len(corpus)
        eval_seed = [int(seed), 7, index]
        rng = np.random.default_rng(eval_seed)
        trunk_aug = extract(augment(image, aug_spec, seed=eval_seed), weights)
        _, rate, _ = _contrast_step(trunks[index], trunk_aug, trunks[other], sel, cfg, rng, eval_seed,
                                    with_grads=False)
        rates.append(rate)
    return float(np.mean(rates))


def train_structure_net(corpus: Sequence[np.ndarray], cfg: SesimConfig, steps: Optional[int] = None,
                        weights: Optional[ExtractorWeights] = None, aug_spec: Optional[AugmentSpec] = None,
                        optimizer: Optional[OptimizerConfig] = None, selection: Optional[SelectionLayers] = None,
                        holdout: Optional[Sequence[np.ndarray]] = None,
                        progress: bool = False) -> Tuple[SelectionLayers, TrainingLog]:
    """
    Train the selection layers with L_S = InfoNCE.

    Each step draws an image x and a different image y from the corpus,
    augments x, and takes one Adam step on the mean contrastive loss over
    cfg.taps.

    Args:
        corpus: Images (1, 3, H, W), at least two
        cfg: Loss configuration (taps, N_s, patch, K, tau, seed)
        steps: Number of updates, defaults to optimizer.steps
        weights: Frozen trunk weights, init_random(default_arch(), cfg.seed) if omitted
        aug_spec: Augmentation ranges for x_aug
        optimizer: Adam hyperparameters
        selection: Starting selection layers, small-random from cfg.seed if omitted
        holdout: Images for a final held-out retrieval measurement
        progress: Show a tqdm progress bar

    Returns:
        tuple: (trained SelectionLayers, TrainingLog)

    Raises:
        ConfigError: corpus with fewer than 2 images or a non-patch sampling mode
    """
    _check_training(corpus, cfg)
    if weights is None:
        weights = init_random(default_arch(), cfg.seed)
    optimizer = optimizer or OptimizerConfig()
    steps = optimizer.steps if steps is None else steps
    aug_spec = aug_spec or AugmentSpec(seed=cfg.seed)
    sel = selection.copy() if selection is not None else init_selection(weights.arch.tap_channels, seed=cfg.seed)

    logger.info("[Trainer] caching trunk features for %d images", len(corpus))
    trunks = [extract(image, weights) for image in corpus]

    state = OptState.from_config(optimizer)
    log = TrainingLog()
    bar = tqdm(range(steps), desc='train-structure', disable=not progress)
    for step in bar:
        seed = _step_seed(cfg.seed, step)
        rng = np.random.default_rng(seed)
        ix, iy = rng.choice(len(corpus), size=2, replace=False)
        x_aug = augment(corpus[ix], aug_spec, seed=seed)
        trunk_aug = extract(x_aug, weights)

        loss, rate, grads = _contrast_step(trunks[ix], trunk_aug, trunks[iy], sel, cfg, rng, seed)
        params, state = adam_step(sel.params, grads, state)
        sel = SelectionLayers(params)

        log.append(step, loss, rate)
        bar.set_postfix(loss=f'{loss:.4f}', top1=f'{rate:.2f}')
        if step % 100 == 0:
            logger.info("[Trainer] step %d loss=%.4f retrieval=%.3f", step, loss, rate)

    if holdout:
        log.holdout_retrieval = retrieval_rate(holdout, weights, sel, cfg, aug_spec, seed=cfg.seed + 1)
        logger.info("[Trainer] held-out retrieval %.3f", log.holdout_retrieval)

    return sel, log
