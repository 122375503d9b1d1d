"""
Structure-preserving stylization by direct pixel optimization.

    total = lam * structure(content, out) + gram_style(out, style)

The structure term is the multi-layer FSeSim/LSeSim loss; the appearance
term compares centered channel covariances (Gram matrices) at every tap.
Pixels are updated with Adam and clamped to [0, 1] after every step. The
optimization runs in double precision.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import ConfigError
from ..extractor import FeatureStack
from ..sesim import SesimConfig, multi_layer_loss, tap_samples
from ..utils import write_csv
from .optim import OptimizerConfig, OptState, adam_step

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ('step', 'total', 'content', 'style')


def gram(features: np.ndarray) -> np.ndarray:
    """Centered channel covariance (C, C) of a (1, C, H, W) feature map, divided by H * W."""
    flat = features[0].reshape(features.shape[1], -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    return centered @ centered.T / flat.shape[1]


def gram_style(stack_out: FeatureStack, stack_style: FeatureStack, taps: Sequence[str]):
    """
    Mean over taps of the mean squared Gram difference.

    Returns:
        tuple: (loss, gradient w.r.t. the output features per tap)
    """
    loss, grads = 0.0, {}
    for tap in taps:
        f_out = stack_out.features(tap)
        diff = gram(f_out) - gram(stack_style.features(tap))
        loss += float(np.mean(diff * diff)) / len(taps)

        channels = f_out.shape[1]
        flat = f_out[0].reshape(channels, -1)
        centered = flat - flat.mean(axis=1, keepdims=True)
        grad_gram = 2 * diff / (channels * channels * len(taps))
        # centered rows have zero mean, so the centering step passes the gradient through
        grad = (grad_gram + grad_gram.T) @ centered / flat.shape[1]
        grads[tap] = grad.reshape(f_out.shape)
    return loss, grads


@dataclass
class StylizeResult:
    image: np.ndarray
    trace: List[Tuple[int, float, float, float]] = field(default_factory=list)

    @property
    def initial_total(self) -> float:
        return self.trace[0][1]

    @property
    def best_total(self) -> float:
        return min(row[1] for row in self.trace)

    def to_csv(self, path):
        return write_csv(path, TRACE_COLUMNS, self.trace)


def stylize(content: np.ndarray, style: np.ndarray, cfg: SesimConfig, steps: int, net,
            lr: float = 0.01, lam: Optional[float] = None, progress: bool = False) -> StylizeResult:
    """
    Optimize pixels starting from the content image.

    Args:
        content: Image (1, 3, H, W) whose structure is kept
        style: Image (1, 3, H', W') whose channel statistics are matched
        cfg: Structure loss configuration, queries drawn once per tap from cfg.seed
        steps: Number of Adam updates, at least 1
        net: Structure network
        lr: Pixel learning rate
        lam: Weight of the structure term, defaults to cfg.lam

    Returns:
        StylizeResult: final image (float32) and the per-step trace; row t holds
        the losses of the image after t updates
    """
    if steps < 1:
        raise ConfigError(f"steps must be at least 1, got {steps}")
    lam = cfg.lam if lam is None else lam

    content = content.astype(np.float64)
    stack_content = net.features(content)
    stack_style = net.features(style.astype(np.float64))
    samples = tap_samples(stack_content, cfg)

    params = {'image': content.copy()}
    state = OptState.from_config(OptimizerConfig(lr=lr, steps=steps))
    result = StylizeResult(content)

    def evaluate(step):
        stack_out = net.features(params['image'])
        structure = multi_layer_loss(stack_content, stack_out, cfg, samples)
        style_loss, style_grads = gram_style(stack_out, stack_style, cfg.taps)
        result.trace.append((step, lam * structure.loss + style_loss, structure.loss, style_loss))
        tap_grads = {tap: lam * structure.grads_y[tap] + style_grads[tap] for tap in cfg.taps}
        return net.backward(stack_out, tap_grads)

    for step in tqdm(range(steps), desc='stylize', disable=not progress):
        grad = evaluate(step)
        params, state = adam_step(params, {'image': grad}, state)
        params['image'] = np.clip(params['image'], 0, 1)
        if step % 50 == 0:
            logger.debug("[Stylize] step %d total=%.6f", step, result.trace[-1][1])
    evaluate(steps)

    result.image = params['image'].astype(np.float32)
    logger.info("[Stylize] total loss %.6f -> %.6f", result.initial_total, result.trace[-1][1])
    return result
