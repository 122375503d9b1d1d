"""
Finite-difference verification of every backward kernel.

Each check builds seeded double-precision inputs, reduces the kernel output
to a scalar and compares the analytic gradient with central differences on
a seeded subset of entries. The relative error of one tensor is taken over
the sampled entries as a whole,

    ||a - n|| / max(||a||, ||n||, 1e-12)

and a check passes when the largest error over its tensors stays below the
check's threshold. Checks that run the whole trunk cross relu and max-pool
switch points more easily and get a looser bound.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..contrast.infonce import infonce_maps
from ..extractor import (FeatureStack, SelectionLayers, apply_selection, default_arch, extract,
                         extract_backward, init_random, init_selection, selection_backward)
from ..kernels import (ConvSpec, conv2d_backward, conv2d_forward, maxpool2_backward, maxpool2_forward,
                       relu_backward, relu_forward)
from ..nets import LearnedStructureNet
from ..sesim import SamplerFactory, SesimConfig, corr_maps, corr_maps_backward, fsesim_loss, multi_layer_loss
from ..sesim.loss import tap_samples
from ..utils import write_csv
from .stylize import gram_style

logger = logging.getLogger(__name__)

THRESHOLD = 1e-5
THRESHOLDS = {
    'conv': 1e-6,
    'relu': 1e-6,
    'pool': 1e-6,
    'end_to_end': 1e-4,
    'end_to_end_lsesim': 1e-4,
}
REPORT_COLUMNS = ('check', 'max_rel_err', 'threshold', 'passed')

CHANNELS, TAP_SIDE, PATCH, N_SAMPLES = 8, 16, 4, 8


class FiniteDiff:
    """Central differences on a sample of entries, with an optional sign flip of the analytic side."""

    def __init__(self, rng: np.random.Generator, flip: bool = False, eps: float = 1e-5, entries: int = 24):
        self.rng = rng
        self.flip = flip
        self.eps = eps
        self.entries = entries
        self.errors: List[float] = []

    def compare(self, func: Callable[[], float], param: np.ndarray, analytic: np.ndarray) -> float:
        """
        Perturb `param` in place entry by entry and compare with `analytic`.

        Returns:
            float: relative error of the sampled entries taken as one vector
        """
        analytic = -analytic if self.flip else analytic
        picks = self.rng.choice(param.size, size=min(self.entries, param.size), replace=False)
        numeric = np.empty(len(picks))
        for i, j in enumerate(picks):
            saved = param.flat[j]
            param.flat[j] = saved + self.eps
            plus = func()
            param.flat[j] = saved - self.eps
            minus = func()
            param.flat[j] = saved
            numeric[i] = (plus - minus) / (2 * self.eps)

        error = relative_error(analytic.flat[picks], numeric)
        self.errors.append(error)
        return error

    @property
    def max_error(self) -> float:
        return max(self.errors)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def _away_from_zero(values: np.ndarray, margin: float = 0.05) -> np.ndarray:
    return np.sign(values) * (np.abs(values) + margin)


def check_conv(rng, fd):
    x = rng.standard_normal((1, 3, 9, 9))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    R = rng.standard_normal((1, 4, 9, 9))

    def func():
        return float(np.sum(conv2d_forward(x, ConvSpec(w, b)) * R))

    gx, gw, gb = conv2d_backward(x, ConvSpec(w, b), R)
    fd.compare(func, x, gx)
    fd.compare(func, w, gw)
    fd.compare(func, b, gb)


def check_relu(rng, fd):
    x = _away_from_zero(rng.standard_normal((1, CHANNELS, 6, 6)))
    R = rng.standard_normal(x.shape)
    fd.compare(lambda: float(np.sum(relu_forward(x) * R)), x, relu_backward(x, R))


def check_pool(rng, fd):
    x = rng.standard_normal((1, CHANNELS, 8, 8))
    pooled, indices = maxpool2_forward(x)
    R = rng.standard_normal(pooled.shape)
    fd.compare(lambda: float(np.sum(maxpool2_forward(x)[0] * R)), x, maxpool2_backward(indices, R))


def check_selection(rng, fd):
    features = rng.standard_normal((1, CHANNELS, TAP_SIDE, TAP_SIDE))
    stack = FeatureStack({'tap': (features, 4)})
    layers = init_selection({'tap': CHANNELS}, seed=int(rng.integers(1 << 31)), std=0.5)
    sel = SelectionLayers({k: v.astype(np.float64) for k, v in layers.params.items()})
    R = rng.standard_normal(features.shape)

    def func():
        return float(np.sum(apply_selection(stack, sel).features('tap') * R))

    trunk_grads, param_grads = selection_backward(apply_selection(stack, sel), {'tap': R})
    fd.compare(func, features, trunk_grads['tap'])
    for key in sorted(sel.params):
        fd.compare(func, sel.params[key], param_grads[key])


def _maps_check(normalize):
    def check(rng, fd):
        features = rng.standard_normal((1, CHANNELS, TAP_SIDE, TAP_SIDE))
        samples = SamplerFactory.get_sampler(
            'patch_random', features.shape, PATCH, N_SAMPLES, int(rng.integers(1 << 31))
        ).sample()
        R = rng.standard_normal((N_SAMPLES, PATCH * PATCH))

        def func():
            return float(np.sum(corr_maps(features, samples, normalize=normalize).S * R))

        fd.compare(func, features, corr_maps_backward(features, samples, R, normalize))
    return check


def _fsesim_check(metric):
    def check(rng, fd):
        Sx = rng.standard_normal((N_SAMPLES, PATCH * PATCH))
        Sy = rng.standard_normal((N_SAMPLES, PATCH * PATCH))
        _, gx, gy = fsesim_loss(Sx, Sy, metric)
        fd.compare(lambda: fsesim_loss(Sx, Sy, metric)[0], Sx, gx)
        fd.compare(lambda: fsesim_loss(Sx, Sy, metric)[0], Sy, gy)
    return check


def check_infonce(rng, fd, k=7, tau=0.07):
    v = rng.standard_normal((N_SAMPLES, PATCH * PATCH))
    v_pos = v + 0.5 * rng.standard_normal(v.shape)
    v_neg = rng.standard_normal((N_SAMPLES, k, PATCH * PATCH))

    def func():
        return infonce_maps(v, v_pos, v_neg, tau)[0]

    _, grads = infonce_maps(v, v_pos, v_neg, tau)
    fd.compare(func, v, grads.v)
    fd.compare(func, v_pos, grads.v_pos)
    fd.compare(func, v_neg, grads.v_neg)


def check_gram_style(rng, fd):
    out = rng.standard_normal((1, CHANNELS, TAP_SIDE, TAP_SIDE))
    style = FeatureStack({'tap': (rng.standard_normal(out.shape), 4)})
    stack = FeatureStack({'tap': (out, 4)})

    _, grads = gram_style(stack, style, ['tap'])
    fd.compare(lambda: gram_style(stack, style, ['tap'])[0], out, grads['tap'])


def _end_to_end_check(learned):
    def check(rng, fd):
        seed = int(rng.integers(1 << 31))
        weights = init_random(default_arch(), seed)
        cfg = SesimConfig(n_samples=N_SAMPLES, patch=PATCH, seed=seed)
        x = rng.random((1, 3, 32, 32))
        y = rng.random((1, 3, 32, 32))

        if learned:
            layers = init_selection(weights.arch.tap_channels, seed=seed, std=0.2)
            net = LearnedStructureNet(weights, SelectionLayers({k: v.astype(np.float64) for k, v in layers.params.items()}))
            features, backward = net.features, net.backward
        else:
            features = partial(extract, weights=weights)
            backward = extract_backward

        stack_y = features(y)
        samples = tap_samples(stack_y, cfg)

        def func():
            return multi_layer_loss(features(x), stack_y, cfg, samples).loss

        stack_x = features(x)
        grads = multi_layer_loss(stack_x, stack_y, cfg, samples).grads_x
        fd.compare(func, x, backward(stack_x, grads))
    return check


CHECKS: Dict[str, Callable] = {
    'conv': check_conv,
    'relu': check_relu,
    'pool': check_pool,
    'selection': check_selection,
    'corr_maps': _maps_check(False),
    'corr_maps_normalized': _maps_check(True),
    'fsesim_l1': _fsesim_check('l1'),
    'fsesim_cos': _fsesim_check('cos'),
    'infonce': check_infonce,
    'gram_style': check_gram_style,
    'end_to_end': _end_to_end_check(False),
    'end_to_end_lsesim': _end_to_end_check(True),
}


@dataclass
class CheckResult:
    check: str
    max_rel_err: float
    threshold: float = THRESHOLD

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_err < self.threshold)


@dataclass
class GradcheckReport:
    seed: int
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def failures(self) -> List[str]:
        return [result.check for result in self.results if not result.passed]

    def rows(self):
        return [(r.check, r.max_rel_err, r.threshold, r.passed) for r in self.results]

    def to_csv(self, path):
        return write_csv(path, REPORT_COLUMNS, self.rows())


def gradcheck_suite(seed: int = 0, inject: Optional[str] = None,
                    checks: Optional[Sequence[str]] = None) -> GradcheckReport:
    """
    Run the finite-difference checks.

    Args:
        seed: Seed for every input; check i draws from [seed, i]
        inject: Name of a check whose analytic gradient is sign-flipped (mutation testing)
        checks: Subset of check names to run, all by default

    Returns:
        GradcheckReport: one result per check, in registry order

    Raises:
        KeyError: unknown check name
    """
    names = list(CHECKS) if checks is None else list(checks)
    for name in names + ([inject] if inject else []):
        if name not in CHECKS:
            raise KeyError(f"unknown gradient check: {name}")

    report = GradcheckReport(seed)
    for index, name in enumerate(CHECKS):
        if name not in names:
            continue
        rng = np.random.default_rng([seed, index])
        fd = FiniteDiff(rng, flip=(name == inject))
        CHECKS[name](rng, fd)
        result = CheckResult(name, fd.max_error, THRESHOLDS.get(name, THRESHOLD))
        report.results.append(result)
        logger.info("[Gradcheck] %-22s max_rel_err=%.3e %s", name, result.max_rel_err,
                    'ok' if result.passed else 'FAILED')
    return report
