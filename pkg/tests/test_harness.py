import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import ConfigError, GeometryError, ShapeMismatchError
from core.extractor import default_arch, extract, init_random
from core.harness import (OptimizerConfig, OptState, SynthSpec, adam_step, baseline_error_map, colorize,
                          colormap_lut, error_map, gradcheck_suite, gram, gram_style, high_frequency_energy,
                          pair_auc, selfsim_heatmap, stylize, synth_dataset)
from core.harness.gradcheck import relative_error
from core.harness.heatmap import min_max
from core.nets import NetFactory
from core.sesim import SesimConfig, corr_maps, row_distances
from core.utils import read_csv

SMALL_WIDTHS = (4, 8, 8, 8)


def small_net(kind='fsesim', seed=0):
    return NetFactory.create(kind, init_random(default_arch(widths=SMALL_WIDTHS), seed=seed))


def test_adam_fixed_point_and_first_step():
    print("=" * 60)
    print("Testing the Adam optimizer")
    print("=" * 60)

    params = {'w': np.array([0.5, -1.0, 2.0])}
    state = OptState.from_config(OptimizerConfig(lr=0.1))
    updated, state = adam_step(params, {'w': np.zeros(3)}, state)
    assert_array_equal(updated['w'], params['w'])
    assert state.step == 1
    print("  [PASS] zero gradient leaves parameters unchanged")

    grad = np.array([1e-3, -5.0, 0.2])
    moved, _ = adam_step(params, {'w': grad}, OptState.from_config(OptimizerConfig(lr=0.1)))
    delta = moved['w'] - params['w']
    assert (np.sign(delta) == -np.sign(grad)).all()
    assert (np.abs(delta) <= 0.1 * (1 + 1e-6)).all()
    assert_allclose(np.abs(delta), 0.1, rtol=1e-4)
    print("  [PASS] first step moves each parameter by at most lr against its gradient")

    try:
        adam_step(params, {'w': np.zeros(2)}, OptState())
        raise AssertionError("expected ShapeMismatchError")
    except ShapeMismatchError:
        pass
    try:
        adam_step(params, {'v': np.zeros(3)}, OptState())
        raise AssertionError("expected ShapeMismatchError")
    except ShapeMismatchError:
        pass
    print("  [PASS] mismatched names or shapes raise")


def test_adam_converges_on_quadratic():
    rng = np.random.default_rng(0)
    target = rng.standard_normal(5)
    params = {'p': target + rng.uniform(-0.01, 0.01, size=5)}
    state = OptState.from_config(OptimizerConfig(lr=1e-3))
    for _ in range(100):
        params, state = adam_step(params, {'p': params['p'] - target}, state)
    loss = 0.5 * np.sum((params['p'] - target) ** 2)
    assert loss < 1e-6, loss
    print(f"  [PASS] 100 steps on a quadratic: loss {loss:.2e}")


def test_synth_corpus():
    spec = SynthSpec(size=64, count=3, seed=4)
    corpus, again = synth_dataset(spec), synth_dataset(spec)
    for a, b in zip(corpus.images_a + corpus.images_b, again.images_a + again.images_b):
        assert_array_equal(a, b)
    print("  [PASS] same seed, bit-identical corpus")

    assert len(corpus.images_a) == len(corpus.masks) == 3
    for image in corpus.images_a + corpus.images_b:
        assert image.shape == (1, 3, 64, 64) and image.dtype == np.float32
        assert image.min() >= 0 and image.max() <= 1
    assert corpus.aligned_pairs == [(0, 0), (1, 1), (2, 2)]
    assert all(a != b for a, b in corpus.shuffled_pairs)
    assert sorted(b for _, b in corpus.shuffled_pairs) == [0, 1, 2]
    kinds = [row[0] for row in corpus.pair_rows()]
    assert kinds == ['aligned'] * 3 + ['shuffled'] * 3
    print("  [PASS] aligned pairs share a mask, shuffled pairs never do")

    other = synth_dataset(SynthSpec(size=64, count=3, seed=5))
    assert not np.array_equal(other.masks[0], corpus.masks[0])

    energy_a = np.mean([high_frequency_energy(image) for image in corpus.images_a])
    energy_b = np.mean([high_frequency_energy(image) for image in corpus.images_b])
    assert energy_b >= 2 * energy_a, (energy_a, energy_b)
    print(f"  [PASS] texture domains separable by spectrum ({energy_a:.3f} vs {energy_b:.3f})")

    for labels, image_a, image_b in zip(corpus.masks, corpus.images_a, corpus.images_b):
        for image in (image_a, image_b):
            gray = image[0].mean(axis=0)
            background = gray[labels == 0].mean()
            shapes = [gray[labels == label].mean() for label in np.unique(labels)[1:]
                      if (labels == label).sum() >= 64]
            assert all(background < level for level in shapes)
    print("  [PASS] background stays darker than every shape in both domains")

    assert SynthSpec.from_dict(spec.to_dict()) == spec
    for bad in ({'count': 1}, {'size': 8}, {'shapes': ['star']}, {'min_shapes': 3, 'max_shapes': 2},
                {'noise_amplitude': 1.0}, {'stripe_amplitude': -0.1}):
        try:
            SynthSpec(**bad)
            raise AssertionError(f"expected ConfigError for {bad}")
        except ConfigError:
            pass
    print("  [PASS] corpus spec validation")


def test_error_map():
    net = small_net()
    rng = np.random.default_rng(1)
    x, y = rng.random((1, 3, 64, 64)), rng.random((1, 3, 64, 64))
    cfg = SesimConfig(taps=('tapA',), n_samples=16, patch=4, metric='cos')

    same = error_map(x, x, cfg, net)
    assert not same.values.any()
    print("  [PASS] error_map(x, x) is all zeros")

    grid = error_map(x, y, cfg, net)
    assert grid.shape == (4, 4)
    assert_array_equal(grid.coords[:, 0, 0], np.array([3, 6, 10, 13]) * 4 + 2)
    assert grid.heatmap.shape == (64, 64)
    assert (grid.values >= 0).all()
    print("  [PASS] grid follows the 4x4 lattice on a 16x16 tap")

    fx, fy = net.features(x).features('tapA'), net.features(y).features('tapA')
    expected = row_distances(corr_maps(fx, grid.samples), corr_maps(fy, grid.samples), 'cos')
    assert_allclose(grid.values.ravel(), expected, rtol=1e-12)
    assert len(grid.rows()) == 16
    print("  [PASS] values equal the per-row structure distances")

    assert not baseline_error_map(x, x, cfg, net, 'pixel').values.any()
    assert baseline_error_map(x, y, cfg, net, 'perceptual').shape == (4, 4)
    for call in (lambda: error_map(x, y[:, :, :32, :32], cfg, net),
                 lambda: baseline_error_map(x, y, cfg, net, 'ssim')):
        try:
            call()
            raise AssertionError("expected an error")
        except (ShapeMismatchError, ConfigError):
            pass
    print("  [PASS] baselines and error cases")


def test_pair_auc():
    assert pair_auc([0.1, 0.2], [0.3, 0.4]) == 1.0
    assert pair_auc([0.3, 0.4], [0.1, 0.2]) == 0.0
    assert pair_auc([0.5], [0.5]) == 0.5
    assert_allclose(pair_auc([0.1, 0.3], [0.2, 0.4]), 0.75)
    try:
        pair_auc([], [0.2])
        raise AssertionError("expected ConfigError")
    except ConfigError:
        pass
    print("  [PASS] rank AUC of shuffled over aligned errors")


def test_selfsim_heatmap():
    net = small_net()
    image = np.random.default_rng(2).random((1, 3, 64, 64))
    cfg = SesimConfig(taps=('tapA',), patch=4, normalize_features=True)

    heat = selfsim_heatmap(image, (32, 32), cfg, net)
    assert heat.query == (8, 8) and heat.origin == (24, 24)
    assert heat.raw[2, 2] >= heat.raw.max() - 1e-12
    assert heat.values.min() == 0.0 and heat.values.max() == 1.0
    assert heat.patch_image.shape == (16, 16)
    assert len(heat.rows()) == 16
    print("  [PASS] with normalized features the query is its own best match")

    assert heat.image.shape == (64, 64)
    assert_array_equal(heat.image[heat.footprint()], heat.patch_image)
    outside = np.ones((64, 64), dtype=bool)
    outside[heat.footprint()] = False
    assert not heat.image[outside].any()
    print("  [PASS] heatmap covers the input resolution, zero outside the patch")

    flat = selfsim_heatmap(np.full((1, 3, 64, 64), 0.4), (32, 32), cfg, net)
    assert not flat.values.any() and not flat.image.any()
    print("  [PASS] constant image gives a flat heatmap")

    try:
        selfsim_heatmap(image, (0, 0), cfg, net)
        raise AssertionError("expected GeometryError")
    except GeometryError:
        pass
    print("  [PASS] queries outside the interior raise GeometryError")


def test_colormap():
    lut = colormap_lut()
    assert lut.shape == (256, 3)
    assert_allclose(lut[0], np.array([0x44, 0x01, 0x54]) / 255)
    assert_allclose(lut[-1], np.array([0xfd, 0xe7, 0x25]) / 255)
    rgb = colorize(np.array([[0.0, 1.0]]))
    assert rgb.shape == (1, 3, 1, 2) and rgb.dtype == np.float32
    assert_array_equal(min_max(np.array([2.0, 2.0])), [0.0, 0.0])
    assert_allclose(min_max(np.array([1.0, 2.0, 3.0])), [0.0, 0.5, 1.0])
    print("  [PASS] viridis lookup table and min-max scaling")


def test_gram_style():
    rng = np.random.default_rng(3)
    weights = init_random(default_arch(widths=SMALL_WIDTHS), seed=1)
    stack = extract(rng.random((1, 3, 32, 32)), weights)
    other = extract(rng.random((1, 3, 32, 32)), weights)

    g = gram(stack.features('tapA'))
    assert g.shape == (8, 8)
    assert_allclose(g, g.T)
    loss, grads = gram_style(stack, stack, ('tapA', 'tapB'))
    assert loss == 0.0 and all(not grad.any() for grad in grads.values())
    assert gram_style(stack, other, ('tapA', 'tapB'))[0] > 0
    print("  [PASS] Gram style distance is zero for equal statistics")


def test_stylize():
    net = small_net()
    corpus = synth_dataset(SynthSpec(size=32, count=2, seed=0))
    content, style = corpus.images_a[0], corpus.images_b[1]
    cfg = SesimConfig(taps=('tapA', 'tapB'), n_samples=8, patch=2)

    still = stylize(content, content, cfg, 3, net)
    assert still.initial_total == 0.0
    assert_allclose(still.image, content, atol=1e-6)
    print("  [PASS] style == content is a fixed point")

    result = stylize(content, style, cfg, 5, net, lr=0.05)
    assert len(result.trace) == 6
    assert result.image.min() >= 0 and result.image.max() <= 1
    assert result.best_total <= result.initial_total
    with tempfile.TemporaryDirectory() as tmp:
        rows = read_csv(result.to_csv(Path(tmp) / 'trace.csv'))
    assert list(rows[0]) == ['step', 'total', 'content', 'style'] and len(rows) == 6
    print("  [PASS] pixels stay in [0, 1] and the trace has steps + 1 rows")

    try:
        stylize(content, style, cfg, 0, net)
        raise AssertionError("expected ConfigError")
    except ConfigError:
        pass


def test_gradcheck_suite():
    report = gradcheck_suite(seed=0)
    for result in report.results:
        print(f"    {result.check:<24} {result.max_rel_err:.2e}")
    assert report.passed, report.failures()
    print("  [PASS] every backward kernel agrees with finite differences")

    injected = gradcheck_suite(seed=0, inject='pool', checks=['pool', 'relu'])
    assert not injected.passed and injected.failures() == ['pool']
    print("  [PASS] a sign-flipped gradient is caught")

    for seed in (1, 7):
        again = gradcheck_suite(seed=seed, checks=['infonce', 'end_to_end', 'end_to_end_lsesim'])
        assert again.passed, (seed, again.rows())
    thresholds = {row[0]: row[2] for row in again.rows()}
    assert thresholds == {'infonce': 1e-5, 'end_to_end': 1e-4, 'end_to_end_lsesim': 1e-4}
    print("  [PASS] loss-level checks pass on other seeds with their own thresholds")

    # tiny entries next to large ones do not dominate the error
    assert relative_error(np.array([1.0, 1e-9]), np.array([1.0, 2e-9])) < 1e-8
    assert abs(relative_error(np.array([1.0, -2.0]), np.array([-1.0, 2.0])) - 2.0) < 1e-12
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    print("  [PASS] relative error is measured on the whole sampled vector")

    first = gradcheck_suite(seed=3, checks=['conv', 'infonce'])
    second = gradcheck_suite(seed=3, checks=['conv', 'infonce'])
    assert first.rows() == second.rows()
    print("  [PASS] report is deterministic per seed")

    try:
        gradcheck_suite(checks=['nonexistent'])
        raise AssertionError("expected KeyError")
    except KeyError:
        pass


def main():
    print("\n" + "*" * 60)
    print("HARNESS TESTS")
    print("*" * 60 + "\n")

    test_adam_fixed_point_and_first_step()
    test_adam_converges_on_quadratic()
    test_synth_corpus()
    test_error_map()
    test_pair_auc()
    test_selfsim_heatmap()
    test_colormap()
    test_gram_style()
    test_stylize()
    test_gradcheck_suite()

    print("\n" + "*" * 60)
    print("ALL TESTS COMPLETED")
    print("*" * 60)


if __name__ == "__main__":
    main()
