import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import ConfigError, GeometryError, ShapeMismatchError, UnknownTapError
from core.extractor import default_arch, extract, init_random
from core.sesim import (SampleSet, SamplerFactory, SesimConfig, corr_maps, corr_maps_backward, fsesim_loss,
                        interior_range, multi_layer_loss, row_distances, sample_queries, tap_samples)
from core.utils import tap_seed


def constant_field(vector, height=6, width=6):
    vector = np.asarray(vector, dtype=np.float64)
    return np.broadcast_to(vector[None, :, None, None], (1, len(vector), height, width)).copy()


def brute_force_loss(Sx, Sy, metric):
    a, b = np.asarray(Sx, dtype=np.float64), np.asarray(Sy, dtype=np.float64)
    if metric == 'l1':
        total = 0.0
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                total += abs(a[i, j] - b[i, j])
        return total / a.size
    total = 0.0
    for i in range(a.shape[0]):
        dot = sum(a[i, j] * b[i, j] for j in range(a.shape[1]))
        na = sum(v * v for v in a[i]) ** 0.5
        nb = sum(v * v for v in b[i]) ** 0.5
        total += 1 - dot / (na * nb)
    return total / a.shape[0]


def test_grid_lattice():
    print("=" * 60)
    print("Testing query samplers")
    print("=" * 60)

    cfg = SesimConfig(n_samples=4, patch=4, mode='patch_grid')
    samples = sample_queries((8, 8), cfg)
    assert_array_equal(samples.queries, [[3, 3], [3, 5], [5, 3], [5, 5]])
    assert samples.grid_shape == (2, 2)
    assert samples.points.shape == (4, 16, 2)
    assert_array_equal(samples.points[0, 0], [1, 1])
    assert_array_equal(samples.points[0, -1], [4, 4])
    print("  [PASS] 2x2 lattice at the cell centres of the valid region")


def test_patch_random_bounds():
    cfg = SesimConfig(n_samples=1000, patch=4, mode='patch_random', seed=11)
    samples = sample_queries((10, 12), cfg)
    r_lo, r_hi = interior_range(10, 4)
    c_lo, c_hi = interior_range(12, 4)
    assert (r_lo, r_hi, c_lo, c_hi) == (2, 8, 2, 10)
    assert samples.queries[:, 0].min() >= r_lo and samples.queries[:, 0].max() <= r_hi
    assert samples.queries[:, 1].min() >= c_lo and samples.queries[:, 1].max() <= c_hi
    assert samples.points.min() >= 0
    assert samples.points[..., 0].max() < 10 and samples.points[..., 1].max() < 12
    print("  [PASS] 1000 random queries keep their patches inside the map")

    again = sample_queries((10, 12), cfg)
    assert samples.same_geometry(again)
    other = sample_queries((10, 12), SesimConfig(n_samples=1000, patch=4, seed=12))
    assert not samples.same_geometry(other)
    print("  [PASS] sampling is deterministic per seed")


def test_sampler_geometry_errors():
    for mode in ('patch_random', 'patch_grid'):
        try:
            sample_queries((3, 8), SesimConfig(patch=4, mode=mode))
            raise AssertionError("expected GeometryError")
        except GeometryError:
            pass
    print("  [PASS] maps smaller than the patch are rejected")

    global_set = sample_queries((3, 4), SesimConfig(patch=8, mode='global'))
    assert global_set.shared
    assert global_set.queries.shape == (12, 2) and global_set.points.shape == (12, 2)
    print("  [PASS] global mode: every position is a query and a patch point")

    scattered = sample_queries((5, 7), SesimConfig(n_samples=9, patch=3, mode='scattered_random', seed=2))
    assert scattered.points.shape == (9, 9, 2)
    assert scattered.points[..., 0].max() < 5 and scattered.points[..., 1].max() < 7
    print("  [PASS] scattered mode draws points anywhere in the map")


def test_corr_maps_values():
    one_hot = constant_field([0.0, 1.0, 0.0])
    samples = sample_queries((6, 6), SesimConfig(n_samples=5, patch=3, seed=1))
    assert_array_equal(corr_maps(one_hot, samples).S, np.ones((5, 9)))
    print("  [PASS] identical one-hots correlate to 1 everywhere")

    field = np.zeros((1, 2, 3, 3))
    field[0, 1] = 1.0
    field[0, :, 1, 1] = [1.0, 0.0]
    centre = SampleSet(np.array([[1, 1]]), np.array([[[0, 0], [0, 1], [2, 2]]]), 3, 'patch_random', (3, 3))
    assert_array_equal(corr_maps(field, centre).S, [[0.0, 0.0, 0.0]])
    print("  [PASS] an orthogonal query gives a zero row")

    hand = np.zeros((1, 2, 2, 2))
    hand[0, :, 0, 0], hand[0, :, 0, 1] = [1, 2], [3, 0]
    hand[0, :, 1, 0], hand[0, :, 1, 1] = [0, 1], [2, 2]
    maps = corr_maps(hand, sample_queries((2, 2), SesimConfig(mode='global')))
    assert_array_equal(maps.S, [[5, 3, 2, 6], [3, 9, 0, 6], [2, 0, 1, 2], [6, 6, 2, 8]])
    print("  [PASS] 2x2 global map matches hand-computed dot products")

    try:
        corr_maps(hand, SampleSet(np.array([[2, 0]]), np.array([[[0, 0]]]), 1, 'patch_random', (2, 2)))
        raise AssertionError("expected GeometryError")
    except GeometryError:
        pass
    print("  [PASS] out-of-range coordinates raise GeometryError")


def test_corr_maps_shift_equivariance():
    # padding none: shifting the image by the tap stride moves tapA by one cell
    weights = init_random(default_arch('none'), seed=2)
    big = np.random.default_rng(5).random((1, 3, 50, 50))
    base = extract(big[:, :, :46, :46], weights).features('tapA')
    shifted = extract(big[:, :, 4:50, 4:50], weights).features('tapA')
    assert base.shape == shifted.shape == (1, 64, 8, 8)

    inner = sample_queries((7, 7), SesimConfig(n_samples=6, patch=3, seed=4))
    moved = SampleSet(inner.queries + 1, inner.points + 1, inner.patch, inner.mode, (8, 8))
    inner = SampleSet(inner.queries, inner.points, inner.patch, inner.mode, (8, 8))
    for normalize in (False, True):
        assert_allclose(corr_maps(shifted, inner, normalize=normalize).S,
                        corr_maps(base, moved, normalize=normalize).S, rtol=1e-6, atol=1e-9)
    print("  [PASS] shifted image with shifted queries gives the same maps")


def test_corr_maps_backward():
    rng = np.random.default_rng(0)
    field = rng.standard_normal((1, 4, 3, 3))
    samples = SampleSet(np.array([[1, 1]]), np.array([[[0, 2]]]), 1, 'patch_random', (3, 3))

    assert not corr_maps_backward(field, samples, np.zeros((1, 1))).any()

    grad = corr_maps_backward(field, samples, np.ones((1, 1)))
    expected = np.zeros_like(field)
    expected[0, :, 1, 1] = field[0, :, 0, 2]
    expected[0, :, 0, 2] = field[0, :, 1, 1]
    assert_array_equal(grad, expected)
    print("  [PASS] product rule on a single dot product")

    repeated = SampleSet(np.array([[1, 1], [1, 1]]), np.array([[[0, 2]], [[0, 2]]]), 1, 'patch_random', (3, 3))
    assert_allclose(corr_maps_backward(field, repeated, np.ones((2, 1))), 2 * expected)
    print("  [PASS] repeated positions accumulate")

    try:
        corr_maps_backward(field, samples, np.zeros((2, 1)))
        raise AssertionError("expected ShapeMismatchError")
    except ShapeMismatchError:
        pass


def test_fsesim_closed_forms():
    samples = sample_queries((6, 6), SesimConfig(n_samples=6, patch=3, seed=3))
    Sa = corr_maps(constant_field([1.0, 0.0, 0.0]), samples)
    Sb = corr_maps(constant_field([0.0, 2.0, 0.0]), samples)
    assert_allclose(fsesim_loss(Sa, Sb, 'l1')[0], 3.0)
    assert_allclose(fsesim_loss(Sa, Sb, 'cos')[0], 0.0, atol=1e-15)
    print("  [PASS] constant fields: l1 = |1 - 4| = 3, cos = 0")

    for metric in ('l1', 'cos'):
        loss, grad_a, grad_b = fsesim_loss(Sa, Sa, metric)
        assert loss == 0.0
    _, grad_a, grad_b = fsesim_loss(Sa, Sa, 'cos')
    assert not grad_a.any() and not grad_b.any()
    print("  [PASS] equal maps give zero loss, and zero cosine gradient")

    zero = np.zeros((2, 3))
    other = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    assert_allclose(row_distances(other, zero, 'cos'), [1.0, 0.0])
    _, grad_a, grad_b = fsesim_loss(other, zero, 'cos')
    assert not grad_a.any() and not grad_b.any()
    print("  [PASS] zero rows: distance 1 against a non-zero row, 0 against a zero row, zero gradient")

    try:
        fsesim_loss(np.zeros((2, 3)), np.zeros((3, 3)))
        raise AssertionError("expected GeometryError")
    except GeometryError:
        pass


def test_fsesim_matches_brute_force():
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal((6, 9)), rng.standard_normal((6, 9))
    for metric in ('l1', 'cos'):
        loss = fsesim_loss(a, b, metric)[0]
        assert_allclose(loss, brute_force_loss(a, b, metric), rtol=1e-12)
        assert_allclose(loss, fsesim_loss(b, a, metric)[0], rtol=1e-12)
        assert loss >= 0
    assert fsesim_loss(a, -a, 'cos')[0] <= 2.0
    print("  [PASS] both metrics match a scalar loop and are symmetric")

    eps = 1e-6
    for metric in ('l1', 'cos'):
        _, grad_a, grad_b = fsesim_loss(a, b, metric)
        for index in [(0, 0), (2, 5), (5, 8)]:
            bump = np.zeros_like(a)
            bump[index] = eps
            numeric_a = (fsesim_loss(a + bump, b, metric)[0] - fsesim_loss(a - bump, b, metric)[0]) / (2 * eps)
            numeric_b = (fsesim_loss(a, b + bump, metric)[0] - fsesim_loss(a, b - bump, metric)[0]) / (2 * eps)
            assert_allclose(grad_a[index], numeric_a, rtol=1e-6, atol=1e-9)
            assert_allclose(grad_b[index], numeric_b, rtol=1e-6, atol=1e-9)
    print("  [PASS] analytic gradients match central differences")


def test_cosine_scale_invariance():
    rng = np.random.default_rng(8)
    fx, fy = rng.random((1, 5, 8, 8)), rng.random((1, 5, 8, 8))
    samples = sample_queries((8, 8), SesimConfig(n_samples=10, patch=4, seed=4))
    Sx, Sy = corr_maps(fx, samples), corr_maps(fy, samples)
    Sy_scaled = corr_maps(3.0 * fy, samples)

    assert_allclose(Sy_scaled.S, 9.0 * Sy.S, rtol=1e-12)
    assert_allclose(fsesim_loss(Sx, Sy_scaled, 'cos')[0], fsesim_loss(Sx, Sy, 'cos')[0], rtol=1e-9)
    assert abs(fsesim_loss(Sx, Sy_scaled, 'l1')[0] - fsesim_loss(Sx, Sy, 'l1')[0]) > 1e-3
    print("  [PASS] cosine loss ignores feature scale, l1 does not")

    normalized = corr_maps(3.0 * fy, samples, normalize=True)
    assert_allclose(normalized.S, corr_maps(fy, samples, normalize=True).S, rtol=1e-12)
    print("  [PASS] normalized maps are scale free")


def test_cosine_distance_range():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        a = rng.standard_normal((1, 5))
        scale = rng.uniform(0.1, 10.0)
        assert row_distances(a, scale * a, 'cos')[0] >= 0.0
        assert row_distances(a, -scale * a, 'cos')[0] <= 2.0
    print("  [PASS] parallel rows never go below 0, anti-parallel never above 2")

    a = rng.standard_normal((4, 9))
    b = rng.standard_normal((4, 9))
    distance = row_distances(a, b, 'cos')
    assert np.all((distance >= 0) & (distance <= 2))
    _, grad_a, _ = fsesim_loss(a, 3.7 * a, 'cos')
    assert np.all(np.abs(grad_a) < 1e-12)
    print("  [PASS] distances stay in [0, 2] and parallel rows have no gradient")


def test_multi_layer_loss():
    weights = init_random(default_arch(), seed=0)
    rng = np.random.default_rng(9)
    stack_x = extract(rng.random((1, 3, 64, 64)), weights)
    stack_y = extract(rng.random((1, 3, 64, 64)), weights)
    cfg = SesimConfig(n_samples=8, patch=4, seed=5)

    assert multi_layer_loss(stack_x, stack_x, cfg).loss == 0.0
    print("  [PASS] identical stacks give 0")

    result = multi_layer_loss(stack_x, stack_y, cfg)
    samples = tap_samples(stack_x, cfg)
    per_tap = []
    for tap in cfg.taps:
        Sx = corr_maps(stack_x.features(tap), samples[tap])
        Sy = corr_maps(stack_y.features(tap), samples[tap])
        per_tap.append(fsesim_loss(Sx, Sy, cfg.metric)[0])
    assert_allclose(result.loss, np.mean(per_tap), rtol=1e-12)
    assert not samples['tapA'].same_geometry(sample_queries((16, 16), cfg))
    print("  [PASS] two taps: mean of the per-tap losses, each with its own seed")

    single = SesimConfig(taps=('tapB',), n_samples=8, patch=4, seed=5)
    alone = multi_layer_loss(stack_x, stack_y, single)
    first = sample_queries(stack_x.features('tapB').shape, single, seed=tap_seed(5, 0))
    direct = fsesim_loss(corr_maps(stack_x.features('tapB'), first),
                         corr_maps(stack_y.features('tapB'), first), single.metric)[0]
    assert_allclose(alone.loss, direct, rtol=1e-12)
    assert set(alone.grads_x) == {'tapB'}
    print("  [PASS] one tap reduces to fsesim_loss on that tap")

    try:
        multi_layer_loss(stack_x, stack_y, SesimConfig(taps=('relu3_1',)))
        raise AssertionError("expected UnknownTapError")
    except UnknownTapError:
        pass


def test_sesim_config():
    cfg = SesimConfig()
    assert (cfg.lam, cfg.tau, cfg.k) == (10.0, 0.07, 255)
    assert (cfg.n_internal, cfg.n_external) == (128, 127)
    assert SesimConfig.from_dict(cfg.to_dict()) == cfg
    for bad in ({'tau': 0}, {'k': 0}, {'lam': -1}, {'patch': 0}, {'mode': 'spiral'}, {'metric': 'l2'},
                {'taps': []}):
        try:
            SesimConfig(**bad)
            raise AssertionError(f"expected ConfigError for {bad}")
        except ConfigError:
            pass
    try:
        SesimConfig.from_dict({'temperature': 0.1})
        raise AssertionError("expected ConfigError")
    except ConfigError:
        pass
    print("  [PASS] defaults, validation and unknown keys")


def main():
    print("\n" + "*" * 60)
    print("SESIM CORE TESTS")
    print("*" * 60 + "\n")

    test_grid_lattice()
    test_patch_random_bounds()
    test_sampler_geometry_errors()
    test_corr_maps_values()
    test_corr_maps_shift_equivariance()
    test_corr_maps_backward()
    test_fsesim_closed_forms()
    test_fsesim_matches_brute_force()
    test_cosine_scale_invariance()
    test_cosine_distance_range()
    test_multi_layer_loss()
    test_sesim_config()

    print("\n" + "*" * 60)
    print("ALL TESTS COMPLETED")
    print("*" * 60)


if __name__ == "__main__":
    main()
