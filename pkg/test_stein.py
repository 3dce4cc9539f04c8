import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.ensemble import Ensemble, Rng
from core.errors import NumericError, ParameterError
from logic_engine.kernels import KernelSpec, kernel_eval
from logic_engine.stein import ScoreCache, ksd_ascent_step, ksd_squared, max_ksd_squared, stein_kernel_u
from data_sources.gaussian_targets import diag_gaussian_target

STD_NORMAL = diag_gaussian_target(1)


def _gauss_cache(x, precision=1.0):
    return ScoreCache(-np.asarray(x) * precision)


def _brute_u(spec, x, y, sx, sy):
    ev = kernel_eval(spec, x, y)
    return ev.value * float(np.dot(sx, sy)) + float(np.dot(sy, ev.grad_x)) + float(np.dot(sx, ev.grad_y)) + ev.trace_xy


def _brute_ksd(spec, x, s, variant):
    m = x.shape[0]
    total = 0.0
    for i in range(m):
        for j in range(m):
            if variant == "U" and i == j:
                continue
            total += _brute_u(spec, x[i], x[j], s[i], s[j])
    return total / (m * (m - 1) if variant == "U" else m * m)


def test_stein_kernel_at_gaussian_mode():
    spec = KernelSpec.isotropic(2.0, p=2)
    assert_allclose(stein_kernel_u(spec, [0.0], [0.0], [0.0], [0.0]), 1.0, rtol=1e-15)


def test_stein_kernel_symmetric_and_matches_assembly():
    rng = np.random.default_rng(0)
    for spec in (KernelSpec.isotropic(1.5, p=2), KernelSpec.product([0.6, 1.9], p=2), KernelSpec.product([0.6, 1.9], p=1)):
        for _ in range(20):
            x, y = rng.normal(size=2), rng.normal(size=2)
            sx, sy = -x, -y
            u = stein_kernel_u(spec, x, y, sx, sy)
            assert u == stein_kernel_u(spec, y, x, sy, sx)
            assert_allclose(u, _brute_u(spec, x, y, sx, sy), rtol=1e-8, atol=1e-14)


def test_single_particle_v_statistic_is_one():
    est = ksd_squared(KernelSpec.isotropic(2.0, p=2), Ensemble(np.zeros(1)), _gauss_cache(np.zeros((1, 1))), "V")
    assert_allclose(est.ksd2, 1.0, atol=1e-12)
    assert est.pairs_used == 1


@pytest.mark.parametrize("variant", ["U", "V"])
def test_estimators_match_double_loop(variant):
    rng = np.random.default_rng(1)
    for m in (2, 5, 10):
        x = rng.normal(size=(m, 2))
        s = -x * np.array([1.0, 4.0])
        for spec in (KernelSpec.isotropic(1.1, p=2), KernelSpec.product([0.7, 1.4], p=2)):
            est = ksd_squared(spec, Ensemble(x), ScoreCache(s), variant)
            assert_allclose(est.ksd2, _brute_ksd(spec, x, s, variant), rtol=1e-12, atol=1e-12)


def test_u_statistic_for_p1_matches_double_loop():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 3))
    spec = KernelSpec.product([0.5, 1.0, 2.0], p=1)
    est = ksd_squared(spec, Ensemble(x), _gauss_cache(x), "U")
    assert_allclose(est.ksd2, _brute_ksd(spec, x, -x, "U"), rtol=1e-12, atol=1e-12)


def test_estimator_preconditions():
    with pytest.raises(ParameterError):
        ksd_squared(KernelSpec.isotropic(1.0, p=2), Ensemble(np.zeros(1)), _gauss_cache(np.zeros((1, 1))), "U")
    with pytest.raises(ParameterError):
        x = np.array([[0.0], [1.0]])
        ksd_squared(KernelSpec.isotropic(1.0, p=1), Ensemble(x), _gauss_cache(x), "V")


@pytest.mark.parametrize(
    "spec",
    [
        KernelSpec.isotropic(1.2, p=2),
        KernelSpec.product([0.5, 1.0, 2.5], p=2),
        KernelSpec.isotropic(0.8, p=1),
        KernelSpec.product([0.5, 1.0, 2.5], p=1),
    ],
)
def test_grad_theta_matches_finite_differences(spec):
    rng = np.random.default_rng(3)
    step = 1e-5
    for _ in range(100):
        x = rng.normal(size=(7, 3))
        ens, cache = Ensemble(x), _gauss_cache(x, np.array([1.0, 2.0, 0.5]))
        grad = ksd_squared(spec, ens, cache).grad_theta
        assert grad.shape == (spec.n_params,)
        for i in range(spec.n_params):
            shift = np.zeros(spec.n_params)
            shift[i] = step
            plus = ksd_squared(spec.with_log_bandwidths(spec.log_bandwidths + shift), ens, cache, with_grad=False).ksd2
            minus = ksd_squared(spec.with_log_bandwidths(spec.log_bandwidths - shift), ens, cache, with_grad=False).ksd2
            assert_allclose(grad[i], (plus - minus) / (2 * step), rtol=1e-5, atol=1e-9)


def test_linear_param_space_gradient():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 2))
    log_spec = KernelSpec.product([0.7, 1.3], p=2)
    lin_spec = KernelSpec.product([0.7, 1.3], p=2, param_space="linear")
    g_log = ksd_squared(log_spec, Ensemble(x), _gauss_cache(x)).grad_theta
    g_lin = ksd_squared(lin_spec, Ensemble(x), _gauss_cache(x)).grad_theta
    assert_allclose(g_lin, g_log / np.array([0.7, 1.3]), rtol=1e-14)


def test_permutation_invariance_is_exact():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(9, 2))
    order = rng.permutation(9)
    spec = KernelSpec.product([0.9, 1.6], p=1)
    a = ksd_squared(spec, Ensemble(x), _gauss_cache(x))
    b = ksd_squared(spec, Ensemble(x[order]), _gauss_cache(x[order]))
    assert a.ksd2 == b.ksd2
    assert np.array_equal(a.grad_theta, b.grad_theta)


def test_parallel_reduction_agrees_with_deterministic():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40, 2))
    spec = KernelSpec.product([0.9, 1.6], p=2)
    a = ksd_squared(spec, Ensemble(x), _gauss_cache(x))
    b = ksd_squared(spec, Ensemble(x), _gauss_cache(x), deterministic=False, jobs=4)
    assert_allclose(b.ksd2, a.ksd2, rtol=1e-10)
    assert_allclose(b.grad_theta, a.grad_theta, rtol=1e-10)


def test_v_statistic_nonnegative_for_gaussian_kernel():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m, d = rng.integers(1, 7), rng.integers(1, 4)
        x = rng.normal(size=(m, d)) * rng.uniform(0.1, 3.0)
        s = rng.normal(size=(m, d))
        spec = KernelSpec.product(rng.uniform(0.05, 5.0, size=d), p=2)
        assert ksd_squared(spec, Ensemble(x), ScoreCache(s), "V", with_grad=False).ksd2 >= -1e-12


def test_ascent_step_never_decreases_ksd():
    rng = np.random.default_rng(8)
    for _ in range(200):
        m, d = rng.integers(2, 8), rng.integers(1, 4)
        x = rng.normal(size=(m, d))
        cache = _gauss_cache(x)
        spec = KernelSpec.product(rng.uniform(0.2, 3.0, size=d), p=2)
        before = ksd_squared(spec, Ensemble(x), cache, with_grad=False).ksd2
        stepped = ksd_ascent_step(spec, Ensemble(x), cache, 1e-6)
        after = ksd_squared(stepped, Ensemble(x), cache, with_grad=False).ksd2
        assert after >= before - 1e-12


def test_ascent_step_zero_is_identity():
    x = np.array([[0.0], [1.0]])
    spec = KernelSpec.isotropic(1.0, p=2)
    assert ksd_ascent_step(spec, Ensemble(x), _gauss_cache(x), 0.0) is spec
    with pytest.raises(ParameterError):
        ksd_ascent_step(spec, Ensemble(x), _gauss_cache(x), -1.0)


def test_ascent_direction_points_to_local_grid_argmax():
    x = np.array([[-0.5], [1.0]])
    ens, cache = Ensemble(x), _gauss_cache(x)
    spec = KernelSpec.isotropic(1.0, p=2)
    grid = np.linspace(-0.005, 0.005, 101)
    values = [ksd_squared(spec.with_log_bandwidths([g]), ens, cache, with_grad=False).ksd2 for g in grid]
    best = grid[int(np.argmax(values))]
    grad = ksd_squared(spec, ens, cache).grad_theta[0]
    assert np.sign(grad) == np.sign(best)
    stepped = ksd_ascent_step(spec, ens, cache, 1e-3)
    assert np.sign(stepped.log_bandwidths[0]) == np.sign(best)


def test_linear_space_step_clamps_bandwidth():
    x = np.array([[-0.5], [1.0]])
    spec = KernelSpec.isotropic(1e-3, p=2, param_space="linear")
    grad = ksd_squared(spec, Ensemble(x), _gauss_cache(x)).grad_theta[0]
    stepped = ksd_ascent_step(spec, Ensemble(x), _gauss_cache(x), 1e6 * abs(1.0 / grad) if grad else 1.0)
    assert stepped.bandwidths[0] >= 1e-8


def test_non_finite_gradient_names_parameter():
    x = np.array([[0.0, 0.0], [0.5, 0.5]])
    cache = ScoreCache(np.full((2, 2), 1e200))
    with pytest.raises(NumericError) as info:
        ksd_ascent_step(KernelSpec.product([1.0, 1.0], p=2), Ensemble(x), cache, 0.1)
    assert info.value.index == 0


def test_subsample_of_full_size_equals_full_estimate():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(8, 2))
    spec = KernelSpec.isotropic(1.0, p=2)
    full = ksd_squared(spec, Ensemble(x), _gauss_cache(x))
    sub = ksd_squared(spec, Ensemble(x), _gauss_cache(x), subsample=(8, Rng(0)))
    assert full.ksd2 == sub.ksd2
    part = ksd_squared(spec, Ensemble(x), _gauss_cache(x), subsample=(4, Rng(0)))
    assert part.pairs_used == 12


def test_max_ksd_over_grid():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(6, 1)) + 1.0
    spec = KernelSpec.isotropic(1.0, p=2)
    base = ksd_squared(spec, Ensemble(x), _gauss_cache(x), with_grad=False).ksd2
    assert max_ksd_squared(spec, Ensemble(x), _gauss_cache(x), [0.1, 1.0, 10.0]) >= base
    assert max_ksd_squared(spec, Ensemble(x), _gauss_cache(x), [1.0]) == base


def test_u_statistic_shrinks_with_exact_samples():
    spec = KernelSpec.isotropic(2.0, p=2)
    means = {}
    for m in (100, 1000):
        values = []
        for seed in range(5):
            x = Rng(seed).standard_normal((m, 1))
            values.append(abs(ksd_squared(spec, Ensemble(x), ScoreCache.build(STD_NORMAL, Ensemble(x)), with_grad=False).ksd2))
        means[m] = np.mean(values)
    assert means[1000] < means[100]
    assert means[1000] < 0.02
