import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.ensemble import Ensemble, Rng, ScoreModel, sample_gaussian
from core.errors import NumericError, ParameterError
from logic_engine.dynamics import MethodConfig, RunRecord, run_svgd, svgd_direction, svgd_step
from logic_engine.kernels import KernelSpec, kernel_eval
from logic_engine.schedules import StepSchedule, adagrad_scale
from data_sources.gaussian_targets import diag_gaussian_target

STD_NORMAL = diag_gaussian_target(1)


def _oracle_direction(spec, x, s):
    m = x.shape[0]
    phi = np.zeros_like(x)
    for i in range(m):
        for j in range(m):
            ev = kernel_eval(spec, x[i], x[j])
            phi[i] += ev.value * s[j] + ev.grad_y
    return phi / m


def test_single_particle_contracts_towards_mode():
    ens = Ensemble(np.array([1.0]))
    new = svgd_step(ens, KernelSpec.isotropic(1.0, p=2), STD_NORMAL, StepSchedule.fixed(0.1))
    assert_allclose(new.particles, [[0.9]], rtol=1e-15)


def test_zero_step_is_identity():
    ens = sample_gaussian(Rng(0), 6, 0.0, 1.0)
    new = svgd_step(ens, KernelSpec.isotropic(0.5, p=2), STD_NORMAL, StepSchedule.fixed(0.0))
    assert_array_equal(new.particles, ens.particles)


@pytest.mark.parametrize("spec", [KernelSpec.isotropic(0.8, p=2), KernelSpec.product([0.5, 1.5], p=1)])
def test_direction_matches_triple_loop(spec):
    x = np.array([[0.3, -1.0], [1.2, 0.4], [-0.7, 0.9]])
    model = diag_gaussian_target(2)
    s = model.scores(x)
    assert_allclose(svgd_direction(Ensemble(x), spec, s), _oracle_direction(spec, x, s), rtol=1e-12, atol=1e-14)


def test_direction_is_permutation_equivariant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(12, 2))
    order = rng.permutation(12)
    spec = KernelSpec.product([0.7, 1.2], p=2)
    model = diag_gaussian_target(2)
    phi = svgd_direction(Ensemble(x), spec, model.scores(x))
    phi_perm = svgd_direction(Ensemble(x[order]), spec, model.scores(x[order]))
    assert_array_equal(phi_perm, phi[order])


def test_identical_particles_stay_identical():
    ens = Ensemble(np.full((4, 2), 0.7))
    model = diag_gaussian_target(2)
    new = svgd_step(ens, KernelSpec.isotropic(1.0, p=2), model, StepSchedule.fixed(0.05))
    assert np.all(new.particles == new.particles[0])


def test_adagrad_first_call_and_zero_direction():
    sched = StepSchedule.adagrad(1.0)
    scale = adagrad_scale(sched, np.array([[1.0, -1.0]]))
    assert_allclose(scale, 1.0 / (1.0 + 1e-6), rtol=1e-15)
    zero = StepSchedule.adagrad(0.5)
    assert_allclose(adagrad_scale(zero, np.zeros((2, 1))), 0.5 / 1e-6, rtol=1e-15)


def test_adagrad_alpha_one_keeps_first_accumulator():
    sched = StepSchedule.adagrad(1.0, alpha=1.0)
    first = adagrad_scale(sched, np.array([[2.0]]))
    second = adagrad_scale(sched, np.array([[100.0]]))
    assert_array_equal(first, second)


def test_adagrad_accumulator_decays():
    sched = StepSchedule.adagrad(1.0, alpha=0.5)
    adagrad_scale(sched, np.array([[2.0]]))
    adagrad_scale(sched, np.array([[0.0]]))
    assert_allclose(sched.accumulator, [[2.0]])


def test_schedule_validation():
    with pytest.raises(ParameterError):
        StepSchedule.adagrad(1.0, alpha=0.0)
    with pytest.raises(ParameterError):
        StepSchedule.adagrad(1.0, fudge=0.0)
    with pytest.raises(ParameterError):
        StepSchedule.fixed(-1.0)


def test_method_config_validation():
    with pytest.raises(ParameterError):
        MethodConfig(kind="fixed")
    with pytest.raises(ParameterError):
        MethodConfig(kind="adaptive")
    with pytest.raises(ParameterError):
        MethodConfig.fixed(0.0)
    with pytest.raises(ParameterError):
        MethodConfig.adaptive(-0.1)
    with pytest.raises(ParameterError):
        MethodConfig.median(refresh_every=0)
    assert MethodConfig.median().median_norm == "euclidean"


def test_run_record_rejects_non_increasing_iterations():
    record = RunRecord(["iteration", "ksd2"])
    record.append({"iteration": 0, "ksd2": 1.0})
    with pytest.raises(ParameterError):
        record.append({"iteration": 0, "ksd2": 0.5})
    assert record.to_frame().columns.tolist() == ["iteration", "ksd2"]


def test_nsteps_zero_returns_initial_sample():
    ens = sample_gaussian(Rng(1), 5, 0.0, 2.0)
    final, record = run_svgd(ens, KernelSpec.isotropic(1.0), STD_NORMAL, MethodConfig.median(), StepSchedule.fixed(0.1), 0)
    assert_array_equal(final.particles, ens.particles)
    assert record.iterations == [0]


def test_adaptive_with_zero_step_equals_fixed_bandwidth():
    ens = sample_gaussian(Rng(2), 8, 1.0, 0.5)
    spec = KernelSpec.isotropic(0.9, p=2)
    fixed, rec_fixed = run_svgd(ens, spec, STD_NORMAL, MethodConfig.fixed(0.9), StepSchedule.fixed(0.05), 1000, log_every=100)
    adaptive, rec_adaptive = run_svgd(ens, spec, STD_NORMAL, MethodConfig.adaptive(0.0), StepSchedule.fixed(0.05), 1000, log_every=100)
    assert_array_equal(adaptive.particles, fixed.particles)
    assert_array_equal(rec_adaptive.final_spec.bandwidths, rec_fixed.final_spec.bandwidths)
    assert_array_equal(rec_adaptive.to_frame()["ksd2"], rec_fixed.to_frame()["ksd2"])


def test_logging_cadence_includes_final_iteration():
    ens = sample_gaussian(Rng(3), 6, 0.0, 1.0)
    _, record = run_svgd(ens, KernelSpec.isotropic(1.0), STD_NORMAL, MethodConfig.median(), StepSchedule.fixed(0.1), 7, log_every=3)
    assert record.iterations == [0, 3, 6, 7]
    frame = record.to_frame()
    assert frame.columns.tolist() == ["iteration", "ksd2", "h_1"]
    assert "wall_ms" in record.to_frame(include_timing=True).columns


def test_run_is_permutation_equivariant():
    ens = sample_gaussian(Rng(4), 10, 0.5, 1.5)
    order = np.random.default_rng(4).permutation(10)
    method = MethodConfig.adaptive(0.01, nstepstheta=2)
    a, _ = run_svgd(ens, KernelSpec.isotropic(1.0), STD_NORMAL, method, StepSchedule.adagrad(0.05), 15)
    b, _ = run_svgd(ens.permuted(order), KernelSpec.isotropic(1.0), STD_NORMAL, method, StepSchedule.adagrad(0.05), 15)
    assert_array_equal(b.particles, a.particles[order])


def test_svgd_moves_ensemble_towards_target():
    ens = sample_gaussian(Rng(5), 50, 3.0, 0.3)
    final, record = run_svgd(ens, KernelSpec.isotropic(1.0), STD_NORMAL, MethodConfig.median(), StepSchedule.adagrad(0.1), 200, log_every=50)
    assert abs(final.particles.mean()) < abs(ens.particles.mean())
    ksd = record.to_frame()["ksd2"]
    assert ksd.iloc[-1] < ksd.iloc[0]


def test_numeric_error_reports_iteration():
    ens = Ensemble(np.array([[1.0], [2.0], [3.0]]))
    model = ScoreModel(d=1, batch_score=lambda x: np.where(x > 2.5, np.inf, -x), description="rusak")
    with pytest.raises(NumericError) as info:
        run_svgd(ens, KernelSpec.isotropic(1.0), model, MethodConfig.fixed(1.0), StepSchedule.fixed(0.1), 5)
    assert info.value.iteration == 0
    assert info.value.index == 2
    assert info.value.partial_record.rows == []
    assert_array_equal(info.value.last_ensemble.particles, ens.particles)


def test_numeric_error_carries_rows_logged_before_failure():
    ens = Ensemble(np.array([[1.0], [2.0], [3.0]]))
    # drift konstan ke kanan; score rusak setelah x > 3.5
    model = ScoreModel(d=1, batch_score=lambda x: np.where(x > 3.5, np.inf, 1.0), description="drift")
    with pytest.raises(NumericError) as info:
        run_svgd(ens, KernelSpec.isotropic(1.0), model, MethodConfig.fixed(1.0), StepSchedule.fixed(0.5), 20)
    err = info.value
    assert err.iteration >= 1
    assert err.partial_record.iterations == list(range(err.iteration))
    assert np.isfinite(err.last_ensemble.particles).all()


def test_debug_rows_only_when_enabled(caplog):
    ens = sample_gaussian(Rng(3), 6, 0.0, 1.0)
    args = (ens, KernelSpec.isotropic(1.0), STD_NORMAL, MethodConfig.fixed(1.0), StepSchedule.fixed(0.1), 4)
    with caplog.at_level(logging.INFO, logger="logic_engine.dynamics"):
        run_svgd(*args, log_every=2)
    assert not [r for r in caplog.records if r.levelno == logging.DEBUG]
    caplog.clear()
    with caplog.at_level(logging.DEBUG, logger="logic_engine.dynamics"):
        run_svgd(*args, log_every=2)
    rows = [r.getMessage() for r in caplog.records if r.levelno == logging.DEBUG and r.getMessage().startswith("[")]
    assert [m.split("]")[0] for m in rows] == ["[0", "[2", "[4"]
