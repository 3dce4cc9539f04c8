import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from core.ensemble import Rng, sample_gaussian
from core.errors import ConfigValidationError
from core.experiment_entry import INIT_STREAM, ExperimentEntry, aggregate_sweep
from core.run_config import config_to_text, validate_config, validate_sweep
from main import main
from outputs.artifact_writer import read_summary


def _config(tmp_path, **keys):
    keys.setdefault("output", str(tmp_path / "run"))
    return "\n".join(f"{k}={v}" for k, v in keys.items()) + "\n"


def _read_csv(path):
    return pd.read_csv(path, float_precision="round_trip")


def test_validate_fills_preset_defaults():
    cfg = validate_config("preset=mixture1d\n")
    assert cfg.p == 1
    assert cfg.method == "median"
    assert cfg.gamma == 1.0
    assert cfg.nsteps == 10_000
    assert cfg.log_every == 10
    assert cfg.problem_seed == 0
    assert cfg.output.endswith("mixture1d-median-seed0")


def test_validate_desk_scales_steps():
    cfg = validate_config("preset=mixture1d\ndesk=true\n")
    assert cfg.effective_nsteps == 500
    assert cfg.log_every == 1


def test_validate_parses_float_integers_and_lists():
    cfg = validate_config("preset=gauss-diag(3)\nnsteps=1e3\nmetrics=ksd2, chi2\n")
    assert cfg.nsteps == 1000
    assert cfg.metrics == ["ksd2", "chi2"]


def test_gaussian_metric_on_mixture_is_rejected():
    with pytest.raises(ConfigValidationError) as info:
        validate_config("preset=mixture1d\nmetrics=ksd2,bures_w2\n")
    assert any("bures_w2" in msg for msg in info.value.errors)


def test_median_with_two_particles_is_rejected():
    with pytest.raises(ConfigValidationError) as info:
        validate_config("preset=mixture1d\nparticles=2\nmethod=median\n")
    assert any("median" in msg for msg in info.value.errors)


def test_unknown_key_and_bad_preset_are_rejected():
    with pytest.raises(ConfigValidationError) as info:
        validate_config("preset=mixture1d\nbanana=1\n")
    assert any("banana" in msg for msg in info.value.errors)
    with pytest.raises(ConfigValidationError):
        validate_config("preset=gauss-diag\n")


def test_v_estimator_requires_p2_and_fixed_requires_bandwidth():
    with pytest.raises(ConfigValidationError):
        validate_config("preset=mixture1d\nvariant=V\n")
    with pytest.raises(ConfigValidationError) as info:
        validate_config("preset=mixture1d\nmethod=fixed\n")
    assert any(msg.startswith("bandwidth") for msg in info.value.errors)


def test_config_echo_round_trip(tmp_path):
    cfg = validate_config(_config(tmp_path, preset="gauss-diag(2)", particles=6, nsteps=4, max_ksd_grid="0.5,2"))
    again = validate_config(config_to_text(cfg))
    assert again.model_dump() == cfg.model_dump()


def test_zero_steps_keeps_initial_sample(tmp_path):
    cfg = validate_config(_config(tmp_path, preset="gauss-diag(2)", particles=7, nsteps=0, seed=11))
    result = ExperimentEntry().run(cfg)
    assert result.exit_code == 0
    expected = sample_gaussian(Rng(11).derive(INIT_STREAM), 7, np.zeros(2), np.full(2, 1.0 / np.sqrt(2.0)))
    final = _read_csv(tmp_path / "run" / "final_particles.csv")
    assert final.columns.tolist() == ["x_1", "x_2"]
    assert_array_equal(final.to_numpy(), expected.particles)
    assert _read_csv(tmp_path / "run" / "trace.csv")["iteration"].tolist() == [0]


def test_runs_are_byte_identical(tmp_path):
    text_a = _config(tmp_path, preset="mixture1d", particles=12, nsteps=15, output=str(tmp_path / "a"))
    text_b = _config(tmp_path, preset="mixture1d", particles=12, nsteps=15, output=str(tmp_path / "b"))
    ExperimentEntry().run(validate_config(text_a))
    ExperimentEntry().run(validate_config(text_b))
    for name in ("trace.csv", "final_particles.csv"):
        with open(tmp_path / "a" / name, "rb") as fa, open(tmp_path / "b" / name, "rb") as fb:
            assert fa.read() == fb.read()


def test_pinned_headers_and_summary(tmp_path):
    cfg = validate_config(
        _config(tmp_path, preset="mixture1d", particles=10, nsteps=4, reference_size=500, metrics="ksd2,bandwidths,w1_1d")
    )
    result = ExperimentEntry().run(cfg)
    assert result.exit_code == 0
    with open(tmp_path / "run" / "trace.csv", encoding="utf-8") as fh:
        assert fh.readline() == "iteration,ksd2,h_1,w1_1d\n"
    summary = read_summary(str(tmp_path / "run"))
    assert summary["status"] == "completed"
    assert summary["columns"] == {"trace": ["iteration", "ksd2", "h_1", "w1_1d"], "final_particles": ["x_1"]}
    assert set(summary["final_metrics"]) == {"ksd2", "h_1", "w1_1d"}
    assert len(summary["final_bandwidths"]) == 1
    assert os.path.exists(tmp_path / "run" / "run_config.env")


def test_gaussian_metrics_and_exports(tmp_path):
    cfg = validate_config(
        _config(
            tmp_path, preset="gauss-diag(2)", particles=8, nsteps=3,
            metrics="ksd2,bandwidths,marginal_var,chi2,bures_w2", exports="normalized_marginals,qq",
        )
    )
    assert ExperimentEntry().run(cfg).exit_code == 0
    with open(tmp_path / "run" / "trace.csv", encoding="utf-8") as fh:
        assert fh.readline() == "iteration,ksd2,h_1,h_2,var_1,var_2,chi2,bures_w2\n"
    assert _read_csv(tmp_path / "run" / "qq.csv").columns.tolist() == ["prob", "normal", "x_1", "x_2"]
    assert len(_read_csv(tmp_path / "run" / "normalized_marginals.csv")) == 8


def test_numeric_failure_is_recorded(tmp_path):
    cfg = validate_config(
        _config(tmp_path, preset="gauss-diag(2)", particles=5, nsteps=5, method="fixed", bandwidth=1.0, gamma=1e300)
    )
    result = ExperimentEntry().run(cfg)
    assert result.exit_code == 1
    summary = read_summary(str(tmp_path / "run"))
    assert summary["status"] == "failed"
    assert summary["error"]["type"] == "NumericError"
    assert summary["error"]["iteration"] is not None
    out = tmp_path / "run"
    assert not os.path.exists(out / "final_particles.csv")
    assert summary["columns"]["final_particles"] == []
    trace = _read_csv(out / "trace.csv")
    assert trace.columns.tolist() == summary["columns"]["trace"]
    assert trace["iteration"].tolist() == [0]
    assert (trace["iteration"] <= summary["error"]["iteration"]).all()


def test_single_value_sweep(tmp_path):
    text = _config(
        tmp_path, preset="gauss-diag(2)", nsteps=3, sweep_axis="particles", sweep_values="6", output=str(tmp_path / "sweep")
    )
    frame, code = ExperimentEntry().sweep(validate_sweep(text))
    assert code == 0
    assert frame.columns.tolist() == ["particles", "seed", "status", "ksd2", "h_1", "h_2", "error"]
    written = _read_csv(tmp_path / "sweep" / "sweep.csv")
    assert written["status"].tolist() == ["completed"]
    assert os.path.isdir(tmp_path / "sweep" / "particles=6-seed0")


def test_sweep_rejects_impossible_points():
    with pytest.raises(ConfigValidationError) as info:
        validate_sweep("preset=mixture1d\nmethod=median\nsweep_axis=particles\nsweep_values=2,10\n")
    assert any("particles=2" in msg for msg in info.value.errors)


def test_aggregate_sweep_adds_intervals():
    frame = pd.DataFrame(
        {"particles": [5, 5, 10, 10], "seed": [0, 1, 0, 1], "status": ["completed"] * 4, "ksd2": [1.0, 3.0, 0.5, 0.5], "error": [""] * 4}
    )
    agg = aggregate_sweep(frame, "particles")
    assert agg["ksd2_mean"].tolist() == [2.0, 2.0, 0.5, 0.5]
    assert agg.loc[2, "ksd2_ci95"] == 0.0
    assert agg.loc[0, "ksd2_ci95"] > 0.0


def test_seed_axis_aggregates_over_all_completed_seeds():
    frame = pd.DataFrame(
        {"seed": [0, 1, 2, 3], "status": ["completed"] * 3 + ["failed"], "ksd2": [1.0, 2.0, 3.0, np.nan], "error": [""] * 4}
    )
    agg = aggregate_sweep(frame, "seed")
    assert agg["seed"].tolist() == [0, 1, 2, 3]
    assert agg["ksd2_mean"].tolist() == [2.0] * 4
    assert agg["ksd2_ci95"].nunique() == 1
    assert agg.loc[0, "ksd2_ci95"] > 0.0


def test_seed_sweep_writes_aggregate_columns(tmp_path):
    text = _config(
        tmp_path, preset="gauss-diag(2)", particles=6, nsteps=3, sweep_axis="seed", sweep_values="0,1,2",
        output=str(tmp_path / "sweep"),
    )
    frame, code = ExperimentEntry().sweep(validate_sweep(text))
    assert code == 0
    assert frame["seed"].tolist() == [0, 1, 2]
    for column in ("ksd2_mean", "ksd2_ci95", "h_1_mean", "h_2_ci95"):
        assert column in frame.columns
    assert np.allclose(frame["ksd2_mean"], frame["ksd2"].mean(), rtol=1e-12, atol=0.0)
    written = _read_csv(tmp_path / "sweep" / "sweep.csv")
    assert "ksd2_ci95" in written.columns
    assert os.path.isdir(tmp_path / "sweep" / "seed=0-seed0")


def test_cli_presets_and_validate(tmp_path, capsys):
    assert main(["presets"]) == 0
    assert "gp-infer" in capsys.readouterr().out
    path = tmp_path / "cfg.env"
    path.write_text("preset=gauss-diag(2)\n", encoding="utf-8")
    assert main(["validate", str(path)]) == 0
    assert "preset=gauss-diag(2)" in capsys.readouterr().out
    path.write_text("preset=mixture1d\nmetrics=chi2\n", encoding="utf-8")
    assert main(["validate", str(path)]) == 2
    assert main(["validate", str(tmp_path / "missing.env")]) == 2


def test_cli_run_writes_artifacts(tmp_path):
    path = tmp_path / "cfg.env"
    path.write_text("preset=gauss-diag(2)\nparticles=5\nnsteps=2\n", encoding="utf-8")
    assert main(["run", str(path), "--seed", "3", "--out", str(tmp_path / "cli")]) == 0
    with open(tmp_path / "cli" / "summary.json", encoding="utf-8") as fh:
        summary = json.load(fh)
    assert summary["seed"] == 3
    assert summary["config"]["output"] == str(tmp_path / "cli")
