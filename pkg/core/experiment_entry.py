# File: core/experiment_entry.py
# Tujuan: Titik masuk eksperimen. Merangkai preset, kernel, metode, dan jadwal
# dari RunConfig, menjalankan run_svgd, lalu menulis artefak. Sweep menjalankan
# banyak run independen (opsional paralel antar proses) dan mengagregasi hasilnya.

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from core.ensemble import Ensemble, Rng, sample_gaussian
from core.errors import NumericError, SteinflowError
from core.run_config import (
    RunConfig,
    SweepConfig,
    config_to_dict,
    config_to_text,
    sweep_to_text,
    validate_config,
)
from data_sources.inverse_problems import reconstruction_band
from data_sources.presets import TargetBundle, load_preset
from logic_engine.analyzers.sample_quality import calculate_metrics, metric_columns, normalized_marginals, qq_quantiles
from logic_engine.dynamics import MethodConfig, RunRecord, run_svgd
from logic_engine.kernels import KernelSpec, median_heuristic
from logic_engine.schedules import StepSchedule
from outputs.artifact_writer import ArtifactWriter, particle_columns
from utils.config_loader import ConfigLoader
from utils.logger import setup_run_logging

logger = logging.getLogger(__name__)

# Stream turunan dari seed run
INIT_STREAM = 1
SUBSAMPLE_STREAM = 2
REFERENCE_STREAM = 3


@dataclass
class RunResult:
    status: str
    exit_code: int
    out_dir: str
    summary: Dict = field(default_factory=dict)
    final: Optional[Ensemble] = None
    record: Optional[RunRecord] = None


@dataclass
class RunSetup:
    bundle: TargetBundle
    ens0: Ensemble
    spec0: KernelSpec
    method: MethodConfig
    schedule: StepSchedule
    rng: Rng
    reference: Optional[np.ndarray]


def _broadcast(value: Optional[List[float]], fallback: np.ndarray) -> np.ndarray:
    if value is None:
        return fallback
    return np.broadcast_to(np.asarray(value, dtype=np.float64), fallback.shape).copy()


def build_setup(cfg: RunConfig) -> RunSetup:
    """Objek run dari konfigurasi ternormalisasi; semua keacakan diturunkan dari seed."""
    bundle = load_preset(cfg.preset, Rng(cfg.problem_seed))
    rng = Rng(cfg.seed)
    d = bundle.d
    mean = _broadcast(cfg.init_mean, bundle.init_mean)
    sd = _broadcast(cfg.init_sd, bundle.init_sd)
    ens0 = sample_gaussian(rng.derive(INIT_STREAM), cfg.particles, mean, sd)

    if cfg.init_bandwidth == "vector":
        h0 = np.asarray(cfg.bandwidths, dtype=np.float64)
    elif cfg.init_bandwidth == "fixed" or cfg.method == "fixed":
        h0 = np.array([cfg.bandwidth])
    else:
        h0 = np.array([median_heuristic(ens0, cfg.p, cfg.median_norm)])
    if cfg.family == "isotropic":
        spec0 = KernelSpec.isotropic(float(h0[0]), cfg.p, cfg.param_space)
    else:
        spec0 = KernelSpec.product(np.broadcast_to(h0, (d,)), cfg.p, cfg.param_space)

    if cfg.method == "fixed":
        method = MethodConfig.fixed(cfg.bandwidth, variant=cfg.variant)
    elif cfg.method == "median":
        method = MethodConfig.median(cfg.median_refresh_every, cfg.median_norm, variant=cfg.variant)
    else:
        method = MethodConfig.adaptive(
            cfg.s, cfg.nstepstheta, cfg.paramupdate_every, variant=cfg.variant, subsample=cfg.subsample
        )

    if cfg.schedule == "adagrad":
        schedule = StepSchedule.adagrad(cfg.gamma, cfg.adagrad_alpha, cfg.adagrad_fudge)
    else:
        schedule = StepSchedule.fixed(cfg.gamma)

    reference = None
    if "w1_1d" in cfg.metrics:
        reference = np.sort(bundle.model.sampler(rng.derive(REFERENCE_STREAM), cfg.reference_size)[:, 0])
    return RunSetup(bundle, ens0, spec0, method, schedule, rng.derive(SUBSAMPLE_STREAM), reference)


class ExperimentEntry:
    """
    Orkestrator run dan sweep.

    Library di bawahnya melempar exception; di sini error dicatat, ditulis ke
    summary.json, dan diubah menjadi exit status.
    """

    def __init__(self):
        config = ConfigLoader()
        self.log_level = config.get("STEINFLOW_LOG_LEVEL", "INFO")
        self.threads = config.get("STEINFLOW_THREADS", 1)

    def run(self, cfg: RunConfig, out_dir: Optional[str] = None) -> RunResult:
        """
        Menjalankan satu run dan menulis trace.csv, final_particles.csv, summary.json.

        Returns:
            RunResult: exit_code 0 bila run selesai dan semua metrik yang diminta tersedia.
        """
        out_dir = out_dir or cfg.output
        writer = ArtifactWriter(out_dir)
        run_logger = setup_run_logging(self.log_level, os.path.join(out_dir, "run.log"))
        writer.write_config_echo(config_to_text(cfg))

        try:
            setup = build_setup(cfg)
        except SteinflowError as e:
            run_logger.error(f"❌ Setup run gagal: {e}")
            summary = {
                "status": "failed", "preset": cfg.preset, "seed": cfg.seed,
                "error": {"type": type(e).__name__, "message": str(e), "iteration": None},
                "config": config_to_dict(cfg),
            }
            writer.write_summary(summary)
            return RunResult(status="failed", exit_code=1, out_dir=out_dir, summary=summary)
        bundle = setup.bundle
        nsteps = cfg.effective_nsteps
        run_logger.info(
            f"Memulai run: preset={bundle.name}, method={cfg.method}, M={cfg.particles}, "
            f"d={bundle.d}, nsteps={nsteps}, seed={cfg.seed}"
        )
        sample_metrics = cfg.sample_metrics
        columns = metric_columns(sample_metrics, bundle.d)

        def metrics_fn(ens: Ensemble) -> Dict[str, float]:
            return calculate_metrics(ens, sample_metrics, bundle.model.gaussian_info, setup.reference)

        summary = {
            "status": "running",
            "preset": bundle.name,
            "seed": cfg.seed,
            "problem_seed": cfg.problem_seed,
            "particles": cfg.particles,
            "d": bundle.d,
            "nsteps": nsteps,
        }
        started = time.perf_counter()
        final, record, error, partial = setup.ens0, None, None, None
        try:
            final, record = run_svgd(
                setup.ens0, setup.spec0, bundle.model, setup.method, setup.schedule, nsteps,
                log_every=cfg.log_every, rng=setup.rng,
                metrics_fn=metrics_fn if sample_metrics else None, metric_columns=columns,
                log_ksd="ksd2" in cfg.metrics, log_bandwidths="bandwidths" in cfg.metrics,
                max_ksd_factors=cfg.max_ksd_grid, deterministic=cfg.deterministic,
                jobs=1 if cfg.deterministic else self.threads, progress=cfg.progress,
            )
        except SteinflowError as e:
            iteration = e.iteration if isinstance(e, NumericError) else None
            run_logger.error(f"❌ Run gagal (iterasi {iteration}): {e}", exc_info=True)
            error = {"type": type(e).__name__, "message": str(e), "iteration": iteration}
            if isinstance(e, NumericError) and e.partial_record is not None:
                partial, final = e.partial_record, e.last_ensemble
        wall_ms = (time.perf_counter() - started) * 1e3

        final_metrics = {}
        if record is not None:
            writer.write_trace(record.to_frame())
            final_metrics = {k: v for k, v in record.last().items() if k not in ("iteration", "wall_ms")}
            if cfg.exports:
                self._write_exports(cfg, bundle, final, writer)
            writer.write_particles(final.particles)
        elif partial is not None:
            # run gagal: hanya baris sebelum kegagalan, tanpa final_particles.csv
            writer.write_trace(partial.to_frame())

        logged = record if record is not None else partial
        requested = [c for c in columns + (["ksd2"] if "ksd2" in cfg.metrics else []) if c not in final_metrics]
        completed = error is None and not requested
        summary.update({
            "status": "completed" if completed else "failed",
            "final_metrics": final_metrics,
            "final_bandwidths": record.final_spec.bandwidths if record is not None else None,
            "columns": {
                "trace": logged.columns if logged is not None else [],
                "final_particles": particle_columns(bundle.d) if record is not None else [],
            },
            "wall_ms": wall_ms,
            "error": error,
            "config": config_to_dict(cfg),
        })
        writer.write_summary(summary)
        if completed:
            shown = ", ".join(f"{k}={v:.6g}" for k, v in final_metrics.items())
            run_logger.info(f"✅ Run selesai dalam {wall_ms / 1e3:.1f} s: {shown}")
        return RunResult(
            status=summary["status"], exit_code=0 if completed else 1, out_dir=out_dir,
            summary=summary, final=final, record=record,
        )

    @staticmethod
    def _write_exports(cfg: RunConfig, bundle: TargetBundle, final: Ensemble, writer: ArtifactWriter) -> None:
        info = bundle.model.gaussian_info
        if "normalized_marginals" in cfg.exports or "qq" in cfg.exports:
            normalized = normalized_marginals(final, bundle.marginal_sds)
            if "normalized_marginals" in cfg.exports:
                writer.write_export("normalized_marginals", pd.DataFrame(normalized, columns=particle_columns(bundle.d)))
            if "qq" in cfg.exports:
                writer.write_export("qq", qq_quantiles(normalized))
        if "reconstruction" in cfg.exports:
            band = reconstruction_band(final.particles, info.mean, info.cov, bundle.reconstruction_grid)
            writer.write_export("reconstruction", band)

    def sweep(self, sweep: SweepConfig, jobs: int = 1, out_dir: Optional[str] = None) -> Tuple[pd.DataFrame, int]:
        """
        Menjalankan semua titik sweep; kegagalan per titik dicatat di baris dan sweep berlanjut.

        Returns:
            tuple: (DataFrame sweep.csv, exit code; 0 bila semua titik selesai).
        """
        out_dir = out_dir or sweep.base.output
        writer = ArtifactWriter(out_dir)
        writer.write_config_echo(sweep_to_text(sweep))
        base = config_to_dict(sweep.base)
        tasks = []
        for value, seed in sweep.points():
            point = {**base, **sweep.variant_overrides(value, seed)}
            point["output"] = os.path.join(out_dir, f"{sweep.axis}={value:g}-seed{seed}")
            tasks.append({k: v for k, v in point.items() if v is not None})

        logger.info(f"Sweep {sweep.axis}: {len(tasks)} run, jobs={jobs}")
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                summaries = list(pool.map(_run_point, tasks))
        else:
            summaries = [_run_point(task) for task in tasks]

        rows = []
        for (value, seed), summary in zip(sweep.points(), summaries):
            row = {sweep.axis: value, "seed": seed, "status": summary.get("status", "failed")}
            row.update(summary.get("final_metrics", {}))
            error = summary.get("error")
            row["error"] = f"{error['type']}: {error['message']}" if error else ""
            rows.append(row)
        frame = aggregate_sweep(pd.DataFrame(rows), sweep.axis)
        writer.write_sweep(frame)
        failed = int((frame["status"] != "completed").sum())
        if failed:
            logger.error(f"❌ {failed} dari {len(frame)} run sweep gagal.")
        else:
            logger.info(f"✅ Sweep selesai: {len(frame)} run.")
        return frame, 0 if failed == 0 else 1


def _run_point(point: Dict) -> Dict:
    """Satu titik sweep; dipanggil di proses pekerja sehingga harus top-level."""
    try:
        cfg = validate_config(point)
        return ExperimentEntry().run(cfg).summary
    except SteinflowError as e:
        logger.error(f"❌ Titik sweep gagal: {e}")
        return {"status": "failed", "error": {"type": type(e).__name__, "message": str(e), "iteration": None}}


def aggregate_sweep(frame: pd.DataFrame, axis: str) -> pd.DataFrame:
    """
    Menambah kolom <metrik>_mean dan <metrik>_ci95 (interval Student-t 95%)
    per nilai sumbu bila ada lebih dari satu seed per nilai. Untuk sumbu
    seed semua run selesai membentuk satu kelompok dan hasilnya disalin ke
    setiap baris.
    """
    metrics = [c for c in frame.columns if c not in (axis, "seed", "status", "error")]
    work = frame.assign(_group=0 if axis == "seed" else frame[axis])
    completed = work[work["status"] == "completed"]
    if completed.empty or completed.groupby("_group")["seed"].count().max() < 2:
        return frame
    grouped = completed.groupby("_group")[metrics]
    counts = grouped.count()
    means = grouped.mean()
    half = grouped.std(ddof=1) / np.sqrt(counts)
    half = half * stats.t.ppf(0.975, np.maximum(counts - 1, 1))
    half[counts < 2] = np.nan
    agg = pd.concat([means.add_suffix("_mean"), half.add_suffix("_ci95")], axis=1).reset_index()
    return work.merge(agg, on="_group", how="left").drop(columns="_group")
