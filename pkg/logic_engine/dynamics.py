# File: logic_engine/dynamics.py
# Tujuan: Loop transport partikel. SVGD vanilla dengan bandwidth tetap atau
# median heuristic, dan Ad-SVGD yang menyelingi gradient ascent KSD² pada
# bandwidth dengan update partikel.

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from core.ensemble import Ensemble, Rng, ScoreModel
from core.errors import NumericError, ParameterError
from logic_engine.kernels import KernelSpec, median_heuristic, pairwise_kernel
from logic_engine.reduction_helpers import sum_last_axis
from logic_engine.schedules import StepSchedule
from logic_engine.stein import EstimatorVariant, ScoreCache, ksd_ascent_step, ksd_squared, max_ksd_squared

logger = logging.getLogger(__name__)


class MethodKind(str, Enum):
    FIXED = "fixed"
    MEDIAN = "median"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class MethodConfig:
    """
    Metode pemilihan bandwidth.

    fixed: `bandwidth` wajib. median: `median_refresh_every`, `median_norm`.
    adaptive: `s`, `nstepstheta`, `paramupdate_every`, opsional `subsample`.
    `variant` dipakai untuk KSD² (ascent maupun log).
    """

    kind: MethodKind
    bandwidth: Optional[float] = None
    s: Optional[float] = None
    nstepstheta: int = 1
    paramupdate_every: int = 1
    median_refresh_every: int = 1
    median_norm: str = "euclidean"
    variant: EstimatorVariant = EstimatorVariant.U
    subsample: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MethodKind(self.kind))
        object.__setattr__(self, "variant", EstimatorVariant(self.variant))
        if (self.kind is MethodKind.FIXED) != (self.bandwidth is not None):
            raise ParameterError("bandwidth hanya (dan wajib) untuk metode fixed.")
        if (self.kind is MethodKind.ADAPTIVE) != (self.s is not None):
            raise ParameterError("s hanya (dan wajib) untuk metode adaptive.")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ParameterError(f"bandwidth harus > 0, didapat {self.bandwidth}.")
        if self.s is not None and not (np.isfinite(self.s) and self.s >= 0):
            raise ParameterError(f"s harus finite dan >= 0, didapat {self.s}.")
        for name in ("nstepstheta", "paramupdate_every", "median_refresh_every"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} harus >= 1.")
        if self.subsample is not None and self.subsample < 2:
            raise ParameterError("subsample harus >= 2.")

    @classmethod
    def fixed(cls, h: float, **kwargs) -> "MethodConfig":
        return cls(MethodKind.FIXED, bandwidth=h, **kwargs)

    @classmethod
    def median(cls, refresh_every: int = 1, norm: str = "euclidean", **kwargs) -> "MethodConfig":
        return cls(MethodKind.MEDIAN, median_refresh_every=refresh_every, median_norm=norm, **kwargs)

    @classmethod
    def adaptive(cls, s: float, nstepstheta: int = 1, paramupdate_every: int = 1, **kwargs) -> "MethodConfig":
        return cls(MethodKind.ADAPTIVE, s=s, nstepstheta=nstepstheta, paramupdate_every=paramupdate_every, **kwargs)


@dataclass
class RunRecord:
    """Baris diagnostik per iterasi yang dicatat; iterasi naik secara ketat."""

    columns: List[str]
    rows: List[Dict[str, float]] = field(default_factory=list)
    final_spec: Optional[KernelSpec] = None

    def append(self, row: Dict[str, float]) -> None:
        if self.rows and row["iteration"] <= self.rows[-1]["iteration"]:
            raise ParameterError(
                f"Iterasi RunRecord harus naik: {row['iteration']} setelah {self.rows[-1]['iteration']}."
            )
        self.rows.append(row)

    @property
    def iterations(self) -> List[int]:
        return [int(r["iteration"]) for r in self.rows]

    def last(self) -> Dict[str, float]:
        return self.rows[-1] if self.rows else {}

    def to_frame(self, include_timing: bool = False) -> pd.DataFrame:
        columns = list(self.columns) + (["wall_ms"] if include_timing else [])
        df = pd.DataFrame(self.rows, columns=columns)
        return df.astype({"iteration": "int64"})


def svgd_direction(ens: Ensemble, spec: KernelSpec, scores: np.ndarray, deterministic: bool = True, jobs: int = 1) -> np.ndarray:
    """
    φ(x_i) = (1/M) Σ_j [k(x_i, x_j) s_j + ∇_{x_j} k(x_i, x_j)], untuk semua i sekaligus.
    """
    x = ens.particles
    pk = pairwise_kernel(spec, x)
    # ∇_y k(x, y) = -k g(x - y)
    terms = pk.value[..., None] * (scores[None, :, :] - pk.g)
    return sum_last_axis(np.moveaxis(terms, 1, -1), deterministic, jobs) / x.shape[0]


def svgd_step(
    ens: Ensemble,
    spec: KernelSpec,
    model: ScoreModel,
    schedule: StepSchedule,
    scores: Optional[ScoreCache] = None,
    deterministic: bool = True,
    jobs: int = 1,
) -> Ensemble:
    """
    Satu update SVGD simultan: X_{n+1} = X_n + step ⊙ φ(X_n).

    Args:
        scores (ScoreCache, optional): Score yang sudah dihitung untuk `ens`; dihitung ulang jika None.
    """
    s = scores.scores if scores is not None else model.scores(ens.particles)
    phi = svgd_direction(ens, spec, s, deterministic, jobs)
    bad = ~np.isfinite(phi).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericError(f"Arah update SVGD non-finite pada partikel {idx}.", index=idx)
    step = schedule.step_sizes(phi)
    return Ensemble(ens.particles + step * phi)


def _record_columns(spec: KernelSpec, log_ksd: bool, max_ksd: bool, log_bandwidths: bool, metric_columns: Sequence[str]) -> List[str]:
    columns = ["iteration"]
    if log_ksd:
        columns.append("ksd2")
    if max_ksd:
        columns.append("max_ksd2")
    if log_bandwidths:
        columns += [f"h_{i + 1}" for i in range(spec.n_params)]
    return columns + [c for c in metric_columns if c not in columns]


def _update_kernel(n: int, spec: KernelSpec, ens: Ensemble, cache: ScoreCache, method: MethodConfig,
                   rng: Optional[Rng], deterministic: bool, jobs: int) -> KernelSpec:
    if method.kind is MethodKind.MEDIAN:
        if n % method.median_refresh_every == 0:
            h = median_heuristic(ens, spec.p, method.median_norm)
            logger.debug(f"[{n}] median heuristic h = {h:.6g}")
            return spec.with_bandwidth(h)
        return spec
    if method.kind is MethodKind.ADAPTIVE and n % method.paramupdate_every == 0:
        subsample = (method.subsample, rng) if method.subsample is not None else None
        for _ in range(method.nstepstheta):
            spec = ksd_ascent_step(spec, ens, cache, method.s, method.variant, subsample, deterministic, jobs)
    return spec


def run_svgd(
    ens0: Ensemble,
    spec0: KernelSpec,
    model: ScoreModel,
    method: MethodConfig,
    schedule: StepSchedule,
    nsteps: int,
    log_every: int = 1,
    rng: Optional[Rng] = None,
    metrics_fn: Optional[Callable[[Ensemble], Dict[str, float]]] = None,
    metric_columns: Sequence[str] = (),
    log_ksd: bool = True,
    log_bandwidths: bool = True,
    max_ksd_factors: Optional[Sequence[float]] = None,
    deterministic: bool = True,
    jobs: int = 1,
    progress: bool = False,
) -> Tuple[Ensemble, RunRecord]:
    """
    Menjalankan SVGD / Ad-SVGD selama nsteps iterasi.

    Pada iterasi n: score dihitung sekali, kernel diperbarui (median atau ascent KSD²
    memakai ScoreCache yang sama), baris dicatat bila n kelipatan log_every atau n = nsteps,
    lalu partikel diperbarui. Iterasi nsteps hanya mencatat.

    Returns:
        tuple: (ensemble akhir, RunRecord).
    """
    if nsteps < 0:
        raise ParameterError(f"nsteps harus >= 0, didapat {nsteps}.")
    if log_every < 1:
        raise ParameterError(f"log_every harus >= 1, didapat {log_every}.")
    if method.kind is MethodKind.FIXED:
        spec0 = spec0.with_bandwidth(method.bandwidth)
    if method.subsample is not None and rng is None:
        raise ParameterError("Subsampling KSD butuh rng.")
    if (log_ksd or max_ksd_factors) and method.variant is EstimatorVariant.U and ens0.m < 2:
        raise ParameterError("Log KSD² dengan estimator U butuh M >= 2.")

    record = RunRecord(_record_columns(spec0, log_ksd, bool(max_ksd_factors), log_bandwidths, metric_columns))
    ens, spec = ens0, spec0
    started = time.perf_counter()
    n = 0
    try:
        for n in tqdm(range(nsteps + 1), disable=not progress, desc=model.description or "svgd"):
            cache = ScoreCache.build(model, ens)
            if n < nsteps:
                spec = _update_kernel(n, spec, ens, cache, method, rng, deterministic, jobs)
            if n % log_every == 0 or n == nsteps:
                row = {"iteration": n}
                if log_ksd:
                    row["ksd2"] = ksd_squared(spec, ens, cache, method.variant, None, deterministic, jobs, with_grad=False).ksd2
                if max_ksd_factors:
                    row["max_ksd2"] = max_ksd_squared(spec, ens, cache, max_ksd_factors, method.variant, deterministic, jobs)
                if log_bandwidths:
                    row.update({f"h_{i + 1}": float(h) for i, h in enumerate(spec.bandwidths)})
                if metrics_fn is not None:
                    row.update(metrics_fn(ens))
                row["wall_ms"] = (time.perf_counter() - started) * 1e3
                record.append(row)
                if logger.isEnabledFor(logging.DEBUG):
                    logger.debug(f"[{n}] " + ", ".join(f"{k}={v:.6g}" for k, v in row.items() if k != "iteration"))
            if n == nsteps:
                break
            ens = svgd_step(ens, spec, model, schedule, cache, deterministic, jobs)
    except NumericError as e:
        logger.error(f"❌ Kegagalan numerik pada iterasi {n}: {e}")
        record.final_spec = spec
        e.partial_record, e.last_ensemble = record, ens
        raise e.with_iteration(n)

    record.final_spec = spec
    return ens, record
