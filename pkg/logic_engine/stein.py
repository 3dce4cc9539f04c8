# File: logic_engine/stein.py
# Tujuan: Stein kernel u_π^k, estimator KSD² (U- dan V-statistic, opsional subsample)
# beserta gradiennya terhadap parameter kernel, dan satu langkah gradient ascent
# KSD² pada bandwidth.

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from core.ensemble import Ensemble, Rng, ScoreModel
from core.errors import NumericError, ParameterError
from logic_engine.kernels import LINEAR_H_MIN, KernelSpec, ParamSpace, _as_point, pairwise_kernel
from logic_engine.reduction_helpers import sum_all, sum_all_leading

logger = logging.getLogger(__name__)


class EstimatorVariant(str, Enum):
    U = "U"
    V = "V"


@dataclass(frozen=True, eq=False)
class SteinEstimate:
    ksd2: float
    grad_theta: Optional[np.ndarray]
    variant: EstimatorVariant
    pairs_used: int


@dataclass(frozen=True, eq=False)
class ScoreCache:
    """Score ∇log π di setiap partikel, dipakai bersama oleh update θ dan update partikel."""

    scores: np.ndarray

    @classmethod
    def build(cls, model: ScoreModel, ens: Ensemble) -> "ScoreCache":
        return cls(model.scores(ens.particles))


def _stein_matrix(spec: KernelSpec, x: np.ndarray, s: np.ndarray, with_param_grads: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    u(x_i, x_j) untuk semua pasangan, dan ∂u/∂log h per parameter bila diminta.

    Returns:
        tuple: (u berbentuk (M, M), du berbentuk (M, M, P) atau None).
    """
    pk = pairwise_kernel(spec, x)
    k = pk.value
    g = pk.g
    g2 = g * g
    # s_y - s_x dengan x = baris i, y = kolom j
    ds = s[None, :, :] - s[:, None, :]
    inner = (s[:, None, :] * s[None, :, :]).sum(axis=-1)
    u = k * (inner + (g * ds).sum(axis=-1) + (pk.curvature - g2).sum(axis=-1))
    if not with_param_grads:
        return u, None
    per_dim = pk.scaled * u[..., None] + k[..., None] * (2.0 * g2 - g * ds - pk.curvature)
    return u, spec.reduce_params(per_dim)


def stein_kernel_u(spec: KernelSpec, x, y, score_x, score_y, with_param_grads: bool = False):
    """
    Stein kernel u(x, y) = k s_x·s_y + s_y·∇_x k + s_x·∇_y k + Tr(∇_x∇_y k).

    Returns:
        float, atau tuple (float, gradien per parameter dalam log h) bila with_param_grads.
    """
    x, y = _as_point(x, "x"), _as_point(y, "y")
    sx, sy = _as_point(score_x, "score_x"), _as_point(score_y, "score_y")
    if not (x.shape == y.shape == sx.shape == sy.shape):
        raise ParameterError("Dimensi titik dan score tidak cocok.")
    u, du = _stein_matrix(spec, np.stack([x, y]), np.stack([sx, sy]), with_param_grads)
    if with_param_grads:
        return float(u[0, 1]), du[0, 1].copy()
    return float(u[0, 1])


def _to_param_space(spec: KernelSpec, grad_log: np.ndarray) -> np.ndarray:
    if spec.param_space is ParamSpace.LINEAR:
        return grad_log / spec.bandwidths
    return grad_log


def ksd_squared(
    spec: KernelSpec,
    ens: Ensemble,
    scores: ScoreCache,
    variant: str = "U",
    subsample: Optional[Tuple[int, Rng]] = None,
    deterministic: bool = True,
    jobs: int = 1,
    with_grad: bool = True,
) -> SteinEstimate:
    """
    Estimasi empiris KSD² dan gradiennya terhadap parameter kernel.

    Args:
        spec (KernelSpec): Kernel saat ini.
        ens (Ensemble): Partikel.
        scores (ScoreCache): Score untuk ensemble yang sama.
        variant (str): "U" (tanpa pasangan diagonal) atau "V" (hanya p = 2).
        subsample (tuple, optional): (count, rng), subset acak tanpa pengembalian.
        deterministic (bool): Reduksi terurut, hasil invarian terhadap permutasi secara bit.
        jobs (int): Jumlah thread untuk reduksi non-deterministik.
        with_grad (bool): Hitung grad_theta.
    """
    variant = EstimatorVariant(variant)
    x = ens.particles
    s = np.asarray(scores.scores, dtype=np.float64)
    if s.shape != x.shape:
        raise ParameterError(f"ScoreCache {s.shape} tidak cocok dengan ensemble {x.shape}.")
    if variant is EstimatorVariant.V and spec.p != 2:
        raise ParameterError("Estimator V hanya terdefinisi untuk p = 2 (suku diagonal singular untuk p lain).")
    if subsample is not None:
        count, rng = subsample
        idx = rng.choice_without_replacement(x.shape[0], int(count))
        x, s = x[idx], s[idx]
    m = x.shape[0]
    if variant is EstimatorVariant.U and m < 2:
        raise ParameterError(f"Estimator U butuh M >= 2, didapat M = {m}.")

    u, du = _stein_matrix(spec, x, s, with_grad)
    if variant is EstimatorVariant.U:
        diag = np.arange(m)
        u[diag, diag] = 0.0
        if du is not None:
            du[diag, diag, :] = 0.0
        pairs = m * (m - 1)
    else:
        pairs = m * m

    ksd2 = sum_all(u, deterministic, jobs) / pairs
    grad = None
    if du is not None:
        grad = _to_param_space(spec, sum_all_leading(du, deterministic, jobs) / pairs)
    return SteinEstimate(ksd2=ksd2, grad_theta=grad, variant=variant, pairs_used=pairs)


def ksd_ascent_step(
    spec: KernelSpec,
    ens: Ensemble,
    scores: ScoreCache,
    step: float,
    variant: str = "U",
    subsample: Optional[Tuple[int, Rng]] = None,
    deterministic: bool = True,
    jobs: int = 1,
) -> KernelSpec:
    """
    Satu langkah θ ← θ + s ∇_θ KSD². Pemanggil mengulang sebanyak nstepstheta.

    Dengan param_space "linear" langkah dilakukan pada h, lalu h di-clamp ke >= 1e-8.
    """
    if not (np.isfinite(step) and step >= 0):
        raise ParameterError(f"Langkah ascent s harus finite dan >= 0, didapat {step}.")
    if step == 0:
        return spec
    est = ksd_squared(spec, ens, scores, variant, subsample, deterministic, jobs, with_grad=True)
    grad = est.grad_theta
    bad = ~np.isfinite(grad)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericError(f"Gradien KSD² non-finite pada parameter kernel {idx}.", index=idx)

    if spec.param_space is ParamSpace.LINEAR:
        h = np.maximum(spec.bandwidths + step * grad, LINEAR_H_MIN)
        new_log = np.log(h)
    else:
        new_log = spec.log_bandwidths + step * grad
    if not np.isfinite(new_log).all():
        idx = int(np.flatnonzero(~np.isfinite(new_log))[0])
        raise NumericError(f"Bandwidth non-finite setelah ascent pada parameter {idx}.", index=idx)
    logger.debug(f"KSD ascent: ksd2={est.ksd2:.6g}, |grad|={np.abs(grad).max():.3g}")
    return spec.with_log_bandwidths(new_log)


def max_ksd_squared(
    spec: KernelSpec,
    ens: Ensemble,
    scores: ScoreCache,
    factors: Sequence[float],
    variant: str = "U",
    deterministic: bool = True,
    jobs: int = 1,
) -> float:
    """Maksimum KSD² atas bandwidth saat ini dikali tiap faktor pada grid."""
    factors = np.asarray(list(factors), dtype=np.float64)
    if factors.size == 0 or (factors <= 0).any():
        raise ParameterError("Grid faktor max-KSD harus tak kosong dan positif.")
    values = [
        ksd_squared(
            spec.with_log_bandwidths(spec.log_bandwidths + np.log(f)),
            ens, scores, variant, None, deterministic, jobs, with_grad=False,
        ).ksd2
        for f in factors
    ]
    return float(max(values))
