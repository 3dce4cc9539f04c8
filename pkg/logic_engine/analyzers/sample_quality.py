# File: logic_engine/analyzers/sample_quality.py
# Tujuan: Diagnostik kualitas sampel partikel: W1 eksak 1D, Bures-Wasserstein-2
# antar Gaussian, statistik χ², ringkasan momen, marginal ternormalisasi dan
# kuantil Q-Q.

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
import pandas as pd
from scipy import stats

from core.ensemble import Ensemble, GaussianInfo
from core.errors import ParameterError
from core.linalg import PSD_TOLERANCE, sym_sqrt

logger = logging.getLogger(__name__)

# Metrik yang dihitung di luar modul ini (oleh loop dinamika)
DYNAMICS_METRICS = ("ksd2", "bandwidths")
SAMPLE_METRICS = ("w1_1d", "bures_w2", "chi2", "marginal_var", "cov_trace", "var_ratio")


@dataclass(frozen=True, eq=False)
class MomentSummary:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def marginal_variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    @property
    def trace(self) -> float:
        return float(np.trace(self.cov))


def _finite_sample(sample, name: str) -> np.ndarray:
    arr = np.asarray(sample, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParameterError(f"Sampel {name} kosong.")
    if not np.isfinite(arr).all():
        raise ParameterError(f"Sampel {name} berisi nilai non-finite.")
    return arr


def wasserstein1_1d(sample_a, sample_b) -> float:
    """W1 eksak antara dua distribusi empiris 1D: ∫|F_a - F_b| dx atas breakpoint gabungan."""
    a = _finite_sample(sample_a, "a")
    b = _finite_sample(sample_b, "b")
    return float(stats.wasserstein_distance(a, b))


def bures_w2(mu1, sigma1, mu2, sigma2) -> float:
    """
    W2 antara N(mu1, sigma1) dan N(mu2, sigma2):
    sqrt(‖μ1 - μ2‖² + Tr(Σ1 + Σ2 - 2 (Σ1^½ Σ2 Σ1^½)^½)).
    """
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, dtype=np.float64)), np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    s1 = np.atleast_2d(np.asarray(sigma1, dtype=np.float64))
    s2 = np.atleast_2d(np.asarray(sigma2, dtype=np.float64))
    d = mu1.shape[0]
    if mu2.shape != (d,) or s1.shape != (d, d) or s2.shape != (d, d):
        raise ParameterError(f"Dimensi Gaussian tidak cocok: {mu1.shape}, {s1.shape}, {mu2.shape}, {s2.shape}.")
    root1 = np.asarray(sym_sqrt(s1))
    # SymMatrix menyimetrisasi argumen sebelum akar
    cross = sym_sqrt(root1 @ s2 @ root1)
    delta = mu1 - mu2
    value = float(delta @ delta) + float(np.trace(s1) + np.trace(s2) - 2.0 * np.trace(np.asarray(cross)))
    return float(np.sqrt(max(value, 0.0)))


def chi2_statistic(ens: Ensemble, sigma_inv_diag) -> float:
    """Rata-rata atas partikel dari Σ_i x_i² / σ_i²."""
    sigma_inv_diag = np.atleast_1d(np.asarray(sigma_inv_diag, dtype=np.float64))
    if sigma_inv_diag.shape != (ens.d,):
        raise ParameterError(f"sigma_inv_diag {sigma_inv_diag.shape} tidak cocok dengan dimensi {ens.d}.")
    x = ens.particles
    return float(np.mean((x * x * sigma_inv_diag).sum(axis=1)))


def moment_summary(ens: Ensemble) -> MomentSummary:
    """Mean sampel dan kovarians tak bias (pembagi M - 1)."""
    if ens.m < 2:
        raise ParameterError(f"Ringkasan momen butuh M >= 2, didapat M = {ens.m}.")
    x = ens.particles
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    w = np.linalg.eigvalsh(cov)
    if w.size and w.min() < -PSD_TOLERANCE * max(1.0, float(np.abs(cov).max())):
        logger.warning(f"Kovarians sampel sedikit tidak PSD (eigenvalue min {w.min():.3e}).")
    return MomentSummary(mean=mean, cov=cov)


def normalized_marginals(ens: Ensemble, target_marginal_sds) -> np.ndarray:
    """Kolom i dibagi sd_i target."""
    sds = np.atleast_1d(np.asarray(target_marginal_sds, dtype=np.float64))
    if sds.shape != (ens.d,):
        raise ParameterError(f"Jumlah sd {sds.shape} tidak cocok dengan dimensi {ens.d}.")
    if (sds <= 0).any() or not np.isfinite(sds).all():
        raise ParameterError("Semua sd target harus finite dan > 0.")
    return ens.particles / sds


def qq_quantiles(normalized: np.ndarray) -> pd.DataFrame:
    """
    Kuantil empiris tiap komponen ternormalisasi terhadap kuantil N(0, 1),
    memakai plotting position (k - 0.5) / M.
    """
    normalized = np.atleast_2d(np.asarray(normalized, dtype=np.float64))
    m, d = normalized.shape
    probs = (np.arange(1, m + 1) - 0.5) / m
    frame = {"prob": probs, "normal": stats.norm.ppf(probs)}
    for i in range(d):
        frame[f"x_{i + 1}"] = np.sort(normalized[:, i])
    return pd.DataFrame(frame)


def variance_ratio(ens: Ensemble, target_variances) -> float:
    """Rata-rata atas komponen dari varians partikel / varians target."""
    target_variances = np.atleast_1d(np.asarray(target_variances, dtype=np.float64))
    return float(np.mean(moment_summary(ens).marginal_variances / target_variances))


def calculate_metrics(
    ens: Ensemble,
    names: Iterable[str],
    gaussian_info: Optional[GaussianInfo] = None,
    reference_sample: Optional[np.ndarray] = None,
) -> Dict[str, float]:
    """
    Menghitung metrik sampel yang diminta untuk satu ensemble.

    Args:
        ens (Ensemble): Partikel.
        names (Iterable[str]): Subset dari SAMPLE_METRICS; nama lain diabaikan.
        gaussian_info (GaussianInfo, optional): Mean/kovarians target untuk metrik Gaussian.
        reference_sample (np.ndarray, optional): Sampel eksak target untuk w1_1d.

    Returns:
        dict: Nama kolom -> nilai. marginal_var menghasilkan var_1..var_d.
    """
    results = {}
    summary = None
    for name in names:
        if name not in SAMPLE_METRICS:
            continue
        if name in ("bures_w2", "chi2", "var_ratio") and gaussian_info is None:
            raise ParameterError(f"Metrik '{name}' butuh target Gaussian.")
        if name in ("bures_w2", "marginal_var", "cov_trace") and summary is None:
            summary = moment_summary(ens)

        if name == "w1_1d":
            if reference_sample is None or ens.d != 1:
                raise ParameterError("Metrik 'w1_1d' butuh target 1D dengan sampel referensi.")
            results["w1_1d"] = wasserstein1_1d(ens.particles[:, 0], reference_sample)
        elif name == "bures_w2":
            results["bures_w2"] = bures_w2(summary.mean, summary.cov, gaussian_info.mean, gaussian_info.cov)
        elif name == "chi2":
            results["chi2"] = chi2_statistic(ens, 1.0 / np.diag(gaussian_info.cov))
        elif name == "marginal_var":
            results.update({f"var_{i + 1}": float(v) for i, v in enumerate(summary.marginal_variances)})
        elif name == "cov_trace":
            results["cov_trace"] = summary.trace
        elif name == "var_ratio":
            results["var_ratio"] = variance_ratio(ens, np.diag(gaussian_info.cov))
    return results


def metric_columns(names: Iterable[str], d: int) -> list:
    """Nama kolom CSV untuk metrik sampel yang diminta, urutan sesuai permintaan."""
    columns = []
    for name in names:
        if name == "marginal_var":
            columns += [f"var_{i + 1}" for i in range(d)]
        elif name in SAMPLE_METRICS:
            columns.append(name)
    return columns
