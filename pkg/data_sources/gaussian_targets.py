# File: data_sources/gaussian_targets.py
# Tujuan: Target Gaussian diagonal berdimensi d dengan varians i^(-variance_power).

import logging

import numpy as np

from core.ensemble import GaussianInfo, Rng, ScoreModel
from core.errors import ParameterError

logger = logging.getLogger(__name__)


def diag_variances(d: int, variance_power: float = 2.0) -> np.ndarray:
    """Varians marginal (1, 2^-q, ..., d^-q); q = 2 sesuai tabel (1, 0.25, 0.1111, ...)."""
    if d < 1:
        raise ParameterError(f"Dimensi harus >= 1, didapat {d}.")
    return np.arange(1, d + 1, dtype=np.float64) ** (-float(variance_power))


def diag_gaussian_target(d: int, variance_power: float = 2.0) -> ScoreModel:
    """
    N(0, Σ_d) dengan Σ_d diagonal; score(x) = -Σ_d⁻¹ x.

    Args:
        d (int): Dimensi.
        variance_power (float): q pada varians i^(-q). q = 1 memberi diag(1, 1/2, ..., 1/d).
    """
    variances = diag_variances(d, variance_power)
    precision = 1.0 / variances
    sds = np.sqrt(variances)

    def sampler(rng: Rng, n: int) -> np.ndarray:
        return sds * rng.standard_normal((n, d))

    return ScoreModel(
        d=d,
        batch_score=lambda pts: -pts * precision,
        description=f"gauss-diag({d})",
        gaussian_info=GaussianInfo(mean=np.zeros(d), cov=np.diag(variances)),
        log_density=lambda pts: -0.5 * (pts * pts * precision).sum(axis=1),
        sampler=sampler,
    )
