# File: data_sources/mixture.py
# Tujuan: Target campuran Gaussian 1D: score via responsibility, log-density,
# dan sampler eksak untuk sampel referensi W1.

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from core.ensemble import Rng, ScoreModel
from core.errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.atleast_1d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.variances, dtype=np.float64))
        if not (w.shape == mu.shape == var.shape) or w.ndim != 1 or w.size == 0:
            raise ParameterError("weights, means, variances harus vektor dengan panjang sama.")
        if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"Bobot campuran harus positif dan berjumlah 1, didapat {w}.")
        if (var <= 0).any():
            raise ParameterError("Varians komponen harus > 0.")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    def _component_logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
        return (
            np.log(self.weights)
            - 0.5 * np.log(2.0 * np.pi * self.variances)
            - 0.5 * (x - self.means) ** 2 / self.variances
        )

    def log_density(self, x) -> np.ndarray:
        return logsumexp(self._component_logpdf(x), axis=1)

    def score(self, x) -> np.ndarray:
        """Σ_k r_k(x) (-(x - μ_k) / σ_k²)."""
        logp = self._component_logpdf(x)
        resp = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
        x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
        return (resp * (-(x - self.means) / self.variances)).sum(axis=1)

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        """Sampel eksak: komponen dipilih dengan uniform, lalu Box-Muller."""
        u = rng.uniform(n)
        edges = np.cumsum(self.weights)
        edges[-1] = 1.0
        comp = np.searchsorted(edges, u, side="right")
        z = rng.standard_normal(n)
        return (self.means[comp] + np.sqrt(self.variances[comp]) * z).reshape(n, 1)


def mixture_score(gm: GaussianMixture, x) -> float:
    x = float(np.asarray(x, dtype=np.float64).ravel()[0])
    if not np.isfinite(x):
        raise ParameterError("x harus finite.")
    return float(gm.score(np.array([x]))[0])


def bimodal_mixture() -> GaussianMixture:
    """(1/3) N(-2, 1) + (2/3) N(2, 1)."""
    return GaussianMixture(weights=[1.0 / 3.0, 2.0 / 3.0], means=[-2.0, 2.0], variances=[1.0, 1.0])


def mixture_target(gm: GaussianMixture) -> ScoreModel:
    return ScoreModel(
        d=1,
        batch_score=lambda pts: gm.score(pts[:, 0]).reshape(-1, 1),
        description="mixture1d",
        log_density=lambda pts: gm.log_density(pts[:, 0]),
        sampler=gm.sample,
    )
