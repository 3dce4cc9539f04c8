# File: core/ensemble.py
# Tujuan: Tipe data inti yang dipakai bersama: ensemble partikel, antarmuka
# ScoreModel, dan generator acak ber-seed yang portabel.

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from core.errors import NumericError, ParameterError

logger = logging.getLogger(__name__)

_UINT64_MASK = (1 << 64) - 1


class Rng:
    """
    Generator acak ber-seed dengan urutan draw yang identik lintas platform.

    Uniform diambil dari PCG64 (algoritma yang terdokumentasi dan portabel),
    sampel Gaussian dibuat dengan Box-Muller, bukan ziggurat.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _UINT64_MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, stream: int) -> "Rng":
        """Rng turunan yang independen untuk stream bernomor (misal sampel referensi)."""
        state = np.random.SeedSequence([self.seed, int(stream)]).generate_state(1, np.uint64)[0]
        return Rng(int(state))

    def uniform(self, size) -> np.ndarray:
        return self._gen.random(size)

    def standard_normal(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        # 1 - U ada di (0, 1], jadi log tidak pernah bertemu nol
        u1 = 1.0 - self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(theta)
        z[1::2] = radius * np.sin(theta)
        return z[:n].reshape(shape)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """Subset acak berukuran k dari range(n), dikembalikan terurut."""
        if not 0 < k <= n:
            raise ParameterError(f"Ukuran subsample {k} harus di antara 1 dan {n}.")
        keys = self._gen.random(n)
        return np.sort(np.argsort(keys, kind="stable")[:k])


@dataclass
class Ensemble:
    """
    Himpunan M partikel di R^d.

    Urutan partikel tidak bermakna; operasi hilir bersifat permutation-equivariant.
    Array 1-D dibaca sebagai M partikel di R^1.
    """

    particles: np.ndarray

    def __post_init__(self):
        arr = np.array(self.particles, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"Ensemble harus berbentuk M x d dengan M, d >= 1, didapat {arr.shape}.")
        bad = ~np.isfinite(arr).all(axis=1)
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise NumericError(f"Partikel {idx} berisi nilai non-finite.", index=idx)
        self.particles = arr

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    @property
    def d(self) -> int:
        return self.particles.shape[1]

    def copy(self) -> "Ensemble":
        return Ensemble(self.particles.copy())

    def permuted(self, order) -> "Ensemble":
        return Ensemble(self.particles[np.asarray(order)])


@dataclass(frozen=True, eq=False)
class GaussianInfo:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class ScoreModel:
    """
    Distribusi target yang hanya diakses lewat score ∇log π.

    Attributes:
        d (int): Dimensi.
        batch_score (Callable): Fungsi (M, d) -> (M, d), score per baris.
        description (str): Label bebas.
        gaussian_info (GaussianInfo, optional): Mean dan kovarians untuk target Gaussian.
        log_density (Callable, optional): log π tak ternormalisasi, (M, d) -> (M,).
        sampler (Callable, optional): Sampler eksak (rng, n) -> (n, d).
    """

    d: int
    batch_score: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    gaussian_info: Optional[GaussianInfo] = None
    log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[Rng, int], np.ndarray]] = field(default=None)

    def score(self, x) -> np.ndarray:
        """Score di satu titik x ∈ R^d."""
        x = np.asarray(x, dtype=np.float64).reshape(1, self.d)
        return self.scores(x)[0]

    def scores(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.d:
            raise ParameterError(f"Titik harus berbentuk (M, {self.d}), didapat {points.shape}.")
        out = np.asarray(self.batch_score(points), dtype=np.float64).reshape(points.shape)
        bad = ~np.isfinite(out).all(axis=1)
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise NumericError(f"Score non-finite pada partikel {idx} ({self.description}).", index=idx)
        return out

    def gaussian_consistency_residual(self, rng: Rng, probes: int = 20) -> float:
        """
        Residual relatif maksimum antara score dan -Σ⁻¹(x - μ) pada titik acak.
        Hanya untuk target dengan gaussian_info.
        """
        if self.gaussian_info is None:
            raise ParameterError(f"Target '{self.description}' tidak memiliki gaussian_info.")
        mean = np.asarray(self.gaussian_info.mean, dtype=np.float64)
        cov = np.asarray(self.gaussian_info.cov, dtype=np.float64)
        points = mean + rng.standard_normal((probes, self.d))
        expected = -np.linalg.solve(cov, (points - mean).T).T
        got = self.scores(points)
        scale = np.maximum(np.abs(expected).max(axis=1), 1e-300)
        return float((np.abs(got - expected).max(axis=1) / scale).max())


def sample_gaussian(rng: Rng, m: int, mean, diag_sqrt_cov) -> Ensemble:
    """
    M draw i.i.d. dari Gaussian diagonal N(mean, diag(diag_sqrt_cov)^2).

    Args:
        rng (Rng): Sumber acak.
        m (int): Jumlah partikel.
        mean: Skalar atau vektor mean.
        diag_sqrt_cov: Skalar atau vektor standar deviasi per komponen (>= 0).

    Returns:
        Ensemble: Ensemble berukuran m x d.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    sd = np.atleast_1d(np.asarray(diag_sqrt_cov, dtype=np.float64))
    if m < 1:
        raise ParameterError(f"Jumlah partikel harus >= 1, didapat {m}.")
    if (sd < 0).any() or not np.isfinite(sd).all():
        raise ParameterError("Standar deviasi harus finite dan >= 0.")
    try:
        mean, sd = np.broadcast_arrays(mean, sd)
    except ValueError as e:
        raise ParameterError(f"Dimensi mean {mean.shape} dan sd {sd.shape} tidak cocok.") from e
    z = rng.standard_normal((m, mean.shape[0]))
    return Ensemble(mean + sd * z)
