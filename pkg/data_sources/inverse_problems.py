# File: data_sources/inverse_problems.py
# Tujuan: Masalah invers linear-Gaussian: rekonstruksi ruas kanan ODE
# -f'' + f = u dari observasi titik, dan inferensi GP dengan basis KL sinus.
# Termasuk posterior eksak sebagai ground truth dan band rekonstruksi.

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from core.ensemble import GaussianInfo, Rng, ScoreModel
from core.errors import NumericError, ParameterError
from core.linalg import SymMatrix, solve_spd, solve_tridiag

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearGaussianInverse:
    """
    Posterior π(x) ∝ exp(-½‖Γ^(-1/2)(y - F x)‖² - ½‖Γ₀^(-1/2) x‖²).

    Attributes:
        forward (np.ndarray): F, N_obs x N_x.
        noise_cov (np.ndarray): Γ, N_obs x N_obs (vektor dibaca sebagai diagonal).
        prior_var (np.ndarray): Diagonal Γ₀, panjang N_x.
        observation (np.ndarray): y, panjang N_obs.
    """

    forward: np.ndarray
    noise_cov: np.ndarray
    prior_var: np.ndarray
    observation: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.forward, dtype=np.float64))
        n_obs, n_x = f.shape
        gamma = np.asarray(self.noise_cov, dtype=np.float64)
        if gamma.ndim <= 1:
            gamma = np.diag(np.broadcast_to(gamma, (n_obs,)))
        prior = np.broadcast_to(np.asarray(self.prior_var, dtype=np.float64), (n_x,)).copy()
        y = np.atleast_1d(np.asarray(self.observation, dtype=np.float64))
        if gamma.shape != (n_obs, n_obs) or y.shape != (n_obs,):
            raise ParameterError(f"Dimensi Γ {gamma.shape} atau y {y.shape} tidak cocok dengan F {f.shape}.")
        if (prior <= 0).any():
            raise ParameterError("Varians prior harus > 0.")
        try:
            np.linalg.cholesky(0.5 * (gamma + gamma.T))
        except np.linalg.LinAlgError as e:
            raise ParameterError("Kovarians noise Γ tidak definit positif.") from e
        object.__setattr__(self, "forward", f)
        object.__setattr__(self, "noise_cov", gamma)
        object.__setattr__(self, "prior_var", prior)
        object.__setattr__(self, "observation", y)
        # Fᵀ Γ⁻¹ dipakai di setiap evaluasi score
        object.__setattr__(self, "_ft_noise_inv", solve_spd(gamma, f).T)

    @property
    def n_x(self) -> int:
        return self.forward.shape[1]

    @property
    def n_obs(self) -> int:
        return self.forward.shape[0]

    def batch_score(self, points: np.ndarray) -> np.ndarray:
        residual = self.observation - points @ self.forward.T
        return residual @ self._ft_noise_inv.T - points / self.prior_var

    def log_density(self, points: np.ndarray) -> np.ndarray:
        residual = self.observation - points @ self.forward.T
        weighted = solve_spd(self.noise_cov, residual.T).T
        return -0.5 * (residual * weighted).sum(axis=1) - 0.5 * (points * points / self.prior_var).sum(axis=1)


def linear_gaussian_score(prob: LinearGaussianInverse, x) -> np.ndarray:
    """∇log π(x) = Fᵀ Γ⁻¹ (y - F x) - Γ₀⁻¹ x."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (prob.n_x,) or not np.isfinite(x).all():
        raise ParameterError(f"x harus vektor finite berukuran {prob.n_x}.")
    return prob.batch_score(x[None, :])[0]


def exact_posterior(prob: LinearGaussianInverse) -> Tuple[np.ndarray, SymMatrix]:
    """
    μ_π dan Σ_π dari persamaan normal (FᵀΓ⁻¹F + Γ₀⁻¹) μ = FᵀΓ⁻¹ y.
    """
    precision = prob._ft_noise_inv @ prob.forward + np.diag(1.0 / prob.prior_var)
    rhs = prob._ft_noise_inv @ prob.observation
    mean = solve_spd(precision, rhs)
    cov = solve_spd(precision, np.eye(prob.n_x))
    residual = np.abs(precision @ mean - rhs).max()
    scale = max(1.0, float(np.abs(rhs).max()))
    if not np.isfinite(mean).all() or residual > 1e-8 * scale:
        raise NumericError(f"Residual persamaan normal terlalu besar: {residual:.3e}.")
    return mean, SymMatrix(cov)


def linear_gaussian_target(prob: LinearGaussianInverse, description: str) -> ScoreModel:
    """ScoreModel untuk posterior, dengan gaussian_info = posterior eksak."""
    mean, cov = exact_posterior(prob)
    chol = np.linalg.cholesky(cov.values)

    def sampler(rng: Rng, n: int) -> np.ndarray:
        return mean + rng.standard_normal((n, prob.n_x)) @ chol.T

    return ScoreModel(
        d=prob.n_x,
        batch_score=prob.batch_score,
        description=description,
        gaussian_info=GaussianInfo(mean=mean, cov=cov.values),
        log_density=prob.log_density,
        sampler=sampler,
    )


def kl_basis(s, n_x: int) -> np.ndarray:
    """ψ_k(s) = √2 sin(π k s), kolom k = 1..n_x."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    k = np.arange(1, n_x + 1, dtype=np.float64)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(s, k))


def kl_eigenvalues(n_x: int, scale: float = 1.0, decay: float = 2.0) -> np.ndarray:
    return scale * np.arange(1, n_x + 1, dtype=np.float64) ** (-decay)


@dataclass(frozen=True)
class OdeProblemSpec:
    """
    -f'' + f = u di (0, 1), f(0) = f(1) = 0, grid 2^r, observasi di s_k = k / n_obs.
    """

    r: int = 8
    n_obs: int = 256
    n_x: int = 16
    eig_scale: float = 50.0
    eig_decay: float = 2.0
    noise_var: float = 1e-3
    seed: Optional[int] = None

    def validate(self) -> None:
        n = 2 ** self.r
        if self.r < 1 or self.n_x < 1 or self.n_obs < 1:
            raise ParameterError("r, n_x, n_obs harus >= 1.")
        if self.n_obs > n or n % self.n_obs:
            raise ParameterError(f"n_obs = {self.n_obs} harus membagi ukuran grid 2^{self.r} = {n}.")
        if self.eig_scale <= 0 or self.noise_var <= 0:
            raise ParameterError("eig_scale dan noise_var harus > 0.")


def ode_grid(r: int) -> np.ndarray:
    """Node interior s_j = j Δ, j = 1..2^r - 1."""
    n = 2 ** r
    return np.arange(1, n, dtype=np.float64) / n


def solve_ode(u_values: np.ndarray, r: int) -> np.ndarray:
    """
    Beda hingga tengah orde dua untuk -f'' + f = u pada node interior.

    Args:
        u_values: Nilai u di node interior, (n - 1,) atau (n - 1, k) untuk banyak ruas kanan.
    """
    n = 2 ** r
    delta2 = (1.0 / n) ** 2
    off = np.full(n - 2, -1.0 / delta2)
    diag = np.full(n - 1, 2.0 / delta2 + 1.0)
    return solve_tridiag(off, diag, off, u_values)


def ode_forward_matrix(spec: OdeProblemSpec) -> np.ndarray:
    """F = 𝒪 H⁻¹ A, dirakit dengan n_x solve tridiagonal."""
    spec.validate()
    n = 2 ** spec.r
    s = ode_grid(spec.r)
    solutions = solve_ode(kl_basis(s, spec.n_x), spec.r)
    forward = np.zeros((spec.n_obs, spec.n_x))
    stride = n // spec.n_obs
    for k in range(1, spec.n_obs + 1):
        j = k * stride
        # s = 1 ada di batas Dirichlet, baris nol
        if j < n:
            forward[k - 1] = solutions[j - 1]
    return forward


def build_ode_problem(spec: OdeProblemSpec, rng: Rng) -> Tuple[LinearGaussianInverse, np.ndarray, np.ndarray]:
    """Masalah invers ODE beserta x̄ ~ N(0, Γ₀) dan ȳ = F x̄ (tanpa noise)."""
    forward = ode_forward_matrix(spec)
    prior = kl_eigenvalues(spec.n_x, spec.eig_scale, spec.eig_decay)
    x_ref = np.sqrt(prior) * rng.standard_normal(spec.n_x)
    y_ref = forward @ x_ref
    prob = LinearGaussianInverse(forward, np.full(spec.n_obs, spec.noise_var), prior, y_ref)
    logger.debug(f"ODE problem: r={spec.r}, n_obs={spec.n_obs}, n_x={spec.n_x}")
    return prob, x_ref, y_ref


@dataclass(frozen=True)
class GpProblemSpec:
    n_x: int = 16
    n_y: int = 64
    seed: Optional[int] = None

    def validate(self) -> None:
        if self.n_x < 1 or self.n_y < 1:
            raise ParameterError("n_x dan n_y harus >= 1.")


def gp_forward_matrix(spec: GpProblemSpec) -> np.ndarray:
    spec.validate()
    s = np.arange(1, spec.n_y + 1, dtype=np.float64) / spec.n_y
    return kl_basis(s, spec.n_x)


def build_gp_problem(spec: GpProblemSpec, rng: Rng) -> Tuple[LinearGaussianInverse, np.ndarray, np.ndarray]:
    """Y = A X + ε dengan prior diag(k^-2) dan Γ = I; ȳ = A x̄."""
    forward = gp_forward_matrix(spec)
    prior = kl_eigenvalues(spec.n_x)
    x_ref = np.sqrt(prior) * rng.standard_normal(spec.n_x)
    y_ref = forward @ x_ref
    return LinearGaussianInverse(forward, np.ones(spec.n_y), prior, y_ref), x_ref, y_ref


def reconstruction_band(particles: np.ndarray, post_mean: np.ndarray, post_cov: np.ndarray, grid: np.ndarray) -> pd.DataFrame:
    """
    Rekonstruksi u(s) = Σ_k x_k ψ_k(s) pada grid: mean partikel dan kuantil 5%/95%,
    dibandingkan dengan mean posterior eksak dan band 90%-nya.
    """
    particles = np.atleast_2d(particles)
    basis = kl_basis(grid, particles.shape[1])
    values = particles @ basis.T
    exact_sd = np.sqrt(np.clip(np.einsum("gi,ij,gj->g", basis, post_cov, basis), 0.0, None))
    z = stats.norm.ppf(0.95)
    exact_mean = basis @ post_mean
    return pd.DataFrame(
        {
            "s": grid,
            "particle_mean": values.mean(axis=0),
            "particle_q05": np.quantile(values, 0.05, axis=0),
            "particle_q95": np.quantile(values, 0.95, axis=0),
            "posterior_mean": exact_mean,
            "posterior_q05": exact_mean - z * exact_sd,
            "posterior_q95": exact_mean + z * exact_sd,
        }
    )
