# File: logic_engine/kernels.py
# Tujuan: Keluarga kernel berparameter k_h(x, y) = ∏ exp(-|x_i - y_i|^p / h_i)
# (isotropik dengan satu bandwidth, atau produk dengan bandwidth per dimensi),
# turunan spasial, trace turunan campuran, turunan terhadap log-bandwidth,
# dan median heuristic sebagai baseline.

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from core.ensemble import Ensemble
from core.errors import DegenerateEnsembleError, ParameterError

logger = logging.getLogger(__name__)

LINEAR_H_MIN = 1e-8


class KernelFamily(str, Enum):
    ISOTROPIC = "isotropic"
    PRODUCT = "product"


class ParamSpace(str, Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    Spesifikasi kernel berparameter.

    Bandwidth disimpan sebagai logaritma sehingga h_i > 0 selalu.
    `param_space` menentukan ruang tempat gradient ascent KSD bekerja.
    """

    family: KernelFamily
    p: float
    log_bandwidths: np.ndarray
    param_space: ParamSpace = ParamSpace.LOG

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        object.__setattr__(self, "param_space", ParamSpace(self.param_space))
        logh = np.atleast_1d(np.array(self.log_bandwidths, dtype=np.float64))
        if logh.ndim != 1 or logh.size < 1:
            raise ParameterError("log_bandwidths harus vektor tak kosong.")
        if self.family is KernelFamily.ISOTROPIC and logh.size != 1:
            raise ParameterError(f"Kernel isotropik butuh tepat 1 bandwidth, didapat {logh.size}.")
        if not np.isfinite(logh).all():
            raise ParameterError("log_bandwidths berisi nilai non-finite.")
        if not (np.isfinite(self.p) and self.p >= 1):
            raise ParameterError(f"Eksponen kernel p harus >= 1, didapat {self.p}.")
        logh.setflags(write=False)
        object.__setattr__(self, "log_bandwidths", logh)
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def isotropic(cls, h: float, p: float = 2, param_space: str = "log") -> "KernelSpec":
        return cls(KernelFamily.ISOTROPIC, p, np.log([float(h)]), ParamSpace(param_space))

    @classmethod
    def product(cls, bandwidths, p: float = 2, param_space: str = "log") -> "KernelSpec":
        return cls(KernelFamily.PRODUCT, p, np.log(np.asarray(bandwidths, dtype=np.float64)), ParamSpace(param_space))

    @property
    def bandwidths(self) -> np.ndarray:
        return np.exp(self.log_bandwidths)

    @property
    def n_params(self) -> int:
        return self.log_bandwidths.size

    def dim_bandwidths(self, d: int) -> np.ndarray:
        """Bandwidth per dimensi, panjang d."""
        if self.family is KernelFamily.ISOTROPIC:
            return np.full(d, self.bandwidths[0])
        if self.n_params != d:
            raise ParameterError(f"Kernel produk punya {self.n_params} bandwidth, tetapi dimensi titik {d}.")
        return self.bandwidths

    def with_log_bandwidths(self, log_bandwidths) -> "KernelSpec":
        return KernelSpec(self.family, self.p, log_bandwidths, self.param_space)

    def with_bandwidth(self, h: float) -> "KernelSpec":
        """Semua bandwidth diset ke nilai skalar h."""
        return self.with_log_bandwidths(np.full(self.n_params, np.log(float(h))))

    def reduce_params(self, per_dim: np.ndarray) -> np.ndarray:
        """Turunan per dimensi (..., d) -> turunan per parameter (..., P)."""
        if self.family is KernelFamily.ISOTROPIC:
            return per_dim.sum(axis=-1, keepdims=True)
        return per_dim

    def __repr__(self):
        h = ", ".join(f"{v:.4g}" for v in self.bandwidths)
        return f"KernelSpec({self.family.value}, p={self.p:g}, h=[{h}], {self.param_space.value})"


@dataclass(frozen=True, eq=False)
class PairwiseKernel:
    """
    Besaran kernel untuk semua pasangan (x_i, y_j), dengan r = x_i - y_j.

    value (M, N): k(x_i, y_j)
    g (M, N, d): ∇_x k / k, yaitu -p|r|^(p-1) sign(r) / h
    scaled (M, N, d): a = |r|^p / h
    curvature (M, N, d): p(p-1)|r|^(p-2) / h (nol untuk p = 1)
    """

    value: np.ndarray
    g: np.ndarray
    scaled: np.ndarray
    curvature: np.ndarray

    @property
    def trace_xy(self) -> np.ndarray:
        return self.value * (self.curvature - self.g * self.g).sum(axis=-1)


def pairwise_kernel(spec: KernelSpec, x: np.ndarray, y: Optional[np.ndarray] = None) -> PairwiseKernel:
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ParameterError(f"Dimensi titik tidak cocok: {x.shape} vs {y.shape}.")
    h = spec.dim_bandwidths(x.shape[1])
    p = spec.p

    diff = x[:, None, :] - y[None, :, :]
    absdiff = np.abs(diff)
    if p == 1:
        powers = absdiff
        # sign(0) = 0: tidak ada gaya tolak-menolak pada koordinat yang sama
        g = -np.sign(diff) / h
        curvature = np.zeros_like(diff)
    elif p == 2:
        powers = absdiff * absdiff
        g = -2.0 * diff / h
        curvature = np.broadcast_to(2.0 / h, diff.shape)
    else:
        powers = absdiff ** p
        g = -p * absdiff ** (p - 1) * np.sign(diff) / h
        with np.errstate(divide="ignore"):
            curvature = p * (p - 1) * absdiff ** (p - 2) / h
    scaled = powers / h
    value = np.exp(-scaled.sum(axis=-1))
    return PairwiseKernel(value=value, g=g, scaled=scaled, curvature=curvature)


@dataclass(frozen=True, eq=False)
class KernelEval:
    """
    Evaluasi kernel di satu pasangan titik.

    dtheta (dict, optional): turunan terhadap log h_i untuk tiap field:
        "value" (P,), "grad_x" (P, d), "grad_y" (P, d), "trace_xy" (P,).
    """

    value: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    trace_xy: float
    dtheta: Optional[dict] = None


def _as_point(v, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if v.ndim != 1:
        raise ParameterError(f"{name} harus vektor 1-D, didapat bentuk {v.shape}.")
    return v


def kernel_eval(spec: KernelSpec, x, y, with_param_grads: bool = False) -> KernelEval:
    """
    Nilai kernel dan semua turunannya dalam bentuk tertutup.

    Args:
        spec (KernelSpec): Kernel.
        x, y: Titik di R^d.
        with_param_grads (bool): Sertakan turunan terhadap log-bandwidth.
    """
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ParameterError(f"Dimensi x {x.shape} dan y {y.shape} tidak cocok.")
    pk = pairwise_kernel(spec, x[None, :], y[None, :])
    k = float(pk.value[0, 0])
    g = pk.g[0, 0]
    a = pk.scaled[0, 0]
    c = pk.curvature[0, 0]
    grad_x = k * g
    trace = float(pk.trace_xy[0, 0])

    dtheta = None
    if with_param_grads:
        d = x.shape[0]
        dvalue = spec.reduce_params(k * a)
        # ∂(k g_j)/∂log h_i = k a_i g_j - δ_ij k g_j
        dgrad = k * a[:, None] * g[None, :] - np.diag(k * g)
        if spec.family is KernelFamily.ISOTROPIC:
            dgrad = dgrad.sum(axis=0, keepdims=True)
        dtrace = spec.reduce_params(a * trace + k * (2.0 * g * g - c))
        dtheta = {
            "value": dvalue,
            "grad_x": dgrad.reshape(-1, d),
            "grad_y": -dgrad.reshape(-1, d),
            "trace_xy": dtrace,
        }
    return KernelEval(value=k, grad_x=grad_x, grad_y=-grad_x, trace_xy=trace, dtheta=dtheta)


def median_heuristic(ens: Ensemble, p: float, norm: str = "euclidean") -> float:
    """
    Bandwidth h = med^p / log(M - 1), med = median bawah dari jarak berpasangan.

    Args:
        ens (Ensemble): Partikel saat ini.
        p (float): Eksponen kernel.
        norm (str): "euclidean" atau "p" (jarak p-norm).
    """
    m = ens.m
    if m < 3:
        raise ParameterError(f"Median heuristic butuh M >= 3 (log(M-1) > 0), didapat M = {m}.")
    if norm == "euclidean":
        distances = pdist(ens.particles, metric="euclidean")
    elif norm == "p":
        distances = pdist(ens.particles, metric="minkowski", p=p)
    else:
        raise ParameterError(f"median_norm tidak dikenal: {norm!r}.")
    k = (distances.size - 1) // 2
    med = float(np.partition(distances, k)[k])
    if med <= 0.0:
        raise DegenerateEnsembleError("Median jarak antar partikel nol; ensemble degenerate.")
    return med ** p / np.log(m - 1)


def svgd_direction_terms(spec: KernelSpec, x_i, x_j, score_j) -> np.ndarray:
    """Suku per pasangan pada update SVGD: k(x_i, x_j) ∇log π(x_j) + ∇_{x_j} k(x_i, x_j)."""
    score_j = _as_point(score_j, "score_j")
    ev = kernel_eval(spec, x_i, x_j)
    if score_j.shape != ev.grad_y.shape:
        raise ParameterError(f"Dimensi score {score_j.shape} tidak cocok dengan titik {ev.grad_y.shape}.")
    return ev.value * score_j + ev.grad_y
