# File: core/linalg.py
# Tujuan: Utilitas aljabar linear kecil yang dipakai targets dan metrics:
# eigendekomposisi simetris, akar matriks PSD, solver tridiagonal dan solver padat SPD.

import logging

import numpy as np
import scipy.linalg

from core.errors import NotPSDError, NumericError, ParameterError

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10


class SymMatrix:
    """Matriks simetris n x n; simetri dipaksakan saat konstruksi dengan (A + Aᵀ)/2."""

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"SymMatrix butuh matriks persegi, didapat {a.shape}.")
        if not np.isfinite(a).all():
            raise NumericError("SymMatrix berisi nilai non-finite.")
        self.values = 0.5 * (a + a.T)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


def _as_sym(a) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


def sym_eig(a) -> tuple:
    """
    Eigendekomposisi A = V Λ Vᵀ untuk matriks simetris.

    Returns:
        tuple: (eigenvalues menaik, eigenvectors ortonormal sebagai kolom).
    """
    a = _as_sym(a)
    try:
        w, v = np.linalg.eigh(a.values)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"Eigendekomposisi tidak konvergen: {e}") from e
    return w, v


def sym_sqrt(a) -> SymMatrix:
    """
    Akar kuadrat simetris S dari matriks PSD A (S·S = A).

    Eigenvalue di bawah -1e-10·‖A‖_max dianggap pelanggaran PSD; sisanya di-clamp ke 0.
    """
    a = _as_sym(a)
    w, v = sym_eig(a)
    floor = PSD_TOLERANCE * a.max_abs()
    if w.size and w.min() < -floor:
        raise NotPSDError(f"Matriks tidak PSD: eigenvalue terkecil {w.min():.3e} < -{floor:.3e}.")
    root = np.sqrt(np.clip(w, 0.0, None))
    return SymMatrix((v * root) @ v.T)


def solve_tridiag(lower, diag, upper, rhs) -> np.ndarray:
    """
    Menyelesaikan T x = rhs untuk matriks tridiagonal T.

    Args:
        lower: Subdiagonal (panjang n-1).
        diag: Diagonal utama (panjang n).
        upper: Superdiagonal (panjang n-1).
        rhs: Vektor (n,) atau matriks (n, k) ruas kanan.
    """
    diag = np.asarray(diag, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = diag.shape[0]
    if lower.shape != (n - 1,) or upper.shape != (n - 1,) or rhs.shape[0] != n:
        raise ParameterError(
            f"Dimensi sistem tridiagonal tidak cocok: diag {diag.shape}, lower {lower.shape}, "
            f"upper {upper.shape}, rhs {rhs.shape}."
        )
    banded = np.zeros((3, n))
    banded[0, 1:] = upper
    banded[1, :] = diag
    banded[2, :-1] = lower
    try:
        x = scipy.linalg.solve_banded((1, 1), banded, rhs)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"Solver tridiagonal gagal (pivot nol): {e}") from e
    if not np.isfinite(x).all():
        raise NumericError("Solver tridiagonal menghasilkan nilai non-finite.")
    return x


def solve_spd(a, b) -> np.ndarray:
    """Solve padat A x = b untuk A simetris definit positif (Cholesky)."""
    a = _as_sym(a)
    try:
        factor = scipy.linalg.cho_factor(a.values, lower=True)
        return scipy.linalg.cho_solve(factor, np.asarray(b, dtype=np.float64))
    except np.linalg.LinAlgError as e:
        raise NumericError(f"Sistem singular atau tidak definit positif: {e}") from e
