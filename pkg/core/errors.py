# File: core/errors.py
# Tujuan: Hierarki exception yang dipakai oleh semua modul steinflow.


class SteinflowError(Exception):
    """Base class untuk semua error steinflow."""


class ParameterError(SteinflowError, ValueError):
    """Prasyarat operasi dilanggar (dimensi tidak cocok, M terlalu kecil, dll.)."""


class DegenerateEnsembleError(ParameterError):
    """Ensemble terlalu degenerate untuk operasi yang diminta (median jarak = 0)."""


class NumericError(SteinflowError, ArithmeticError):
    """
    Kegagalan numerik: nilai non-finite, sistem singular, pivot nol.

    Args:
        message (str): Pesan error.
        iteration (int, optional): Indeks iterasi dinamika saat error terjadi.
        index (int, optional): Indeks partikel atau parameter yang bermasalah.

    Dinamika mengisi `partial_record` (baris yang sudah dicatat) dan
    `last_ensemble` (ensemble finite terakhir) sebelum error diteruskan.
    """

    def __init__(self, message: str, iteration: int = None, index: int = None):
        super().__init__(message)
        self.iteration = iteration
        self.index = index
        self.partial_record = None
        self.last_ensemble = None

    def with_iteration(self, iteration: int) -> "NumericError":
        self.iteration = iteration
        return self


class NotPSDError(NumericError):
    """Matriks memiliki eigenvalue di bawah batas toleransi PSD."""


class ConfigValidationError(SteinflowError, ValueError):
    """Konfigurasi run tidak valid; `errors` berisi satu entri per field yang dilanggar."""

    def __init__(self, errors: list):
        self.errors = list(errors)
        super().__init__("Konfigurasi tidak valid:\n" + "\n".join(f"  - {e}" for e in self.errors))
