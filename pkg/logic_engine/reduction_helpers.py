# File: logic_engine/reduction_helpers.py
# Tujuan: Helper reduksi untuk jumlah pasangan partikel (KSD dan arah SVGD).
# Mode deterministik menjumlahkan suku yang sudah diurutkan sehingga hasilnya
# bit-identik untuk permutasi partikel mana pun.

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)


def _chunks(n: int, jobs: int) -> list:
    bounds = np.linspace(0, n, min(jobs, n) + 1).astype(int)
    return [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def sum_last_axis(terms: np.ndarray, deterministic: bool = True, jobs: int = 1) -> np.ndarray:
    """
    Menjumlahkan sepanjang sumbu terakhir.

    Args:
        terms (np.ndarray): Array suku, reduksi pada sumbu -1.
        deterministic (bool): True -> urutkan suku dulu, hasil tidak bergantung urutan input.
        jobs (int): Jumlah thread untuk mode paralel (baris sumbu pertama dibagi per thread).
    """
    if deterministic:
        return np.sort(terms, axis=-1).sum(axis=-1)
    if jobs <= 1 or terms.ndim < 2:
        return terms.sum(axis=-1)
    parts = _chunks(terms.shape[0], jobs)
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(pool.map(lambda b: terms[b[0]:b[1]].sum(axis=-1), parts))
    return np.concatenate(results, axis=0)


def sum_all(terms: np.ndarray, deterministic: bool = True, jobs: int = 1) -> float:
    """Jumlah seluruh elemen; lihat sum_last_axis untuk arti mode."""
    flat = terms.reshape(1, -1)
    if not deterministic and jobs > 1 and terms.ndim >= 2:
        # jumlah per baris dulu, lalu jumlah parsial
        return float(sum_last_axis(terms.reshape(terms.shape[0], -1), False, jobs).sum())
    return float(sum_last_axis(flat, deterministic, 1)[0])


def sum_all_leading(terms: np.ndarray, deterministic: bool = True, jobs: int = 1) -> np.ndarray:
    """
    Untuk terms berbentuk (..., P): jumlah semua elemen per indeks P terakhir.
    Dipakai untuk gradien KSD per parameter kernel.
    """
    per_param = np.moveaxis(terms, -1, 0).reshape(terms.shape[-1], -1)
    return sum_last_axis(per_param, deterministic, jobs)
