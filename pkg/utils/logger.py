# utils/logger.py

import logging
import os

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def resolve_level(level) -> int:
    """Menerima nama level ("DEBUG") atau angka; nilai tidak dikenal jatuh ke INFO."""
    if isinstance(level, int):
        return level
    return logging._nameToLevel.get(str(level).upper(), logging.INFO)


def setup_logger(name: str, log_level=logging.INFO, log_file=None):
    """
    Mengatur logger dengan nama, level, dan opsi output ke konsol dan/atau file.

    Args:
        name (str): Nama logger ("steinflow" untuk root semua modul paket).
        log_level (int | str): Level logging (e.g., logging.INFO atau "DEBUG").
        log_file (str, optional): Path ke file log. Jika None, hanya output ke konsol.
    """
    log_level = resolve_level(log_level)
    logger = logging.getLogger(name)
    logger.setLevel(log_level)

    # Bersihkan handler yang sudah ada untuk mencegah duplikasi
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    ch = logging.StreamHandler()
    ch.setLevel(log_level)
    ch.setFormatter(formatter)
    logger.addHandler(ch)

    if log_file:
        # Pastikan direktori log ada
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        fh = logging.FileHandler(log_file)
        fh.setLevel(log_level)
        fh.setFormatter(formatter)
        logger.addHandler(fh)

    return logger


def setup_run_logging(log_level, log_file=None):
    """
    Logger untuk satu run: handler dipasang pada semua paket steinflow
    (core, logic_engine, data_sources, outputs) sehingga run.log lengkap.
    """
    for package in ("core", "logic_engine", "data_sources", "outputs", "steinflow"):
        setup_logger(package, log_level, log_file).propagate = False
    return logging.getLogger("steinflow")
