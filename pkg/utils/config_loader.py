# utils/config_loader.py
import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


class ConfigLoader:
    """
    Kelas untuk memuat dan menyediakan akses terstruktur ke variabel lingkungan steinflow.
    Variabel dimuat dari file .env (jika ada) lalu dari environment proses.
    """
    _instance = None  # Pola Singleton untuk memastikan hanya ada satu instance ConfigLoader

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super(ConfigLoader, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        load_dotenv()
        self._config = {
            # Batas thread untuk reduksi paralel di dalam satu run
            "STEINFLOW_THREADS": self._parse_int("STEINFLOW_THREADS", 1),
            "STEINFLOW_LOG_LEVEL": os.getenv("STEINFLOW_LOG_LEVEL", "INFO").upper(),
            "STEINFLOW_OUTPUT_DIR": os.getenv("STEINFLOW_OUTPUT_DIR", "runs"),
        }
        self._validate_config()
        self._initialized = True
        logger.debug("Configuration loaded and validated.")

    @staticmethod
    def _parse_int(key: str, default: int) -> int:
        raw = os.getenv(key)
        if raw is None or raw.strip() == "":
            return default
        try:
            return int(raw)
        except ValueError:
            logger.warning(f"{key}={raw!r} bukan bilangan bulat, memakai default {default}.")
            return default

    def _validate_config(self):
        if self._config["STEINFLOW_THREADS"] < 1:
            logger.warning("STEINFLOW_THREADS < 1, memakai 1.")
            self._config["STEINFLOW_THREADS"] = 1
        if self._config["STEINFLOW_LOG_LEVEL"] not in logging._nameToLevel:
            logger.warning(f"STEINFLOW_LOG_LEVEL tidak dikenal: {self._config['STEINFLOW_LOG_LEVEL']}, memakai INFO.")
            self._config["STEINFLOW_LOG_LEVEL"] = "INFO"

    def get(self, key: str, default=None):
        """
        Mendapatkan nilai konfigurasi berdasarkan kunci.

        Args:
            key (str): Nama kunci konfigurasi (misal, "STEINFLOW_THREADS").
            default: Nilai default yang akan dikembalikan jika kunci tidak ditemukan.
        """
        return self._config.get(key, default)

    def load_config(self):
        return self._config

    @classmethod
    def reset(cls):
        """Membuang instance singleton (dipakai test setelah mengubah environment)."""
        cls._instance = None
