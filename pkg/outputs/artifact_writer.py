# File: outputs/artifact_writer.py
# Tujuan: Menulis artefak run ke direktori output: trace.csv, final_particles.csv,
# summary.json, sweep.csv, run_config.env, dan ekspor opsional (marginal
# ternormalisasi, Q-Q, rekonstruksi).

import json
import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
PARTICLES_FILE = "final_particles.csv"
SUMMARY_FILE = "summary.json"
SWEEP_FILE = "sweep.csv"
CONFIG_ECHO_FILE = "run_config.env"


def format_float(value) -> str:
    """Representasi desimal terpendek yang round-trip."""
    return repr(float(value))


def particle_columns(d: int) -> list:
    return [f"x_{i + 1}" for i in range(d)]


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


class ArtifactWriter:
    """
    Penulis artefak untuk satu direktori output.

    Args:
        out_dir (str): Direktori tujuan, dibuat bila belum ada.
    """

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_frame(self, name: str, frame: pd.DataFrame) -> str:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=format_float, lineterminator="\n")
        logger.debug(f"Menulis {target} ({len(frame)} baris).")
        return target

    def write_trace(self, frame: pd.DataFrame) -> str:
        return self.write_frame(TRACE_FILE, frame)

    def write_particles(self, particles: np.ndarray) -> str:
        particles = np.atleast_2d(particles)
        return self.write_frame(PARTICLES_FILE, pd.DataFrame(particles, columns=particle_columns(particles.shape[1])))

    def write_config_echo(self, text: str) -> str:
        target = self.path(CONFIG_ECHO_FILE)
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
        return target

    def write_summary(self, summary: Dict) -> str:
        target = self.path(SUMMARY_FILE)
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(_json_ready(summary), fh, indent=2, sort_keys=False)
            fh.write("\n")
        return target

    def write_sweep(self, frame: pd.DataFrame) -> str:
        return self.write_frame(SWEEP_FILE, frame)

    def write_export(self, name: str, frame: pd.DataFrame) -> Optional[str]:
        return self.write_frame(f"{name}.csv", frame)


def read_summary(out_dir: str) -> Dict:
    with open(os.path.join(out_dir, SUMMARY_FILE), encoding="utf-8") as fh:
        return json.load(fh)
