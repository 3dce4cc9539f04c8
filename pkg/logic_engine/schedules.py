# File: logic_engine/schedules.py
# Tujuan: Jadwal step size untuk update partikel: konstan, atau varian AdaGrad
# dengan akumulator kuadrat gradien yang meluruh per koordinat.

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from core.errors import ParameterError

logger = logging.getLogger(__name__)


class ScheduleKind(str, Enum):
    FIXED = "fixed"
    ADAGRAD = "adagrad"


@dataclass
class StepSchedule:
    """
    Attributes:
        kind (ScheduleKind): "fixed" atau "adagrad".
        gamma (float): Step size dasar γ.
        alpha (float): Peluruhan akumulator AdaGrad, di (0, 1].
        fudge (float): ε_f pada penyebut AdaGrad.
        accumulator (np.ndarray, optional): Akumulator M x d; None sebelum panggilan pertama.
    """

    kind: ScheduleKind = ScheduleKind.FIXED
    gamma: float = 1.0
    alpha: float = 0.9
    fudge: float = 1e-6
    accumulator: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = ScheduleKind(self.kind)
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ParameterError(f"gamma harus finite dan >= 0, didapat {self.gamma}.")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"adagrad alpha harus di (0, 1], didapat {self.alpha}.")
        if not self.fudge > 0:
            raise ParameterError(f"adagrad fudge harus > 0, didapat {self.fudge}.")

    @classmethod
    def fixed(cls, gamma: float) -> "StepSchedule":
        return cls(ScheduleKind.FIXED, gamma)

    @classmethod
    def adagrad(cls, gamma: float, alpha: float = 0.9, fudge: float = 1e-6) -> "StepSchedule":
        return cls(ScheduleKind.ADAGRAD, gamma, alpha, fudge)

    def step_sizes(self, direction: np.ndarray) -> Union[float, np.ndarray]:
        """Step size untuk arah update ini; AdaGrad memperbarui akumulatornya."""
        if self.kind is ScheduleKind.FIXED:
            return self.gamma
        return adagrad_scale(self, direction)

    def permute(self, order) -> None:
        """Mengikuti permutasi partikel pada akumulator."""
        if self.accumulator is not None:
            self.accumulator = self.accumulator[np.asarray(order)]


def adagrad_scale(schedule: StepSchedule, direction: np.ndarray) -> np.ndarray:
    """
    Skala per koordinat γ / (ε_f + sqrt(acc)).

    Panggilan pertama: acc = g². Selanjutnya: acc ← α acc + (1 - α) g².
    """
    if schedule.kind is not ScheduleKind.ADAGRAD:
        raise ParameterError("adagrad_scale hanya untuk jadwal AdaGrad.")
    direction = np.asarray(direction, dtype=np.float64)
    squared = direction * direction
    if schedule.accumulator is None:
        schedule.accumulator = squared
    else:
        if schedule.accumulator.shape != direction.shape:
            raise ParameterError(
                f"Bentuk arah {direction.shape} tidak cocok dengan akumulator {schedule.accumulator.shape}."
            )
        schedule.accumulator = schedule.alpha * schedule.accumulator + (1.0 - schedule.alpha) * squared
    return schedule.gamma / (schedule.fudge + np.sqrt(schedule.accumulator))
