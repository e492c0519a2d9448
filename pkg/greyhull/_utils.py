from __future__ import annotations
import numpy as np
from numpy.typing import ArrayLike

from ._const import FLOAT_FORMAT

_TWO_PI = 2 * np.pi


def wrap_angle(angle: ArrayLike) -> np.ndarray:
    """Map angles to (-pi, pi]. Values already in range are returned untouched."""
    a = np.asarray(angle, dtype=np.float64)
    inside = (a > -np.pi) & (a <= np.pi)
    wrapped = np.pi - np.mod(np.pi - a, _TWO_PI)
    return np.where(inside, a, wrapped)


def clamp_toward(current: ArrayLike, target: ArrayLike, max_change: float) -> np.ndarray:
    """Move ``current`` toward ``target`` by at most ``max_change``."""
    current = np.asarray(current, dtype=np.float64)
    return current + np.clip(np.asarray(target) - current, -max_change, max_change)


def fmt(value: float) -> str:
    return FLOAT_FORMAT % value
