"""
Sectioned motion-activity signal.

A region mask is cut into N equal horizontal bands along y. The fraction
of set pixels in each band is the activity ratio; its first difference in
time is thresholded into arrival (+1), idle (0) and departure (-1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .background import RatioNorm
from .errors import ConfigError, GeometryError

ARRIVAL = 1
IDLE = 0
DEPARTURE = -1


@dataclass(frozen=True)
class SectionActivity:
    step: int
    ratios: np.ndarray
    derivatives: np.ndarray
    classes: np.ndarray


def split_sections(mask: np.ndarray, n_sections: int) -> list[np.ndarray]:
    """Bands of ``height // n_sections`` rows each; leftover bottom rows are dropped."""
    mask = np.asarray(mask)
    height = mask.shape[0]
    if n_sections < 1 or n_sections > height:
        raise GeometryError(f"cannot split {height} rows into {n_sections} sections")
    rows = height // n_sections
    return [mask[n * rows:(n + 1) * rows] for n in range(n_sections)]


def activity_ratio(section_mask: np.ndarray, denominator: int | None = None) -> float:
    """Set-pixel fraction of one band (or of ``denominator`` pixels when given)."""
    section_mask = np.asarray(section_mask)
    size = section_mask.size if denominator is None else denominator
    if size == 0:
        raise GeometryError("empty section")
    return np.count_nonzero(section_mask) / size


def section_ratios(mask: np.ndarray, n_sections: int,
                   norm: RatioNorm = RatioNorm.SECTION) -> np.ndarray:
    """Vectorised ``activity_ratio`` over all bands of ``mask``."""
    height, width = mask.shape
    if n_sections < 1 or n_sections > height:
        raise GeometryError(f"cannot split {height} rows into {n_sections} sections")
    rows = height // n_sections
    counts = np.count_nonzero(
        mask[:rows * n_sections].reshape(n_sections, rows * width), axis=1
    )
    denom = rows * width if RatioNorm(norm) is RatioNorm.SECTION else height * width
    return counts / denom


def differentiate(current, previous=None) -> np.ndarray:
    current = np.asarray(current, dtype=np.float64)
    if previous is None:
        return current.copy()
    previous = np.asarray(previous, dtype=np.float64)
    if current.shape != previous.shape:
        raise ValueError(f"length mismatch {current.shape} vs {previous.shape}")
    return current - previous


def classify_step(derivatives, t3: float) -> np.ndarray:
    if not 0 < t3 < 1:
        raise ConfigError(f"t3 must be in (0, 1), got {t3}")
    dr = np.asarray(derivatives, dtype=np.float64)
    classes = np.zeros(dr.shape, dtype=np.int8)
    classes[dr > t3] = ARRIVAL
    classes[dr < -t3] = DEPARTURE
    return classes


class MotionSignal:
    """Per-tunnel state holding the previous ratios (and the optional box filter)."""

    def __init__(self, n_sections: int, t3: float, norm: RatioNorm = RatioNorm.SECTION,
                 smoothing: int = 1):
        if not 0 < t3 < 1:
            raise ConfigError(f"t3 must be in (0, 1), got {t3}")
        self.n_sections = n_sections
        self.t3 = t3
        self.norm = RatioNorm(norm)
        self.smoothing = smoothing
        self._previous: np.ndarray | None = None
        self._window: deque[np.ndarray] = deque(maxlen=smoothing)

    def reset(self) -> None:
        self._previous = None
        self._window.clear()

    def step(self, mask: np.ndarray, k: int) -> SectionActivity:
        ratios = section_ratios(mask, self.n_sections, self.norm)
        if self.smoothing > 1:
            self._window.append(ratios)
            ratios = np.mean(self._window, axis=0)
        derivatives = differentiate(ratios, self._previous)
        self._previous = ratios
        return SectionActivity(k, ratios, derivatives, classify_step(derivatives, self.t3))
