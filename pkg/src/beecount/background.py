"""
Adaptive background model and frame-level dynamic flags.

The model is a float grid the size of one tunnel region. Each step two
masks are formed with the same strict threshold T1: against the previous
frame (scene motion, D1) and against the model (deviation from the known
background, D2). A flag is raised when its mask has more than T2 set
pixels. The model is blended toward the frame with learning rate alpha
only when the update rule allows it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, GeometryError
from .frames import Frame


class UpdateRule(str, Enum):
    # update only while the scene is static in time and versus the model
    STATIC_STATIC = "static_static"
    # update only while both flags are raised (literal reading of the guard)
    LITERAL_EQ6 = "literal_eq6"


class RatioNorm(str, Enum):
    SECTION = "section"
    REGION = "region"


@dataclass(frozen=True)
class MotionConfig:
    """Tuning parameters of the motion pipeline.

    ``t2=None`` means ``ceil(t2_fraction * region area)``, resolved per
    tunnel by :meth:`pixel_threshold`.
    """

    t1: float = 25
    t2: int | None = None
    t3: float = 0.05
    alpha: float = 0.05
    sections: int = 3
    k_max: int = 15
    t2_fraction: float = 0.02
    update_rule: UpdateRule = UpdateRule.STATIC_STATIC
    ratio_norm: RatioNorm = RatioNorm.SECTION
    smoothing: int = 1

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "update_rule", UpdateRule(self.update_rule))
            object.__setattr__(self, "ratio_norm", RatioNorm(self.ratio_norm))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 1 <= self.t1 <= 255:
            raise ConfigError(f"t1 must be in [1, 255], got {self.t1}")
        if self.t2 is not None and self.t2 < 1:
            raise ConfigError(f"t2 must be >= 1, got {self.t2}")
        if not 0 < self.t3 < 1:
            raise ConfigError(f"t3 must be in (0, 1), got {self.t3}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.sections < 2:
            raise ConfigError(f"sections must be >= 2, got {self.sections}")
        if self.k_max < 1:
            raise ConfigError(f"k_max must be >= 1, got {self.k_max}")
        if not 0 < self.t2_fraction <= 1:
            raise ConfigError(f"t2_fraction must be in (0, 1], got {self.t2_fraction}")
        if self.smoothing < 1:
            raise ConfigError(f"smoothing window must be >= 1, got {self.smoothing}")

    def pixel_threshold(self, area: int) -> int:
        if self.t2 is not None:
            return int(self.t2)
        return max(1, math.ceil(self.t2_fraction * area - 1e-9))

    @classmethod
    def from_dict(cls, doc: dict) -> "MotionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown motion parameters: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["update_rule"] = self.update_rule.value
        out["ratio_norm"] = self.ratio_norm.value
        return out

    def with_overrides(self, **overrides) -> "MotionConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        try:
            return replace(self, **overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _as_grid(x) -> np.ndarray:
    return x.pixels if isinstance(x, Frame) else np.asarray(x)


@dataclass
class BackgroundModel:
    model: np.ndarray | None = None

    @property
    def initialized(self) -> bool:
        return self.model is not None

    @property
    def shape(self) -> tuple[int, int]:
        if self.model is None:
            raise ValueError("background model not initialized")
        return self.model.shape


def init_model(frame: Frame | np.ndarray, shape: tuple[int, int] | None = None) -> BackgroundModel:
    """Start the model as an exact copy of ``frame`` (first frame or a captured empty scene)."""
    grid = _as_grid(frame)
    if shape is not None and tuple(grid.shape) != tuple(shape):
        raise GeometryError(f"frame shape {grid.shape} does not match region shape {shape}")
    return BackgroundModel(grid.astype(np.float64))


def threshold_diff(a, b, t1: float) -> np.ndarray:
    """Binary mask, 1 where ``|a - b| > t1``."""
    a, b = _as_grid(a), _as_grid(b)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a.astype(np.float64) - b)
    return (diff > t1).astype(np.uint8)


def dynamic_flag(mask: np.ndarray, t2: int) -> bool:
    return int(np.count_nonzero(mask)) > t2


def blend(model: np.ndarray, frame: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha * frame + (1 - alpha) * model`` evaluated as ``m + alpha * (f - m)``.

    This form leaves pixels where frame equals model exactly unchanged.
    """
    if alpha == 1:
        return frame.astype(np.float64)
    return model + alpha * (frame - model)


def update_allowed(scene_dynamic: bool, model_dynamic: bool,
                   rule: UpdateRule = UpdateRule.STATIC_STATIC) -> bool:
    if rule is UpdateRule.LITERAL_EQ6:
        return scene_dynamic and model_dynamic
    return not scene_dynamic and not model_dynamic


def update_model(model: BackgroundModel, frame, scene_dynamic: bool, model_dynamic: bool,
                 alpha: float, rule: UpdateRule = UpdateRule.STATIC_STATIC) -> BackgroundModel:
    """Return the post-step model; the input model is left untouched."""
    grid = _as_grid(frame)
    if grid.shape != model.shape:
        raise GeometryError(f"frame shape {grid.shape} does not match model {model.shape}")
    if not 0 <= alpha <= 1:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    if not update_allowed(scene_dynamic, model_dynamic, UpdateRule(rule)):
        return BackgroundModel(model.model.copy())
    return BackgroundModel(blend(model.model, grid, alpha))


class BackgroundStep(NamedTuple):
    model: BackgroundModel
    scene_dynamic: bool
    model_dynamic: bool
    model_mask: np.ndarray


def step_background(model: BackgroundModel, frame, previous_frame,
                    config: MotionConfig) -> BackgroundStep:
    """One full time step: both flags against the pre-update model, then the update.

    ``model_mask`` is the ``|f - m| > T1`` mask and is what the motion
    signal is computed from.
    """
    grid = _as_grid(frame)
    t2 = config.pixel_threshold(grid.size)
    scene_mask = threshold_diff(grid, previous_frame, config.t1)
    model_mask = threshold_diff(grid, model.model, config.t1)
    d1 = dynamic_flag(scene_mask, t2)
    d2 = dynamic_flag(model_mask, t2)
    new_model = update_model(model, grid, d1, d2, config.alpha, config.update_rule)
    return BackgroundStep(new_model, d1, d2, model_mask)


class BackgroundTracker:
    """Stateful per-tunnel wrapper used by the pipeline hot loop.

    Same arithmetic as :func:`step_background`, bit for bit, but keeps the
    previous frame and the difference buffers alive between calls.
    """

    def __init__(self, config: MotionConfig, shape: tuple[int, int]):
        self.config = config
        self.shape = tuple(shape)
        self.t1 = float(config.t1)
        self.t2 = config.pixel_threshold(self.shape[0] * self.shape[1])
        self.alpha = float(config.alpha)
        self.rule = config.update_rule
        self.model: np.ndarray | None = None
        self._prev: np.ndarray | None = None
        self._work = np.empty(self.shape, dtype=np.float64)
        self._scratch = np.empty(self.shape, dtype=np.int16)

    def reset(self, background: np.ndarray | None = None) -> None:
        self.model = None if background is None else np.asarray(background, dtype=np.float64).copy()
        self._prev = None

    def step(self, pixels: np.ndarray) -> tuple[np.ndarray, bool, bool]:
        """Feed one region grid; return (model mask as bool, D1, D2)."""
        if pixels.shape != self.shape:
            raise GeometryError(f"frame shape {pixels.shape} does not match region {self.shape}")
        if self.model is None:
            self.model = pixels.astype(np.float64)
            self._prev = pixels.copy()
            return np.zeros(self.shape, dtype=bool), False, False
        if self._prev is None:
            self._prev = pixels.copy()

        np.subtract(pixels, self._prev, out=self._scratch, dtype=np.int16)
        np.abs(self._scratch, out=self._scratch)
        d1 = int(np.count_nonzero(self._scratch > self.t1)) > self.t2

        np.subtract(pixels, self.model, out=self._work)
        np.abs(self._work, out=self._work)
        mask = self._work > self.t1
        d2 = int(np.count_nonzero(mask)) > self.t2

        if update_allowed(d1, d2, self.rule):
            self.model = blend(self.model, pixels, self.alpha)
        self._prev[...] = pixels
        return mask, d1, d2
