"""Per-tunnel motion pipeline and multi-tunnel sequence processing."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .background import BackgroundTracker, MotionConfig
from .errors import ConfigError, DataError, GeometryError
from .frames import Frame, RegionSpec, regions_from_dict
from .motion import MotionSignal, SectionActivity
from .tracker import CrossingEvent, TunnelCounter


class TunnelPipeline:
    """Background model, motion signal and counter for one tunnel region."""

    def __init__(self, region: RegionSpec, config: MotionConfig,
                 background: np.ndarray | None = None, record_signal: bool = False):
        self.region = region
        self.config = config
        self.background = BackgroundTracker(config, (region.height, region.width))
        if background is not None:
            self.background.reset(background)
        self.signal = MotionSignal(region.sections, config.t3, config.ratio_norm,
                                   config.smoothing)
        self.counter = TunnelCounter(region.sections, config.k_max, region.tunnel_id,
                                     region.in_direction)
        self.record_signal = record_signal
        self.signal_rows: list[tuple] = []
        self.events: list[CrossingEvent] = []
        self._y = slice(region.origin_y, region.origin_y + region.height)
        self._x = slice(region.origin_x, region.origin_x + region.width)

    def step_full(self, pixels: np.ndarray, k: int) -> list[CrossingEvent]:
        """Process the tunnel's part of a whole frame."""
        return self.step(pixels[self._y, self._x], k)

    def step(self, region_pixels: np.ndarray, k: int) -> list[CrossingEvent]:
        mask, _, _ = self.background.step(region_pixels)
        activity = self.signal.step(mask, k)
        if self.record_signal:
            self._record(activity)
        events = self.counter.ingest_step(activity.classes, k)
        self.events.extend(events)
        return events

    def _record(self, activity: SectionActivity) -> None:
        tid = self.region.tunnel_id
        for n in range(self.region.sections):
            self.signal_rows.append((activity.step, tid, n, float(activity.ratios[n]),
                                     float(activity.derivatives[n]),
                                     int(activity.classes[n])))

    @property
    def model(self) -> np.ndarray | None:
        return self.background.model


@dataclass
class SequenceResult:
    events: list[CrossingEvent]
    counts: dict[int, tuple[int, int]]
    signal_rows: list[tuple] = field(default_factory=list)
    models: dict[int, np.ndarray] = field(default_factory=dict)
    n_frames: int = 0


def _as_pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.uint8)


def check_regions(regions: Sequence[RegionSpec], width: int, height: int) -> None:
    for r in regions:
        if not r.fits(width, height):
            raise GeometryError(
                f"tunnel {r.tunnel_id} ({r.origin_x},{r.origin_y},{r.width}x{r.height}) "
                f"exceeds frame {width}x{height}"
            )


def process_sequence(frames: Iterable, regions: Sequence[RegionSpec], config: MotionConfig,
                     parallel: bool = False, record_signal: bool = False,
                     background: np.ndarray | None = None,
                     max_workers: int | None = None) -> SequenceResult:
    """Run every tunnel over the whole sequence.

    ``frames`` yields whole frames (``Frame`` or 2-D uint8 arrays); the
    position in the iterable is the time step. With ``parallel`` the
    tunnels run concurrently over a preloaded frame list; results are the
    same as sequential mode because tunnels share no state.
    """
    if not regions:
        raise ConfigError("no tunnels configured")
    pixels = [_as_pixels(f) for f in frames]
    if len(pixels) < 2:
        raise DataError("sequence too short: need at least 2 frames")
    height, width = pixels[0].shape
    for k, p in enumerate(pixels):
        if p.shape != (height, width):
            raise DataError(f"frame {k} has shape {p.shape}, expected {(height, width)}")
    check_regions(regions, width, height)
    if background is not None and background.shape != (height, width):
        raise GeometryError("background frame does not match the sequence frame size")

    def make(region: RegionSpec) -> TunnelPipeline:
        bg = None
        if background is not None:
            bg = background[region.origin_y:region.origin_y + region.height,
                            region.origin_x:region.origin_x + region.width]
        return TunnelPipeline(region, config, bg, record_signal)

    pipelines = [make(r) for r in regions]

    def run(pipe: TunnelPipeline) -> TunnelPipeline:
        for k, p in enumerate(pixels):
            pipe.step_full(p, k)
        return pipe

    if parallel and len(pipelines) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(run, pipelines))
    else:
        # frame-major order, as a live system would process it
        for k, p in enumerate(pixels):
            for pipe in pipelines:
                pipe.step_full(p, k)

    events = sorted((ev for pipe in pipelines for ev in pipe.events),
                    key=lambda ev: (ev.frame_step, ev.tunnel_id))
    rows = sorted((row for pipe in pipelines for row in pipe.signal_rows),
                  key=lambda row: (row[0], row[1], row[2]))
    return SequenceResult(
        events=events,
        counts={pipe.region.tunnel_id: pipe.counter.finalize() for pipe in pipelines},
        signal_rows=rows,
        models={pipe.region.tunnel_id: pipe.model for pipe in pipelines},
        n_frames=len(pixels),
    )


def load_run_config(path: str | Path) -> tuple[list[RegionSpec], MotionConfig]:
    """Tunnel JSON with an optional ``"motion"`` object of MotionConfig keys."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read tunnel configuration {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("tunnel configuration must be a JSON object")
    config = MotionConfig.from_dict(doc.get("motion", {}))
    defaults = {"sections": config.sections}
    for entry in doc.get("tunnels", []) or []:
        if isinstance(entry, dict):
            for key, value in defaults.items():
                entry.setdefault(key, value)
    return regions_from_dict(doc), config
