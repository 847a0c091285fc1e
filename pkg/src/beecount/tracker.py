"""
Track-list crossing counter.

Every section keeps its own list of tracks. An arrival opens a track, a
departure validates the oldest open track of that section, and once all
sections hold a validated track one crossing is counted and one validated
track is consumed from each section. Tracks older than ``k_max`` steps are
dropped whether validated or not.

Direction comes from the birth steps of the validated tracks at the two
edge sections: a bee reaches the entrance edge before the exit edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .frames import InDirection
from .motion import ARRIVAL, DEPARTURE

log = logging.getLogger(__name__)


class Direction(str, Enum):
    IN = "in"
    OUT = "out"


@dataclass
class Track:
    section: int
    birth_step: int
    validated: bool = False
    validation_step: int | None = None

    def age(self, step: int) -> int:
        return step - self.birth_step


@dataclass(frozen=True)
class CrossingEvent:
    tunnel_id: int
    frame_step: int
    direction: Direction
    # edge births and the least-squares slope were all tied
    ambiguous: bool = False


@dataclass
class TunnelCounterState:
    n_sections: int
    tracks: list[list[Track]] = field(default_factory=list)
    in_count: int = 0
    out_count: int = 0
    current_step: int = -1
    previous_classes: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.tracks:
            self.tracks = [[] for _ in range(self.n_sections)]


class TunnelCounter:
    """Crossing counter for one tunnel.

    With ``merge_runs`` (default) a run of consecutive +1 classes in a
    section is one arrival and a run of -1 classes one departure; a bee
    entering a band over several frames then opens a single track. With it
    off, every +1/-1 step acts individually.
    """

    def __init__(self, n_sections: int, k_max: int, tunnel_id: int = 0,
                 in_direction: InDirection | str = InDirection.INCREASING_Y,
                 merge_runs: bool = True, skip_first_step: bool = True):
        if n_sections < 2:
            raise ConfigError("tracker needs at least 2 sections")
        if k_max < 1:
            raise ConfigError("k_max must be >= 1")
        self.n_sections = n_sections
        self.k_max = k_max
        self.tunnel_id = tunnel_id
        self.in_direction = InDirection(in_direction)
        self.merge_runs = merge_runs
        self.skip_first_step = skip_first_step
        self.state = TunnelCounterState(n_sections)

    @property
    def in_count(self) -> int:
        return self.state.in_count

    @property
    def out_count(self) -> int:
        return self.state.out_count

    def max_track_age(self) -> int:
        ages = [t.age(self.state.current_step) for sec in self.state.tracks for t in sec]
        return max(ages, default=0)

    def ingest_step(self, classes: Sequence[int], k: int) -> list[CrossingEvent]:
        classes = np.asarray(classes, dtype=np.int8)
        if classes.shape != (self.n_sections,):
            raise ValueError(f"expected {self.n_sections} classes, got shape {classes.shape}")
        if k <= self.state.current_step:
            raise ValueError(f"step {k} is not after {self.state.current_step}")
        state = self.state
        state.current_step = k

        if self.skip_first_step and k == 0:
            # derivative at step 0 is taken against zero
            return []

        for sec in state.tracks:
            sec[:] = [t for t in sec if k - t.birth_step <= self.k_max]

        prev = state.previous_classes
        if self.merge_runs and prev is not None:
            arrivals = (classes == ARRIVAL) & (prev != ARRIVAL)
            departures = (classes == DEPARTURE) & (prev != DEPARTURE)
        else:
            arrivals = classes == ARRIVAL
            departures = classes == DEPARTURE
        state.previous_classes = classes.copy()

        for n in np.flatnonzero(arrivals):
            state.tracks[n].append(Track(int(n), k))
        for n in np.flatnonzero(departures):
            open_track = next((t for t in state.tracks[n] if not t.validated), None)
            if open_track is None:
                log.debug("tunnel %s step %d: departure in section %d without open track",
                          self.tunnel_id, k, n)
                continue
            open_track.validated = True
            open_track.validation_step = k

        events = []
        while all(any(t.validated for t in sec) for sec in state.tracks):
            chosen = [next(t for t in sec if t.validated) for sec in state.tracks]
            direction, ambiguous = self._direction([t.birth_step for t in chosen])
            if direction is Direction.IN:
                state.in_count += 1
            else:
                state.out_count += 1
            for n, track in enumerate(chosen):
                state.tracks[n] = [t for t in state.tracks[n] if t is not track]
            events.append(CrossingEvent(self.tunnel_id, k, direction, ambiguous))
        return events

    def _direction(self, births: list[int]) -> tuple[Direction, bool]:
        # births ordered by section index; section 0 is the low-y edge
        if self.in_direction is InDirection.INCREASING_Y:
            entrance, exit_ = births[0], births[-1]
            slope_sign = 1.0
        else:
            entrance, exit_ = births[-1], births[0]
            slope_sign = -1.0
        if entrance != exit_:
            return (Direction.IN if entrance < exit_ else Direction.OUT), False
        idx = np.arange(len(births), dtype=np.float64)
        b = np.asarray(births, dtype=np.float64)
        slope = float(np.dot(idx - idx.mean(), b - b.mean())) * slope_sign
        if slope > 0:
            return Direction.IN, False
        if slope < 0:
            return Direction.OUT, False
        log.warning("tunnel %s: direction tie at step %d, counted as in",
                    self.tunnel_id, self.state.current_step)
        return Direction.IN, True

    def finalize(self) -> tuple[int, int]:
        return self.state.in_count, self.state.out_count
