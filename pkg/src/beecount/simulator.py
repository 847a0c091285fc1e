"""
Synthetic tunnel sequences with exact ground truth.

Each bee is a filled ellipse sliding along y at a constant pixel velocity.
A pixel belongs to a blob iff its centre ``(x + 0.5, y + 0.5)`` satisfies
``((px - cx) / a)**2 + ((py - cy) / b)**2 <= 1`` with ``a = blob_width / 2``
and ``b = blob_length / 2``. At ``entry_step`` the blob's leading edge sits
on the entry boundary, so without a pause a bee has fully left the region at
``entry_step + ceil((height + blob_length) / velocity)``, which is the step
its crossing is logged.

Noise is uniform integer noise in ``[-noise, +noise]`` drawn from a
generator seeded with ``(seed, step)``, so any frame can be rendered on
its own and reruns are bit-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, GeometryError
from .frames import InDirection, RegionSpec, regions_to_dict, write_pgm
from .tracker import Direction


@dataclass(frozen=True)
class BeeScript:
    entry_step: int
    direction: Direction = Direction.IN
    velocity: float = 12.0
    blob_width: float = 14.0
    blob_length: float = 20.0
    contrast: float = 80.0
    # distance (px) the leading edge trails the entry boundary at entry_step
    lag: float = 0.0
    # (step, duration): position frozen from step to step + duration
    pause: tuple[int, int] | None = None
    # (step, delta): contrast magnitude reduced by delta from step on
    illumination_dip: tuple[int, float] | None = None
    x_center: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.velocity <= 0:
            raise ConfigError("bee velocity must be positive")
        if self.blob_width <= 0 or self.blob_length <= 0:
            raise ConfigError("blob axes must be positive")
        if self.lag < 0:
            raise ConfigError("lag must be non-negative")
        if self.pause is not None:
            object.__setattr__(self, "pause", (int(self.pause[0]), int(self.pause[1])))
            if self.pause[1] < 0:
                raise ConfigError("pause duration must be non-negative")
        if self.illumination_dip is not None:
            object.__setattr__(self, "illumination_dip",
                               (int(self.illumination_dip[0]), float(self.illumination_dip[1])))

    def moving_steps(self, k: int) -> int:
        """Steps of travel completed at step ``k`` (pause steps excluded)."""
        elapsed = k - self.entry_step
        if self.pause is not None:
            p, d = self.pause
            elapsed -= min(max(k - p, 0), d)
        return elapsed

    def front(self, k: int) -> float:
        return self.velocity * self.moving_steps(k) - self.lag

    def contrast_at(self, k: int) -> float:
        if self.illumination_dip is not None and k >= self.illumination_dip[0]:
            delta = self.illumination_dip[1]
            sign = 1.0 if self.contrast >= 0 else -1.0
            return sign * max(abs(self.contrast) - delta, 0.0)
        return self.contrast


@dataclass(frozen=True)
class Scenario:
    width: int = 32
    height: int = 96
    background: float | tuple[float, float] = 60.0
    noise: int = 0
    seed: int = 0
    actors: tuple[BeeScript, ...] = ()
    n_frames: int | None = None
    sections: int = 3
    in_direction: InDirection = InDirection.INCREASING_Y

    def __post_init__(self) -> None:
        object.__setattr__(self, "in_direction", InDirection(self.in_direction))
        object.__setattr__(self, "actors", tuple(self.actors))
        if isinstance(self.background, (list, tuple)):
            object.__setattr__(self, "background", tuple(float(v) for v in self.background))
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("scenario region must be non-empty")
        if self.noise < 0:
            raise ConfigError("noise amplitude must be non-negative")
        for bee in self.actors:
            if bee.blob_width > self.width:
                raise GeometryError(
                    f"blob width {bee.blob_width} exceeds region width {self.width}"
                )

    def travels_increasing_y(self, bee: BeeScript) -> bool:
        return (bee.direction is Direction.IN) == (self.in_direction is InDirection.INCREASING_Y)

    def exit_step(self, bee: BeeScript) -> int:
        """First step at which the blob lies entirely past the exit boundary."""
        needed = self.height + bee.blob_length + bee.lag
        k = bee.entry_step + math.ceil(needed / bee.velocity - 1e-12)
        if bee.pause is not None:
            # a pause only delays the exit, so the unpaused step is a lower bound
            while bee.front(k) - bee.blob_length < self.height:
                k += 1
        return k

    def frame_count(self) -> int:
        if self.n_frames is not None:
            return self.n_frames
        if not self.actors:
            return 20
        return max(self.exit_step(b) for b in self.actors) + 5

    def region(self, tunnel_id: int = 0) -> RegionSpec:
        return RegionSpec(tunnel_id, 0, 0, self.width, self.height, self.sections,
                          self.in_direction)

    def background_grid(self) -> np.ndarray:
        if isinstance(self.background, tuple):
            top, bottom = self.background
            ramp = np.linspace(top, bottom, self.height) if self.height > 1 else np.array([top])
            return np.repeat(ramp[:, None], self.width, axis=1)
        return np.full((self.height, self.width), float(self.background))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["in_direction"] = self.in_direction.value
        doc["background"] = list(self.background) if isinstance(self.background, tuple) \
            else self.background
        doc["actors"] = [
            {**asdict(b), "direction": b.direction.value} for b in self.actors
        ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        doc = dict(doc)
        try:
            actors = tuple(BeeScript(**a) for a in doc.pop("actors", ()))
            return cls(actors=actors, **doc)
        except TypeError as exc:
            raise ConfigError(f"bad scenario: {exc}") from exc


@dataclass(frozen=True)
class GroundTruthLog:
    entries: tuple[tuple[int, Direction], ...] = ()

    @property
    def counts(self) -> tuple[int, int]:
        n_in = sum(1 for _, d in self.entries if d is Direction.IN)
        return n_in, len(self.entries) - n_in

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "direction"])
            for step, direction in self.entries:
                writer.writerow([step, direction.value])


def blob_mask(width: int, height: int, cx: float, cy: float,
              semi_x: float, semi_y: float) -> np.ndarray:
    """Pixel-centre rasterisation of an axis-aligned ellipse, clipped to the grid."""
    xs = (np.arange(width) + 0.5 - cx) / semi_x
    ys = (np.arange(height) + 0.5 - cy) / semi_y
    return ys[:, None] ** 2 + xs[None, :] ** 2 <= 1.0


def blob_centre(scenario: Scenario, bee: BeeScript, k: int) -> tuple[float, float]:
    along = bee.front(k) - bee.blob_length / 2
    cy = along if scenario.travels_increasing_y(bee) else scenario.height - along
    cx = scenario.width / 2 if bee.x_center is None else bee.x_center
    return cx, cy


def render_frame(scenario: Scenario, k: int, background: np.ndarray | None = None) -> np.ndarray:
    bg = scenario.background_grid() if background is None else background
    img = bg.copy()
    for bee in scenario.actors:
        front = bee.front(k)
        if front <= 0 or front - bee.blob_length >= scenario.height:
            continue
        cx, cy = blob_centre(scenario, bee, k)
        mask = blob_mask(scenario.width, scenario.height, cx, cy,
                         bee.blob_width / 2, bee.blob_length / 2)
        img[mask] = bg[mask] + bee.contrast_at(k)
    if scenario.noise:
        rng = np.random.default_rng([scenario.seed, k])
        img = img + rng.integers(-scenario.noise, scenario.noise + 1, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render(scenario: Scenario) -> tuple[list[np.ndarray], GroundTruthLog]:
    n = scenario.frame_count()
    bg = scenario.background_grid()
    frames = [render_frame(scenario, k, bg) for k in range(n)]
    entries = sorted(
        (scenario.exit_step(bee), bee.direction)
        for bee in scenario.actors
        if scenario.exit_step(bee) < n
    )
    return frames, GroundTruthLog(tuple(entries))


def write_scenario(scenario: Scenario, out_dir: str | Path) -> GroundTruthLog:
    """Write ``frames/NNNNN.pgm``, ``ground_truth.csv``, ``tunnels.json`` and ``scenario.json``."""
    out_dir = Path(out_dir)
    frame_dir = out_dir / "frames"
    frame_dir.mkdir(parents=True, exist_ok=True)
    frames, log = render(scenario)
    for k, pixels in enumerate(frames):
        write_pgm(frame_dir / f"{k:05d}.pgm", pixels)
    log.write_csv(out_dir / "ground_truth.csv")
    (out_dir / "tunnels.json").write_text(
        json.dumps(regions_to_dict([scenario.region()]), indent=2) + "\n", encoding="utf-8")
    (out_dir / "scenario.json").write_text(
        json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")
    return log


def tile_horizontally(scenarios: Sequence[Scenario], k: int) -> np.ndarray:
    return np.concatenate([render_frame(s, k) for s in scenarios], axis=1)


BASE = Scenario(width=32, height=96, background=60.0, noise=8, sections=3)
_BEE = BeeScript(entry_step=3)


def scenario_suite(seed: int = 0) -> dict[str, Scenario]:
    """The canonical scenarios; ``seed`` drives the noise only."""
    base = replace(BASE, seed=seed)
    bee = _BEE
    # front reaches mid-tunnel (centre at y = 48) after 5 moving steps
    mid = bee.entry_step + 5
    return {
        "single-in": replace(base, actors=(bee,)),
        "single-out": replace(base, actors=(replace(bee, direction=Direction.OUT),)),
        "alternating": replace(base, actors=tuple(
            replace(bee, entry_step=3 + 30 * i,
                    direction=Direction.IN if i % 2 == 0 else Direction.OUT)
            for i in range(4)
        )),
        "cluster-pair": replace(base, actors=(
            bee, replace(bee, lag=bee.blob_length),
        )),
        "mid-tunnel-pause": replace(base, actors=(replace(bee, pause=(mid, 20)),)),
        "illumination-dip": replace(base, actors=(
            replace(bee, illumination_dip=(mid, 70.0)),
        )),
        "high-noise-idle": replace(base, noise=12, n_frames=60),
    }


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON file; ``{"suite": name, "seed": s}`` selects a canonical one."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if "suite" in doc:
        suite = scenario_suite(int(doc.get("seed", 0)))
        if doc["suite"] not in suite:
            raise ConfigError(f"unknown suite scenario {doc['suite']!r}")
        return suite[doc["suite"]]
    return Scenario.from_dict(doc)
