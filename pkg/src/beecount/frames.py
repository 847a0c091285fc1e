"""
Frame sequences and tunnel regions.

Frames are 8-bit grayscale grids stored row-major as ``(height, width)``
numpy arrays; ``pixels[y, x]`` is the intensity at column x, row y. The y
axis is the tunnel travel axis.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, FrameError, GeometryError

SUPPORTED_SUFFIXES = (".png", ".pgm", ".ppm")
DEFAULT_FPS = 5.0


@dataclass(frozen=True)
class Frame:
    """One grayscale image at time step ``index``."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
            raise GeometryError(f"frame must be a non-empty 2-D grid, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.min() < 0 or pixels.max() > 255:
                raise ValueError("frame intensities must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        if self.index < 0:
            raise ValueError(f"frame index must be non-negative, got {self.index}")
        if pixels.flags.writeable:
            pixels = pixels.copy()
            pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


class InDirection(str, Enum):
    """Which physical travel direction along y counts as "in"."""

    INCREASING_Y = "increasing_y"
    DECREASING_Y = "decreasing_y"


@dataclass(frozen=True)
class RegionSpec:
    """Rectangle of one tunnel inside the full frame, split into ``sections`` along y."""

    tunnel_id: int
    origin_x: int
    origin_y: int
    width: int
    height: int
    sections: int = 3
    in_direction: InDirection = InDirection.INCREASING_Y

    def __post_init__(self) -> None:
        object.__setattr__(self, "in_direction", InDirection(self.in_direction))
        if self.origin_x < 0 or self.origin_y < 0:
            raise GeometryError(f"tunnel {self.tunnel_id}: negative origin")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"tunnel {self.tunnel_id}: width and height must be positive")
        if self.sections < 2:
            raise GeometryError(
                f"tunnel {self.tunnel_id}: need at least 2 sections to decide direction"
            )
        if self.height < self.sections:
            raise GeometryError(
                f"tunnel {self.tunnel_id}: height {self.height} < sections {self.sections}"
            )

    @property
    def area(self) -> int:
        return self.width * self.height

    def fits(self, frame_width: int, frame_height: int) -> bool:
        return (
            self.origin_x + self.width <= frame_width
            and self.origin_y + self.height <= frame_height
        )

    @classmethod
    def full_frame(cls, width: int, height: int, **kwargs) -> "RegionSpec":
        return cls(tunnel_id=kwargs.pop("tunnel_id", 0), origin_x=0, origin_y=0,
                   width=width, height=height, **kwargs)


@dataclass(frozen=True)
class SequenceManifest:
    """Ordered frame files; the position in ``paths`` is the time step."""

    paths: tuple[Path, ...]
    fps: float = DEFAULT_FPS

    def __post_init__(self) -> None:
        if not self.paths:
            raise FrameError("no frames")
        object.__setattr__(self, "paths", tuple(Path(p) for p in self.paths))
        if self.fps <= 0:
            raise ValueError("frame rate must be positive")

    def __len__(self) -> int:
        return len(self.paths)

    def frames(self) -> Iterator[Frame]:
        for k, path in enumerate(self.paths):
            yield read_frame(path, k)


def _natural_key(name: str) -> list:
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", name)]


def load_sequence(directory: str | Path, ordering_rule: str = "lexicographic",
                  fps: float = DEFAULT_FPS) -> SequenceManifest:
    """List the image files of ``directory`` as an ordered manifest.

    ``ordering_rule`` is ``"lexicographic"`` (plain filename sort, the
    default) or ``"natural"`` (digit runs compared numerically, so
    ``10.pgm`` sorts after ``9.pgm``). Gaps in numbering are ignored: the
    k-th file in order is time step k.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameError(f"not a directory: {directory}")
    files = [p for p in directory.iterdir()
             if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES]
    if not files:
        raise FrameError(f"no frames in {directory}")
    if ordering_rule == "lexicographic":
        files.sort(key=lambda p: p.name)
    elif ordering_rule == "natural":
        files.sort(key=lambda p: _natural_key(p.name))
    else:
        raise ConfigError(f"unknown ordering rule {ordering_rule!r}")
    return SequenceManifest(tuple(files), fps)


def load_manifest_file(path: str | Path, fps: float = DEFAULT_FPS) -> SequenceManifest:
    """Read a text manifest with one frame path per line (relative to the manifest)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FrameError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    paths = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        paths.append(p if p.is_absolute() else base / p)
    if not paths:
        raise FrameError(f"no frames listed in {path}")
    return SequenceManifest(tuple(paths), fps)


def to_grayscale(data: np.ndarray) -> np.ndarray:
    """Collapse colour channels by unweighted average; alpha is dropped."""
    if data.ndim == 2:
        gray = data
    elif data.ndim == 3:
        channels = data[..., :3] if data.shape[2] >= 3 else data[..., :1]
        gray = np.rint(channels.astype(np.float64).mean(axis=2))
    else:
        raise ValueError(f"unsupported image array shape {data.shape}")
    if gray.dtype != np.uint8:
        gray = np.clip(gray, 0, 255).astype(np.uint8)
    return gray


def read_frame(path: str | Path, index: int = 0) -> Frame:
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("RGB", "RGBA", "L", "LA", "P"):
                if img.mode == "P":
                    img = img.convert("RGB")
                data = np.asarray(img)
            elif img.mode in ("I;16", "I;16B", "I"):
                raise FrameError(f"{path}: only 8-bit images are supported (mode {img.mode})")
            else:
                data = np.asarray(img.convert("RGB"))
    except FrameError:
        raise
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise FrameError(f"cannot read frame {path}: {exc}") from exc
    if data.ndim == 3 and data.shape[2] == 2:  # LA
        data = data[..., 0]
    return Frame(to_grayscale(data), index)


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Write a binary (P5) 8-bit PGM file."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def extract_region(frame: Frame, region: RegionSpec) -> Frame:
    """Crop the tunnel rectangle; the result keeps the frame index."""
    if not region.fits(frame.width, frame.height):
        raise GeometryError(
            f"tunnel {region.tunnel_id} ({region.origin_x},{region.origin_y},"
            f"{region.width}x{region.height}) exceeds frame {frame.width}x{frame.height}"
        )
    y0, x0 = region.origin_y, region.origin_x
    view = frame.pixels[y0:y0 + region.height, x0:x0 + region.width]
    return Frame(view, frame.index)


def regions_from_dict(doc: dict) -> list[RegionSpec]:
    """Parse ``{"tunnels": [{"id", "x", "y", "width", "height", "sections", "in_direction"}]}``."""
    tunnels = doc.get("tunnels")
    if not isinstance(tunnels, list) or not tunnels:
        raise ConfigError("tunnel configuration needs a non-empty 'tunnels' list")
    regions = []
    seen = set()
    for i, entry in enumerate(tunnels):
        try:
            region = RegionSpec(
                tunnel_id=int(entry.get("id", i)),
                origin_x=int(entry["x"]),
                origin_y=int(entry["y"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                sections=int(entry.get("sections", 3)),
                in_direction=entry.get("in_direction", InDirection.INCREASING_Y.value),
            )
        except KeyError as exc:
            raise ConfigError(f"tunnel entry {i} is missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tunnel entry {i}: {exc}") from exc
        if region.tunnel_id in seen:
            raise ConfigError(f"duplicate tunnel id {region.tunnel_id}")
        seen.add(region.tunnel_id)
        regions.append(region)
    return regions


def regions_to_dict(regions: Sequence[RegionSpec]) -> dict:
    return {
        "tunnels": [
            {
                "id": r.tunnel_id,
                "x": r.origin_x,
                "y": r.origin_y,
                "width": r.width,
                "height": r.height,
                "sections": r.sections,
                "in_direction": r.in_direction.value,
            }
            for r in regions
        ]
    }


def load_regions(path: str | Path) -> list[RegionSpec]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read tunnel configuration {path}: {exc}") from exc
    return regions_from_dict(doc)
