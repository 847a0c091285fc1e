"""Bee crossing counter for hive entrance tunnels based on sectioned motion activity."""

from .background import BackgroundModel, MotionConfig, RatioNorm, UpdateRule
from .errors import (
    AnnotationError,
    BeeCountError,
    ConfigError,
    DataError,
    FrameError,
    GeometryError,
)
from .evaluation import ClassMap, CountReport, build_report, count_accuracy
from .frames import Frame, InDirection, RegionSpec, SequenceManifest
from .pipeline import TunnelPipeline, process_sequence
from .simulator import BeeScript, Scenario, render, scenario_suite, write_scenario
from .tracker import CrossingEvent, Direction, TunnelCounter

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "BackgroundModel",
    "BeeScript",
    "BeeCountError",
    "ClassMap",
    "ConfigError",
    "CountReport",
    "CrossingEvent",
    "DataError",
    "Direction",
    "Frame",
    "FrameError",
    "GeometryError",
    "InDirection",
    "MotionConfig",
    "RatioNorm",
    "RegionSpec",
    "Scenario",
    "SequenceManifest",
    "TunnelCounter",
    "TunnelPipeline",
    "UpdateRule",
    "build_report",
    "count_accuracy",
    "process_sequence",
    "render",
    "scenario_suite",
    "write_scenario",
]
