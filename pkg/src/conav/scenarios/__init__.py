"""Scenario constructors, task sampling, shipped configs and navigation metrics."""
from .builders import (
    BUILDERS,
    build,
    build_empty,
    build_highway_exit,
    build_intersection,
    build_narrow_passage,
    build_roundabout,
    build_toy,
    build_track,
    build_two_obstacle,
    build_warehouse,
    build_warehouse_mini,
    build_warehouse_stochastic,
    sample_task,
)
from .metrics import NavMetrics, collision_counts, compute_metrics, path_lengths
from .spec import EnvParams, ScenarioSpec

__all__ = [
    "BUILDERS",
    "EnvParams",
    "NavMetrics",
    "ScenarioSpec",
    "build",
    "build_empty",
    "build_highway_exit",
    "build_intersection",
    "build_narrow_passage",
    "build_roundabout",
    "build_toy",
    "build_track",
    "build_two_obstacle",
    "build_warehouse",
    "build_warehouse_mini",
    "build_warehouse_stochastic",
    "collision_counts",
    "compute_metrics",
    "path_lengths",
    "sample_task",
]
