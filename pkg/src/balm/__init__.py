"""Bregman proximal point / augmented Lagrangian solvers and benchmarks."""

from .geometry import (
    BregmanGeometry,
    DegenerateProbe,
    DivergedMultiplier,
    Domain,
    MirrorPoint,
    entropy_geometry,
    euclidean_geometry,
    full_space,
    nonnegative_orthant,
    simplex,
)

__all__ = [
    "BregmanGeometry",
    "DegenerateProbe",
    "DivergedMultiplier",
    "Domain",
    "MirrorPoint",
    "entropy_geometry",
    "euclidean_geometry",
    "full_space",
    "nonnegative_orthant",
    "simplex",
]
