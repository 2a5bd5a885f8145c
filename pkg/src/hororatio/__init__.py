"""Ratio ergodic averages over horoballs in free groups, with exact oracles."""

from .boundary import (
    BoundaryPrefix,
    Cylinder,
    CylinderFunction,
    act,
    busemann,
    cylinder_measure,
    geodesic_J,
    horoball,
    horosphere_contains,
    sample_boundary,
    tail_cocycle,
)
from .free_group import ReducedWord, inverse, multiply, nonbacktracking_array

__version__ = "0.1.0"
