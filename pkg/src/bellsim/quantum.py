"""Quantum reference values for two-photon polarization singlet targets.

This is the only place quantum mechanics enters the package.  The closed
forms below are the textbook two-photon singlet predictions; they serve as
target tables for fitted models and as reference overlays, never as a bound
derived anywhere in this codebase.
"""

from __future__ import annotations

import math

import numpy as np

# Analyzer angles at which the singlet CHSH combination reaches 2*sqrt(2).
CHSH_OPTIMAL_ANGLES = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

TSIRELSON = 2.0 * math.sqrt(2.0)


def singlet_expectation(angle_a: float, angle_b: float) -> float:
    """E(a, b) = -cos 2(a - b) for polarization analyzers at the two wings."""
    return -math.cos(2.0 * (angle_a - angle_b))


def singlet_table(angle_a: float, angle_b: float) -> np.ndarray:
    """3x3 joint outcome table (indexed -1, 0, +1 on both axes).

    Perfect-detection singlet: no 0 outcomes, uniform +-1 marginals,
    correlation ``singlet_expectation``.
    """
    e = singlet_expectation(angle_a, angle_b)
    table = np.zeros((3, 3))
    for a in (-1, 1):
        for b in (-1, 1):
            table[a + 1, b + 1] = (1.0 + a * b * e) / 4.0
    return table
