"""Finite direction families for directional second differences.

Both families keep one representative of each pair ``{v, -v}``: the centered
second difference is even in ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AngularDirectionSet:
    """``S`` unit vectors evenly spread over the upper half circle.

    Every unit vector ``v`` has some member ``w`` with
    ``min(|v - w|, |v + w|) <= theta``.
    """

    theta: float
    directions: np.ndarray

    @property
    def S(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class LatticeDirectionSet:
    """Lattice vectors of ``h Z^2`` within ``h/sqrt(2)`` of the circle of radius ``delta``."""

    h: float
    delta: float
    directions: np.ndarray
    steps: np.ndarray  # integer lattice coordinates, ``directions = h * steps``

    @property
    def S(self) -> int:
        return len(self.directions)

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(self.directions[:, 0], self.directions[:, 1])


def angular_count(theta: float) -> int:
    return int(np.ceil(np.pi / (2.0 * theta)))


def build_angular(theta: float) -> AngularDirectionSet:
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    S = angular_count(theta)
    ang = np.pi * np.arange(S) / S
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    return AngularDirectionSet(theta=theta, directions=dirs)


def build_lattice(h: float, delta: float) -> LatticeDirectionSet:
    if delta < np.sqrt(2.0) * h * (1 - 1e-12):
        raise ValueError("delta must be at least sqrt(2) h")
    band = np.sqrt(2.0) / 2.0 * h
    kmax = int(np.ceil((delta + band) / h))
    k = np.arange(-kmax, kmax + 1)
    gi, gj = np.meshgrid(k, k, indexing="ij")
    steps = np.column_stack([gi.ravel(), gj.ravel()])
    r = h * np.hypot(steps[:, 0], steps[:, 1])
    keep = np.abs(r - delta) <= band * (1 + 1e-12)
    # one of each +-pair: upper half plane, plus the positive x axis
    upper = (steps[:, 1] > 0) | ((steps[:, 1] == 0) & (steps[:, 0] > 0))
    steps = steps[keep & upper]
    assert len(steps), "lattice annulus is never empty for delta >= sqrt(2) h"
    order = np.argsort(np.arctan2(steps[:, 1], steps[:, 0]), kind="stable")
    steps = steps[order]
    return LatticeDirectionSet(h=h, delta=delta, directions=h * steps.astype(float), steps=steps)
