"""Sampling of pure computational states on the Bloch sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import pure_density

SCHEMES = ("fibonacci", "random-seeded")

#: golden angle in radians, increment of the Fibonacci lattice
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class BlochSampling:
    """Sampling plan: deterministic Fibonacci lattice or a seeded uniform draw."""
    scheme: str = "fibonacci"
    count: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown sampling scheme {self.scheme!r}")
        if self.count < 1:
            raise ValidationError("sampling count must be >= 1")


def _state_from_angles(polar: float, azimuth: float) -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[0] = math.cos(0.5 * polar)
    psi[1] = np.exp(1j * azimuth) * math.sin(0.5 * polar)
    return psi


def bloch_samples(sampling: BlochSampling) -> list:
    """Pure density matrices on span{|0>, |1>} embedded in the 4-level space.

    The Fibonacci lattice is deterministic for a fixed count: point i sits
    at z = 1 - (2i+1)/N with azimuth i times the golden angle, so a single
    sample lands on the equator at azimuth 0.
    """
    if sampling.scheme == "fibonacci":
        n = sampling.count
        zs = 1.0 - (2.0 * np.arange(n) + 1.0) / n
        azimuths = GOLDEN_ANGLE * np.arange(n)
    else:
        rng = np.random.default_rng(sampling.seed)
        zs = rng.uniform(-1.0, 1.0, sampling.count)
        azimuths = rng.uniform(0.0, 2.0 * math.pi, sampling.count)
    polars = np.arccos(np.clip(zs, -1.0, 1.0))
    return [pure_density(_state_from_angles(th, ph))
            for th, ph in zip(polars, azimuths)]
