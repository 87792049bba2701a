"""Observation-time designs: renewal, jittered and high-frequency sampling.

Also computes the minimal high-frequency step ``delta_star`` that keeps the
i.i.d. MISE rate for a process of path regularity ``gamma0``, and the
matching minimal observation span ``T* = n * delta_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UnsupportedError

JITTER_KINDS = ("uniform", "triangular")


@dataclass(frozen=True)
class Renewal:
    """Renewal times with Gamma(r) inter-arrivals of mean ``delta``."""

    r: int
    delta: float

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise InvalidInputError(f"renewal shape r must be a positive integer, got {self.r!r}")
        if not self.delta > 0:
            raise InvalidInputError(f"renewal mean interval must be positive, got {self.delta!r}")
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class Jittered:
    """Period ``delta`` with i.i.d. symmetric jitter supported on [-delta/2, delta/2]."""

    delta: float
    jitter: str = "uniform"

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidInputError(f"jitter period must be positive, got {self.delta!r}")
        if self.jitter not in JITTER_KINDS:
            raise InvalidInputError(f"jitter must be one of {JITTER_KINDS}, got {self.jitter!r}")
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class HighFrequency:
    """Deterministic grid ``t_k = k * delta_n``."""

    delta_n: float

    def __post_init__(self):
        if not self.delta_n > 0:
            raise InvalidInputError(f"high-frequency step must be positive, got {self.delta_n!r}")
        object.__setattr__(self, "delta_n", float(self.delta_n))


SamplingScheme = Renewal | Jittered | HighFrequency


def draw_times(scheme: SamplingScheme, n: int, rng_seed: int) -> np.ndarray:
    """Return the ``n + 1`` observation times ``t_0 < t_1 < ... < t_n``."""
    if int(n) != n or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if isinstance(scheme, HighFrequency):
        return np.arange(n + 1, dtype=np.float64) * scheme.delta_n
    rng = np.random.default_rng(rng_seed)
    if isinstance(scheme, Renewal):
        # Gamma(r) with mean delta is the sum of r exponentials of mean delta/r
        gaps = rng.exponential(scheme.delta / scheme.r, size=(n, scheme.r)).sum(axis=1)
        times = np.empty(n + 1)
        times[0] = 0.0
        np.cumsum(gaps, out=times[1:])
        return times
    if isinstance(scheme, Jittered):
        half = scheme.delta / 2
        if scheme.jitter == "uniform":
            z = rng.uniform(-half, half, size=n + 1)
        else:
            z = rng.triangular(-half, 0.0, half, size=n + 1)
        return np.arange(n + 1, dtype=np.float64) * scheme.delta + z
    raise InvalidInputError(f"unknown sampling scheme {scheme!r}")


def renewal_density(scheme: Renewal, t: float) -> float:
    """Closed-form renewal density for Gamma inter-arrivals with r in {1, 2}."""
    if t < 0:
        raise InvalidInputError("renewal density is defined for t >= 0")
    if scheme.r == 1:
        return 1.0 / scheme.delta
    if scheme.r == 2:
        return (1.0 - math.exp(-4.0 * t / scheme.delta)) / scheme.delta
    raise UnsupportedError(
        f"no closed-form renewal density for r={scheme.r}; only r = 1 or 2 are supported"
    )


@dataclass(frozen=True)
class SamplePlan:
    gamma0: float
    dim: int
    h_n: float
    n: int = 1
    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0

    def __post_init__(self):
        for name in ("gamma0", "dim", "h_n", "n", "d1", "d2", "d3"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)!r}")


def delta_star(plan: SamplePlan) -> float:
    """Smallest admissible high-frequency step for the given regularity.

    ``d1 h^d`` when ``gamma0 < 1``, ``d2 h^d ln(h^-d)`` when ``gamma0 == 1``
    and ``d3 h^(d/gamma0)`` when ``gamma0 > 1``. The comparison with 1 is exact.
    """
    h, d, g = plan.h_n, plan.dim, plan.gamma0
    if g < 1:
        return plan.d1 * h**d
    if g == 1:
        if h >= 1:
            raise InvalidInputError(f"gamma0 = 1 needs h_n < 1 so that ln(h^-d) > 0, got h_n={h}")
        return plan.d2 * h**d * math.log(h ** (-d))
    return plan.d3 * h ** (d / g)


def minimal_observation_time(plan: SamplePlan) -> float:
    return plan.n * delta_star(plan)
