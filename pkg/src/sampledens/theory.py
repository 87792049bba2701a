"""Asymptotic constants, MISE bounds, bandwidth rules and empirical rate fits.

All mixing-profile quantities are user supplied: they feed upper bounds and
are not estimated from data.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy import stats

from .errors import InvalidInputError, UnsupportedDimensionError
from .sampling import HighFrequency, Jittered, Renewal, SamplingScheme


@dataclass(frozen=True)
class MixingProfile:
    """Dependence summaries bounding the covariance terms of the estimators.

    ``u0 < u1`` split the lag axis, ``a0`` and ``rho`` describe the mixing
    decay, ``h0`` bounds the renewal density, and the remaining fields are
    the norms of the bounding functions ``k``, ``phi`` and ``pi``.
    """

    u0: float
    u1: float
    a0: float = 1.0
    rho: float = 3.0
    h0: float = 1.0
    norm_k: float = 1.0
    norm_phi: float = 1.0
    f_sup: float = 1.0
    pi_sup_on_band: float = 1.0
    pi_tail: float = 1.0

    def __post_init__(self):
        if not self.u0 > 0 or not self.u1 > self.u0:
            raise InvalidInputError("need 0 < u0 < u1")
        if not self.rho > 2:
            raise InvalidInputError("rho must exceed 2")
        for name in ("a0", "h0", "norm_k", "norm_phi", "f_sup", "pi_sup_on_band", "pi_tail"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


def slack_constant_C(scheme: SamplingScheme, profile: MixingProfile, delta: float | None = None) -> float:
    """Extra variance constant ``C``: ``2 u0 h0`` (renewal) or ``2 ceil(u0/delta)`` (jittered)."""
    if isinstance(scheme, Renewal):
        return 2 * profile.u0 * profile.h0
    if isinstance(scheme, Jittered):
        delta = scheme.delta if delta is None else delta
        return 2.0 * math.ceil(profile.u0 / delta)
    if isinstance(scheme, HighFrequency):
        raise InvalidInputError("high-frequency sampling uses c_gamma0, not C")
    raise InvalidInputError(f"unknown sampling scheme {scheme!r}")


def c_gamma0(
    profile: MixingProfile,
    gamma0: float,
    d1: float | None = None,
    d2: float | None = None,
    d3: float | None = None,
) -> float:
    """High-frequency variance constant; the branch is picked by exact comparison of gamma0 with 1."""
    if not gamma0 > 0:
        raise InvalidInputError("gamma0 must be positive")
    phi = profile.norm_phi
    if gamma0 < 1:
        if d1 is None or not d1 > 0:
            raise InvalidInputError("gamma0 < 1 needs a positive d1")
        k6 = 2 * profile.u0 * profile.f_sup
        k7 = 2 * (profile.u1 - profile.u0) * profile.pi_sup_on_band
        k8 = 2 * profile.pi_tail
        local = 2 * phi * profile.u0 ** (1 - gamma0) / (1 - gamma0)
        return (local + k6 + (k7 + k8) * profile.norm_k) / d1
    if gamma0 == 1:
        if d2 is None or not d2 > 0:
            raise InvalidInputError("gamma0 = 1 needs a positive d2")
        return 2 * phi / d2
    if d3 is None or not d3 > 0:
        raise InvalidInputError("gamma0 > 1 needs a positive d3")
    return 2 * phi * gamma0 / (d3**gamma0 * (gamma0 - 1))


def _check_estimator(kind: str, d: int) -> None:
    if kind not in ("histogram", "frequency_polygon"):
        raise InvalidInputError(f"unknown estimator {kind!r}")
    if kind == "frequency_polygon" and d != 1:
        raise UnsupportedDimensionError("frequency polygon results are for d = 1")


def mise_upper_bound(kind: str, c: float, d: int, roughness: float, C: float) -> float:
    """Limsup bound on ``n^{2/(d+2)} MISE`` (histogram) or ``n^{4/5} MISE`` (frequency polygon)."""
    _check_estimator(kind, d)
    if not c > 0:
        raise InvalidInputError("c must be positive")
    if roughness < 0:
        raise InvalidInputError("roughness must be nonnegative")
    if kind == "histogram":
        return c**2 / 12 * roughness + (1 + C) / c**d
    return 49 / 2880 * c**4 * roughness + (2 / 3 + C) / c


def optimal_c(kind: str, d: int, roughness: float, C: float) -> float:
    """Minimiser of :func:`mise_upper_bound` in ``c``."""
    _check_estimator(kind, d)
    if not roughness > 0:
        raise InvalidInputError("roughness must be positive for an interior minimum")
    if kind == "histogram":
        return (6 * d * (1 + C) / roughness) ** (1 / (d + 2))
    return (720 * (2 / 3 + C) / (49 * roughness)) ** (1 / 5)


def bandwidth(kind: str, c: float, n: int, d: int = 1) -> float:
    _check_estimator(kind, d)
    if not c > 0 or n < 1:
        raise InvalidInputError("need c > 0 and n >= 1")
    if kind == "histogram":
        return c * n ** (-1 / (d + 2))
    return c * n ** (-1 / 5)


@dataclass(frozen=True)
class RateClass:
    """MISE order ``T_n^exponent``, times ``ln T_n`` when ``log_factor``."""

    exponent: float
    log_factor: bool

    def __str__(self):
        base = f"T_n^{self.exponent:.6g}"
        return base + " * ln(T_n)" if self.log_factor else base


def tn_rate_class(gamma0: float, d: int) -> RateClass:
    if not gamma0 > 0:
        raise InvalidInputError("gamma0 must be positive")
    if gamma0 < 1:
        return RateClass(-1.0, False)
    if gamma0 == 1:
        return RateClass(-1.0, True)
    return RateClass(-2 * gamma0 / (2 * gamma0 + d * (gamma0 - 1)), False)


def target_slope(kind: str, d: int = 1) -> float:
    """Theoretical log-log slope of MISE against n."""
    _check_estimator(kind, d)
    return -2 / (d + 2) if kind == "histogram" else -4 / 5


@dataclass
class RateFit:
    points: list[tuple[int, float]]
    slope: float
    intercept: float
    slope_stderr: float
    stderrs: list[float] | None = None

    def write_csv(self, stream: TextIO) -> None:
        fmt = lambda v: format(float(v), ".17g")  # noqa: E731
        stream.write("n,mise,stderr\n")
        errs = self.stderrs or [float("nan")] * len(self.points)
        for (n, mise), err in zip(self.points, errs):
            stream.write(f"{n},{fmt(mise)},{fmt(err)}\n")
        stream.write(f"# slope={fmt(self.slope)} stderr={fmt(self.slope_stderr)}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def fit_rate(points, stderrs=None) -> RateFit:
    """Ordinary least squares of ``log(mise)`` on ``log(n)``."""
    pts = [(int(n), float(m)) for n, m in points]
    if len(pts) < 3:
        raise InvalidInputError(f"need at least 3 points for a rate fit, got {len(pts)}")
    ns = np.array([p[0] for p in pts], dtype=float)
    ms = np.array([p[1] for p in pts])
    if len(set(ns.tolist())) != len(ns):
        raise InvalidInputError("sample sizes must be distinct")
    if np.any(ns <= 0):
        raise InvalidInputError("sample sizes must be positive")
    if np.any(ms <= 0) or not np.all(np.isfinite(ms)):
        raise InvalidInputError("MISE values must be positive and finite")
    res = stats.linregress(np.log(ns), np.log(ms))
    return RateFit(pts, float(res.slope), float(res.intercept), float(res.stderr),
                   None if stderrs is None else [float(s) for s in stderrs])
