"""Stationary Gaussian process models with exact density oracles.

Two reference models are provided:

* :class:`OUModel` -- independent Ornstein-Uhlenbeck coordinates, simulated
  with the exact AR(1) transition. Paths are rough, ``gamma0 = d/2``.
* :class:`SmoothGaussianModel` -- one-dimensional, unit variance, squared
  exponential covariance ``exp(-(u/ell)^2)``. Paths are smooth, ``gamma0 = d``.

Both are products of per-axis Gaussians, so the marginal density ``f``, the
joint density ``f_u`` of ``(X_0, X_u)`` and ``g_u = f_u - f (x) f`` have closed
forms.
"""

from __future__ import annotations

import logging
import math

import numba
import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, linalg, special

from .errors import (
    InvalidInputError,
    NumericalFailureError,
    ResourceLimitError,
    UnsupportedDimensionError,
)

logger = logging.getLogger(__name__)

SMOOTH_MAX_POINTS = 4096
# Cramer's bound |He_k(x)| exp(-x^2/4) <= K sqrt(k!)
_CRAMER_K = 1.086435
_SQRT_2PI = math.sqrt(2 * math.pi)


@numba.njit(cache=True, nogil=True)
def _ou_recursion(gaps, theta, sd, z, out):
    x = sd * z[0]
    out[0] = x
    for k in range(1, z.shape[0]):
        a = math.exp(-theta * gaps[k - 1])
        x = a * x + sd * math.sqrt(-math.expm1(-2.0 * theta * gaps[k - 1])) * z[k]
        out[k] = x


class _ProductGaussian:
    """Shared density algebra for zero-mean stationary Gaussian products."""

    dim: int
    sd: np.ndarray

    def one_minus_rho_sq(self, u: float) -> np.ndarray:
        raise NotImplementedError

    def correlation(self, u: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def gamma0(self) -> float:
        raise NotImplementedError

    def _points(self, x: ArrayLike) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if self.dim == 1 else arr.reshape(1, -1)
        if arr.shape[-1] != self.dim:
            raise InvalidInputError(f"expected {self.dim}-dimensional points")
        return arr

    def pdf(self, x: ArrayLike) -> np.ndarray:
        """Marginal density at ``(m, dim)`` points."""
        pts = self._points(x)
        z = pts / self.sd
        return np.prod(np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sd), axis=1)

    def axis_pdf(self, k: int, x: ArrayLike) -> np.ndarray:
        s = self.sd[k]
        z = np.asarray(x, dtype=float) / s
        return np.exp(-0.5 * z * z) / (_SQRT_2PI * s)

    def axis_cdf(self, k: int, x: ArrayLike) -> np.ndarray:
        return special.ndtr(np.asarray(x, dtype=float) / self.sd[k])

    def axis_interval_prob(self, k: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``P(a <= X_k < b)`` without cancellation in the upper tail."""
        s = self.sd[k]
        a, b = np.asarray(a, float) / s, np.asarray(b, float) / s
        upper = a > 0
        return np.where(upper, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))

    def joint_pdf(self, u: float, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        if not u > 0:
            raise InvalidInputError(f"lag u must be positive, got {u!r}")
        xs, ys = self._points(x), self._points(y)
        rho = self.correlation(u)
        q = self.one_minus_rho_sq(u)
        var = self.sd**2
        expo = -((xs * xs + ys * ys) - 2 * rho * (xs * ys)) / (2 * var * q)
        return np.prod(np.exp(expo) / (2 * np.pi * var * np.sqrt(q)), axis=1)

    def g(self, u: float, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        return self.joint_pdf(u, x, y) - self.pdf(x) * self.pdf(y)

    def default_domain(self, width: float = 8.0) -> tuple[np.ndarray, np.ndarray]:
        """Box ``[-width*sd, width*sd]`` per axis."""
        return -width * self.sd, width * self.sd


class OUModel(_ProductGaussian):
    """Independent Ornstein-Uhlenbeck coordinates ``dX = -theta X dt + sigma dW``.

    Parameters
    ----------
    dim : int
        Number of coordinates.
    theta, sigma : float or sequence of float
        Mean reversion and diffusion, scalar or one per coordinate.
    """

    def __init__(self, dim: int = 1, theta: ArrayLike = 1.0, sigma: ArrayLike = math.sqrt(2.0)):
        if int(dim) != dim or dim < 1:
            raise InvalidInputError(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self.theta = np.broadcast_to(np.asarray(theta, dtype=float), (self.dim,)).copy()
        self.sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (self.dim,)).copy()
        if np.any(self.theta <= 0) or np.any(self.sigma <= 0):
            raise InvalidInputError("theta and sigma must be positive")
        self.sd = np.sqrt(self.sigma**2 / (2 * self.theta))

    def __repr__(self):
        return f"OUModel(dim={self.dim}, theta={self.theta.tolist()}, sigma={self.sigma.tolist()})"

    @property
    def gamma0(self) -> float:
        return self.dim / 2

    def correlation(self, u):
        return np.exp(-self.theta * u)

    def one_minus_rho_sq(self, u):
        return -np.expm1(-2 * self.theta * u)

    def sample_at(self, times: ArrayLike, rng_seed: int) -> np.ndarray:
        t = _check_times(times)
        rng = np.random.default_rng(rng_seed)
        z = rng.standard_normal((self.dim, len(t)))
        gaps = np.diff(t)
        out = np.empty((len(t), self.dim))
        col = np.empty(len(t))
        for k in range(self.dim):
            _ou_recursion(gaps, self.theta[k], self.sd[k], z[k], col)
            out[:, k] = col
        return out

    def _tail_lag(self, tol: float) -> float:
        # |g_u| <= K^2/(2 pi s^2) rho/(1-rho); integrate rho/(1-rho) from U to infinity
        theta, var = float(self.theta[0]), float(self.sd[0] ** 2)
        budget = tol * 2 * np.pi * var * theta / _CRAMER_K**2
        q = -math.expm1(-budget)
        return -math.log(q) / theta


class SmoothGaussianModel(_ProductGaussian):
    """Unit-variance Gaussian process on the line with covariance ``exp(-(u/ell)^2)``."""

    dim = 1

    def __init__(self, ell: float = 1.0):
        if not ell > 0:
            raise InvalidInputError(f"length scale must be positive, got {ell!r}")
        self.ell = float(ell)
        self.sd = np.ones(1)

    def __repr__(self):
        return f"SmoothGaussianModel(ell={self.ell})"

    @property
    def gamma0(self) -> float:
        return float(self.dim)

    def covariance(self, u):
        return np.exp(-((np.asarray(u, dtype=float) / self.ell) ** 2))

    def correlation(self, u):
        return np.atleast_1d(self.covariance(u))

    def one_minus_rho_sq(self, u):
        return np.atleast_1d(-np.expm1(-2 * (u / self.ell) ** 2))

    def sample_at(self, times: ArrayLike, rng_seed: int) -> np.ndarray:
        t = _check_times(times)
        if len(t) > SMOOTH_MAX_POINTS:
            raise ResourceLimitError(
                f"smooth Gaussian sampling is limited to {SMOOTH_MAX_POINTS} points, got {len(t)}"
            )
        cov = self.covariance(t[:, None] - t[None, :])
        factor = _jittered_cholesky(cov)
        rng = np.random.default_rng(rng_seed)
        return (factor @ rng.standard_normal(len(t))).reshape(-1, 1)


def _jittered_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding the smallest diagonal nugget that makes it succeed."""
    scale = float(np.mean(np.diag(cov)))
    for nugget in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
        try:
            return linalg.cholesky(cov + nugget * scale * np.eye(len(cov)), lower=True)
        except linalg.LinAlgError:
            continue
    raise NumericalFailureError("covariance matrix is not numerically positive definite")


def _check_times(times: ArrayLike) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    if t.size == 0:
        raise InvalidInputError("times must be nonempty")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("times must be finite")
    if np.any(np.diff(t) <= 0):
        raise InvalidInputError("times must be strictly increasing")
    return t


ProcessModel = OUModel | SmoothGaussianModel


def sample_at(model: ProcessModel, times: ArrayLike, rng_seed: int) -> np.ndarray:
    """Values of the stationary process at ``times`` as an ``(n, dim)`` array."""
    return model.sample_at(times, rng_seed)


def _scalar_or_array(model, x, out):
    single = np.ndim(x) == 0 or (model.dim > 1 and np.ndim(x) == 1)
    return float(out[0]) if single else out


def marginal_density(model: ProcessModel, x: ArrayLike):
    return _scalar_or_array(model, x, model.pdf(x))


def joint_density(model: ProcessModel, u: float, x: ArrayLike, y: ArrayLike):
    return _scalar_or_array(model, x, model.joint_pdf(u, x, y))


def g_u(model: ProcessModel, u: float, x: ArrayLike, y: ArrayLike):
    return _scalar_or_array(model, x, model.g(u, x, y))


def gamma0_of(model: ProcessModel) -> float:
    return model.gamma0


def _quad_line(func, epsabs: float, epsrel: float) -> float:
    value, _ = integrate.quad(func, -np.inf, np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)
    return value


def roughness_grad(model: ProcessModel, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """``sum_i int (df/dx_i)^2 dx`` by adaptive quadrature of the per-axis factors."""
    squares, grad_squares = [], []
    for k in range(model.dim):
        s = model.sd[k]

        def dens_sq(x, k=k):
            return float(model.axis_pdf(k, x)) ** 2

        def deriv_sq(x, k=k, s=s):
            return (float(model.axis_pdf(k, x)) * x / s**2) ** 2

        squares.append(_quad_line(dens_sq, epsabs, epsrel))
        grad_squares.append(_quad_line(deriv_sq, epsabs, epsrel))
    total = 0.0
    for i in range(model.dim):
        total += grad_squares[i] * math.prod(squares[k] for k in range(model.dim) if k != i)
    return total


def roughness_hess(model: ProcessModel, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """``int f''(x)^2 dx`` for one-dimensional models."""
    if model.dim != 1:
        raise UnsupportedDimensionError("R(f'') is only defined here for dim = 1")
    s = float(model.sd[0])

    def second_sq(x):
        return (float(model.axis_pdf(0, x)) * (x * x / s**4 - 1 / s**2)) ** 2

    return _quad_line(second_sq, epsabs, epsrel)


def integrated_g(model: ProcessModel, x: float, tail_tol: float = 1e-10) -> float:
    """``int_0^inf g_u(x, x) du`` for one-dimensional OU models.

    The ``u^(-1/2)`` singularity at the origin is removed with ``u = v^2``;
    the upper limit ``U`` is solved from an analytic tail bound so that the
    neglected mass is below ``tail_tol``.
    """
    if not isinstance(model, OUModel) or model.dim != 1:
        raise NumericalFailureError(
            f"int_0^inf g_u(x,x) du diverges at u -> 0 for gamma0 = {model.gamma0} >= 1; "
            "it is finite only for one-dimensional OU (gamma0 = 1/2)"
        )
    upper = model._tail_lag(tail_tol)
    logger.info("integrated_g: truncating lag integral at U=%.6g (tail bound %.1e)", upper, tail_tol)
    point = np.array([[float(x)]])
    var, theta = float(model.sd[0] ** 2), float(model.theta[0])
    at_zero = math.exp(-x * x / (2 * var)) / (math.pi * var * math.sqrt(2 * theta))

    def integrand(v):
        if v == 0.0:
            return at_zero
        return 2.0 * v * float(model.g(v * v, point, point)[0])

    value, abserr = integrate.quad(integrand, 0.0, math.sqrt(upper), epsabs=1e-13, epsrel=1e-12, limit=400)
    if not math.isfinite(value) or abserr > 1e-8:
        raise NumericalFailureError(f"lag integral did not converge (estimate {value}, error {abserr})")
    return value
