"""Mercer kernels: Gaussian and the periodic spline family.

The spline kernel of order ``q`` on the unit circle is

    Lambda_q(s, t) = 1 + 2 * sum_{k>=1} cos(2 pi k (s - t)) / (2 pi k)^q

Under the uniform measure on [0, 1] its integral operator has eigenvalue 1
on the constant function and ``(2 pi k)^-q`` (twice) on ``cos``/``sin`` at
frequency ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

TWO_PI = 2.0 * math.pi

# even orders evaluated through Bernoulli polynomials
CLOSED_FORM_ORDERS = (2, 4, 6, 8)

_SERIES_CHUNK = 4096


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a kernel.

    ``kind`` is ``"gaussian"`` (uses ``bandwidth``) or ``"spline"`` (uses
    ``q`` and ``series_tol``).
    """

    kind: str
    bandwidth: float | None = None
    q: float | None = None
    series_tol: float = 1e-12
    max_terms: int = 2_000_000

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise ValueError(f"gaussian kernel needs a positive bandwidth, got {self.bandwidth}")
        elif self.kind == "spline":
            if self.q is None or not self.q > 1:
                raise ValueError(f"spline order must be > 1 (series diverges otherwise), got {self.q}")
            if not self.series_tol > 0:
                raise ValueError("series_tol must be positive")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, bandwidth: float) -> "KernelSpec":
        return cls(kind="gaussian", bandwidth=float(bandwidth))

    @classmethod
    def spline(cls, q: float, series_tol: float = 1e-12) -> "KernelSpec":
        return cls(kind="spline", q=float(q), series_tol=series_tol)

    @property
    def uses_closed_form(self) -> bool:
        return self.kind == "spline" and float(self.q) in CLOSED_FORM_ORDERS

    def __call__(self, x, x2) -> float:
        return kernel_eval(self, x, x2)


def _bernoulli_coeffs(n: int) -> np.ndarray:
    # highest degree first, for np.polyval
    numbers = special.bernoulli(n)
    k = np.arange(n + 1)
    return special.binom(n, k)[::-1] * numbers


def bernoulli_poly(n: int, u):
    """Bernoulli polynomial ``B_n(u)``."""
    return np.polyval(_bernoulli_coeffs(n), np.asarray(u, dtype=float))


def _folded_lag(d):
    # |d| mod 1 folded onto [0, 1/2]; exact under d -> -d
    u = np.mod(np.abs(d), 1.0)
    return np.minimum(u, 1.0 - u)


def _spline_closed(q: int, u):
    sign = 1.0 if (q // 2) % 2 == 1 else -1.0
    return 1.0 + sign * bernoulli_poly(q, u) / math.factorial(q)


def series_terms(q: float, tol: float) -> int:
    """Number of cosine terms after which the series tail is below ``tol``.

    Uses ``sum_{k>K} 2 (2 pi k)^-q <= 2 (2 pi)^-q K^(1-q) / (q - 1)``.
    """
    scale = 2.0 * TWO_PI ** (-q) / ((q - 1.0) * tol)
    if scale <= 1.0:
        return 1
    return int(math.ceil(scale ** (1.0 / (q - 1.0))))


def spline_series(q: float, u, tol: float = 1e-12, max_terms: int = 2_000_000):
    """Truncated cosine series for ``Lambda_q`` at lags ``u``."""
    u = np.asarray(u, dtype=float)
    n_terms = series_terms(q, tol)
    if n_terms > max_terms:
        raise ValueError(
            f"spline order {q} needs {n_terms} series terms for tol={tol:g}; "
            f"raise series_tol or max_terms"
        )
    flat = u.ravel()
    total = np.zeros_like(flat)
    # sum smallest terms first
    for stop in range(n_terms, 0, -_SERIES_CHUNK):
        k = np.arange(max(1, stop - _SERIES_CHUNK + 1), stop + 1, dtype=float)[::-1]
        coef = (TWO_PI * k) ** (-q)
        total += np.cos(TWO_PI * np.outer(flat, k)) @ coef
    return (1.0 + 2.0 * total).reshape(u.shape)


def spline_value(spec: KernelSpec, lag):
    """``Lambda_q`` as a function of the lag ``s - t``."""
    u = _folded_lag(lag)
    if spec.uses_closed_form:
        return _spline_closed(int(spec.q), u)
    return spline_series(spec.q, u, spec.series_tol, spec.max_terms)


def _as_points(points) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    return a


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Evaluate ``K(x, x2)`` for a single pair of inputs."""
    if spec.kind == "spline":
        return float(spline_value(spec, float(x) - float(x2)))
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    return float(np.exp(-np.sum((a - b) ** 2) / (2.0 * spec.bandwidth**2)))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return (a[:, None] - b[None, :]) ** 2
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cross_matrix(spec: KernelSpec, left, right) -> np.ndarray:
    """Rectangular kernel matrix ``K[i, j] = K(left_i, right_j)``."""
    a, b = _as_points(left), _as_points(right)
    if spec.kind == "spline":
        return spline_value(spec, a[:, None] - b[None, :])
    return np.exp(-_sq_dists(a, b) / (2.0 * spec.bandwidth**2))


def kernel_diag(spec: KernelSpec, points) -> np.ndarray:
    a = _as_points(points)
    n = a.shape[0]
    if spec.kind == "spline":
        return np.full(n, float(spline_value(spec, 0.0)))
    return np.ones(n)


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Symmetric Gram matrix, each unordered pair evaluated once."""
    a = _as_points(points)
    n = a.shape[0]
    if n == 0:
        raise ValueError("gram_matrix needs at least one point")
    iu, ju = np.triu_indices(n)
    if spec.kind == "spline":
        vals = spline_value(spec, a[iu] - a[ju])
    else:
        vals = np.exp(-_sq_dists_pairs(a[iu], a[ju]) / (2.0 * spec.bandwidth**2))
    gram = np.empty((n, n))
    gram[iu, ju] = vals
    gram[ju, iu] = vals
    return gram


def _sq_dists_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    if diff.ndim == 1:
        return diff**2
    return np.sum(diff**2, axis=1)


def population_eigenvalue(spec: KernelSpec, k: int) -> float:
    """Eigenvalue of the integral operator of a spline kernel, uniform measure.

    Index 0 is the constant eigenfunction; every ``k >= 1`` has multiplicity 2.
    """
    if spec.kind != "spline":
        raise ValueError("population eigenvalues are only available for spline kernels")
    if k < 0:
        raise ValueError("eigenvalue index must be >= 0")
    if k == 0:
        return 1.0
    return float((TWO_PI * k) ** (-spec.q))


def spline_trace_power(q: float, b: float) -> float:
    """``Tr[L^b] = 1 + 2 sum_k (2 pi k)^(-q b)`` for the spline kernel of order q.

    The sum is ``(2 pi)^(-qb) zeta(qb)``; finite only when ``q * b > 1``.
    """
    p = q * b
    if p <= 1.0:
        raise ValueError(f"trace of L^b diverges for q*b = {p:g} <= 1")
    return float(1.0 + 2.0 * TWO_PI ** (-p) * special.zeta(p))
