"""Incremental factorization of ``K_t + shift * I`` over growing prefixes.

Extending a prefix by one point borders the lower Cholesky factor with one
new row, so a full pass over ``n`` points costs ``O(n^3)``. Each extension
yields the regularized leverage

    d_t = K(x_t, x_t) - k^T (K_{t-1} + shift I)^{-1} k

as ``K(x_t, x_t) - |c|^2`` where ``c`` solves ``L c = k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernels import KernelSpec, cross_matrix, gram_matrix, kernel_eval

D_CLAMP_WINDOW = 1e-10
SINGULAR_RTOL = 1e-12
MIN_NORM_RTOL = 1e-10


class SingularGramError(np.linalg.LinAlgError):
    """The shifted Gram matrix became numerically singular."""


class ConsistencyError(ArithmeticError):
    """A quantity that is nonnegative analytically came out clearly negative."""


class SolverState:
    """Growing lower-triangular factor ``L`` with ``L L^T = K_t + shift I``.

    Besides the factor the state keeps ``z = L^{-1} y``, so the prediction of
    the current prefix solution at a new point is ``c . z`` and costs one
    triangular solve.
    """

    def __init__(self, kernel: KernelSpec, shift: float, capacity: int = 16):
        if shift < 0:
            raise ValueError(f"shift must be >= 0, got {shift}")
        self.kernel = kernel
        self.shift = float(shift)
        self.t = 0
        self._L = np.zeros((capacity, capacity))
        self._z = np.zeros(capacity)
        self._support: list = []
        self._labels: list[float] = []

    @classmethod
    def from_points(cls, kernel: KernelSpec, points, labels, shift: float) -> "SolverState":
        """Factor all points at once; same factor as extending point by point."""
        points = np.asarray(points, dtype=float)
        gram = gram_matrix(kernel, points) if len(points) else np.zeros((0, 0))
        return cls.from_gram(kernel, points, labels, gram, shift)

    @classmethod
    def from_gram(cls, kernel: KernelSpec, points, labels, gram, shift: float) -> "SolverState":
        """Like :meth:`from_points` with the Gram matrix of ``points`` supplied."""
        points = np.asarray(points, dtype=float)
        labels = np.asarray(labels, dtype=float)
        n = len(labels)
        state = cls(kernel, shift, capacity=max(n, 1))
        if n == 0:
            return state
        a = np.array(gram, dtype=float)
        a[np.diag_indices(n)] += shift
        try:
            L = linalg.cholesky(a, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularGramError(f"shifted Gram of size {n} is not positive definite") from exc
        if np.min(np.diag(L)) ** 2 <= SINGULAR_RTOL * max(1.0, np.max(np.diag(a))):
            raise SingularGramError(f"shifted Gram of size {n} is numerically singular")
        state._L[:n, :n] = L
        state._z[:n] = linalg.solve_triangular(L, labels, lower=True, check_finite=False)
        state._support = list(points)
        state._labels = list(labels)
        state.t = n
        return state

    @property
    def factor(self) -> np.ndarray:
        return self._L[: self.t, : self.t]

    @property
    def support(self) -> np.ndarray:
        return np.asarray(self._support, dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self._labels, dtype=float)

    def _grow(self):
        cap = 2 * max(self._L.shape[0], 1)
        L = np.zeros((cap, cap))
        L[: self.t, : self.t] = self.factor
        z = np.zeros(cap)
        z[: self.t] = self._z[: self.t]
        self._L, self._z = L, z

    def leverage(self, x) -> tuple[float, np.ndarray]:
        """Return ``(d, c)`` for a candidate point without extending."""
        kxx = kernel_eval(self.kernel, x, x)
        if self.t == 0:
            return kxx, np.zeros(0)
        k = cross_matrix(self.kernel, self.support, np.asarray([x], dtype=float))[:, 0]
        c = linalg.solve_triangular(self.factor, k, lower=True, check_finite=False)
        d = kxx - float(c @ c)
        tol = D_CLAMP_WINDOW * max(1.0, kxx)
        if d < -tol:
            raise ConsistencyError(f"leverage d={d:.3e} is below the clamp window")
        return max(d, 0.0), c

    def predict_next(self, c: np.ndarray) -> float:
        """Current prefix solution evaluated at the point that produced ``c``."""
        if self.t == 0:
            return 0.0
        return float(c @ self._z[: self.t])

    def extend(self, x, y: float, *, leverage=None) -> float:
        """Append ``(x, y)``; returns ``d`` for the new point."""
        d, c = leverage if leverage is not None else self.leverage(x)
        pivot = d + self.shift
        kxx = kernel_eval(self.kernel, x, x)
        if pivot <= SINGULAR_RTOL * max(1.0, kxx):
            raise SingularGramError(
                f"extension at t={self.t + 1} makes the shifted Gram singular (pivot {pivot:.3e})"
            )
        if self.t + 1 > self._L.shape[0]:
            self._grow()
        t = self.t
        diag = np.sqrt(pivot)
        self._L[t, :t] = c
        self._L[t, t] = diag
        self._z[t] = (float(y) - float(c @ self._z[:t])) / diag
        self._support.append(np.asarray(x, dtype=float))
        self._labels.append(float(y))
        self.t += 1
        return d

    def prefix_coefficients(self, t: int) -> np.ndarray:
        """Dual coefficients of the ``t``-point prefix, read off the leading block."""
        if not 0 <= t <= self.t:
            raise ValueError(f"prefix length {t} outside 0..{self.t}")
        if t == 0:
            return np.zeros(0)
        return linalg.solve_triangular(
            self._L[:t, :t], self._z[:t], lower=True, trans="T", check_finite=False
        )


def extend(state: SolverState, x_new, y_new: float) -> tuple[SolverState, float]:
    """Functional spelling of :meth:`SolverState.extend` (mutates ``state``)."""
    d = state.extend(x_new, y_new)
    return state, d


def dual_coefficients(state: SolverState) -> np.ndarray:
    """Solve ``(K_t + shift I) alpha = y`` with two triangular solves."""
    if state.t == 0:
        raise ValueError("no points in solver state")
    return state.prefix_coefficients(state.t)


def min_norm_solve(gram, labels, rel_tol: float = MIN_NORM_RTOL) -> np.ndarray:
    """Minimum-norm least-squares solution of ``gram @ alpha = labels``.

    Eigenvalues at or below ``rel_tol * max_eigenvalue`` are treated as zero.
    """
    gram = np.asarray(gram, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if gram.size == 0:
        return np.zeros(0)
    w, v = linalg.eigh(gram, check_finite=False)
    top = max(float(w[-1]), 0.0)
    keep = w > rel_tol * top
    if not np.any(keep):
        return np.zeros_like(labels)
    vk = v[:, keep]
    return vk @ ((vk.T @ labels) / w[keep])


@dataclass(frozen=True)
class LogDetReport:
    logdet_ratio: float
    lam: float
    n: int


def log_det_ratio(gram, lam: float, n: int) -> LogDetReport:
    """``ln|lam I + K/n| - ln|lam I| = sum_i ln(1 + mu_i / (lam n))``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    mu = linalg.eigvalsh(np.asarray(gram, dtype=float), check_finite=False)
    mu = np.clip(mu, 0.0, None)
    return LogDetReport(float(np.sum(np.log1p(mu / (lam * n)))), float(lam), int(n))
