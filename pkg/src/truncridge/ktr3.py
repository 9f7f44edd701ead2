"""Kernel truncated randomized ridge regression.

Prefix ``t`` of the shuffled sample is fit by minimizing
``lam * |f|^2 + (1/n) * sum_{i<=t} (f(x_i) - y_i)^2`` with the *full* ``n`` in
the divisor, so every prefix shares the dual shift ``lam * n`` and one
Cholesky factor of the whole sample serves all prefixes. The returned
predictor is a uniformly drawn prefix solution clipped to ``[-Y, Y]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .kernels import KernelSpec, cross_matrix, gram_matrix
from .solver import SolverState, min_norm_solve, MIN_NORM_RTOL


def truncate(z, y_cap: float):
    """``sign(z) * min(y_cap, |z|)``, elementwise for arrays."""
    if y_cap < 0:
        raise ValueError("y_cap must be >= 0")
    out = np.clip(z, -y_cap, y_cap)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Predictor:
    support: np.ndarray
    alpha: np.ndarray
    kernel: KernelSpec
    y_cap: float
    lam: float
    k: int

    def __post_init__(self):
        if len(self.alpha) != len(self.support) or len(self.alpha) != self.k:
            raise ValueError("support, alpha and k disagree")

    def raw(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.k == 0:
            return np.zeros(x.shape[0])
        return cross_matrix(self.kernel, x, self.support) @ self.alpha

    def __call__(self, x):
        return predict(self, x)


def predict(p: Predictor, x):
    """Truncated prediction; scalar in, scalar out."""
    out = truncate(p.raw(x), p.y_cap)
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass
class OnlineTrace:
    d: np.ndarray
    loss_raw: np.ndarray
    loss_trunc: np.ndarray
    lam: float
    n: int
    seed: int | None
    order: np.ndarray

    def identity_lhs(self) -> float:
        """``(1/n) sum_t loss_t / (1 + d_t / (lam n))``."""
        return float(np.mean(self.loss_raw / (1.0 + self.d / (self.lam * self.n))))


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _resolve_cap(dataset: Dataset, y_cap):
    if y_cap is None:
        return float(np.max(np.abs(dataset.labels))) if len(dataset) else 0.0
    if y_cap < 0:
        raise ValueError("y_cap must be >= 0")
    return float(y_cap)


def draw_prefix(rng: np.random.Generator, n: int, tail_fraction: float = 1.0) -> int:
    """Uniform index in ``{floor((1 - a) n), ..., n - 1}``."""
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    lo = min(int(math.floor((1.0 - tail_fraction) * n)), n - 1)
    return int(rng.integers(lo, n))


def prefix_predictor(inputs, labels, kernel, lam, y_cap, k, rel_tol=MIN_NORM_RTOL, state=None):
    """Predictor fit on the first ``k`` rows of ``inputs``/``labels``."""
    n = len(labels)
    if k == 0:
        alpha = np.zeros(0)
    elif lam > 0:
        if state is None:
            state = SolverState.from_points(kernel, inputs[:k], labels[:k], lam * n)
        alpha = state.prefix_coefficients(k)
    else:
        alpha = min_norm_solve(gram_matrix(kernel, inputs[:k]), labels[:k], rel_tol)
    return Predictor(np.array(inputs[:k]), alpha, kernel, y_cap, float(lam), int(k))


def run_ktr3(dataset: Dataset, kernel: KernelSpec, lam: float, y_cap=None, rng_seed: int = 0,
             tail_fraction: float = 1.0, *, k: int | None = None, permute: bool = True,
             rel_tol: float = MIN_NORM_RTOL) -> Predictor:
    """Shuffle, pick a prefix length at random, return its truncated solution.

    ``k`` forces the prefix length (still after shuffling unless
    ``permute=False``). ``lam = 0`` takes minimum-norm prefix solutions.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    cap = _resolve_cap(dataset, y_cap)
    rng = _rng(rng_seed)
    order = rng.permutation(n) if permute else np.arange(n)
    kk = draw_prefix(rng, n, tail_fraction)
    if k is not None:
        if not 0 <= k <= n:
            raise ValueError(f"forced prefix {k} outside 0..{n}")
        kk = int(k)
    ds = dataset.permuted(order)
    return prefix_predictor(ds.inputs, ds.labels, kernel, lam, cap, kk, rel_tol)


def online_pass(dataset: Dataset, kernel: KernelSpec, lam: float, y_cap=None,
                rng_seed: int | None = 0, *, permute: bool = True) -> OnlineTrace:
    """One shuffled pass recording ``d_t`` and the one-step-ahead losses."""
    if not lam > 0:
        raise ValueError(f"online pass needs lambda > 0, got {lam}")
    n = len(dataset)
    cap = _resolve_cap(dataset, y_cap)
    order = _rng(rng_seed).permutation(n) if permute else np.arange(n)
    ds = dataset.permuted(order)
    state = SolverState(kernel, lam * n, capacity=max(n, 1))
    d = np.empty(n)
    raw = np.empty(n)
    trunc = np.empty(n)
    for t in range(n):
        x, y = ds.inputs[t], ds.labels[t]
        lev = state.leverage(x)
        pred = state.predict_next(lev[1])
        raw[t] = (pred - y) ** 2
        trunc[t] = (truncate(pred, cap) - y) ** 2
        d[t] = state.extend(x, y, leverage=lev)
    return OnlineTrace(d, raw, trunc, float(lam), n, rng_seed, order)


def krr_fit(dataset: Dataset, kernel: KernelSpec, lam: float, y_cap=None) -> Predictor:
    """Full-sample ridge solution ``(K + lam n I)^{-1} y``, truncated."""
    if not lam > 0:
        raise ValueError(f"krr needs lambda > 0, got {lam}")
    n = len(dataset)
    cap = _resolve_cap(dataset, y_cap)
    return prefix_predictor(dataset.inputs, dataset.labels, kernel, lam, cap, n)


def krr_objective(gram, labels, lam: float) -> float:
    """``min_f lam |f|^2 + (1/n) sum (f(x_t) - y_t)^2 = lam y^T (K + lam n I)^{-1} y``.

    Dense solve, independent of the incremental factor.
    """
    gram = np.asarray(gram, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(y)
    a = gram + lam * n * np.eye(n)
    return float(lam * y @ np.linalg.solve(a, y))
