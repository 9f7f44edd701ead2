"""Risk estimation, prefix-averaged risk, rate fits and lambda selection."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset, ProblemSpec, make_spline_problem
from .kernels import KernelSpec, cross_matrix, gram_matrix
from .ktr3 import Predictor, draw_prefix, predict, truncate
from .solver import MIN_NORM_RTOL, SolverState, min_norm_solve

RISK_MODES = ("single_draw", "k_average")
DEFAULT_GRID_SIZE = 32


@dataclass(frozen=True)
class RiskEstimate:
    excess_risk: float
    std_error: float
    n_test: int
    mode: str = "single_draw"


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple

    def predict(self, n):
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def _pointwise_excess(preds: np.ndarray, test: Dataset) -> tuple[np.ndarray, float]:
    # per-point loss and the constant to subtract from its mean
    if test.f_star is not None:
        return (preds - test.f_star) ** 2, 0.0
    if test.bayes_risk is not None:
        return (preds - test.labels) ** 2, float(test.bayes_risk)
    raise ValueError("test set has neither noiseless target values nor a known Bayes risk")


def _summarize(losses: np.ndarray, offset: float, mode: str) -> RiskEstimate:
    m = len(losses)
    se = float(np.std(losses, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(float(np.mean(losses)) - offset, se, m, mode)


def excess_risk(p: Predictor, test: Dataset) -> RiskEstimate:
    """Mean of ``(p(x) - f*(x))^2`` over the test set.

    Without noiseless values, falls back to noisy-label risk minus the
    known Bayes risk.
    """
    preds = np.asarray(predict(p, test.inputs), dtype=float)
    losses, offset = _pointwise_excess(preds, test)
    return _summarize(losses, offset, "single_draw")


def geometric_grid(n: int, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """0 plus roughly geometric indices in ``[1, n - 1]``, always ending at ``n - 1``."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n <= size:
        return np.arange(n)
    inner = np.unique(np.round(np.geomspace(1, n - 1, size - 1)).astype(int))
    return np.concatenate([[0], inner])


def trapezoid_weights(grid, n: int) -> np.ndarray:
    """Weights ``w`` with ``sum_j w_j r(grid_j) = mean_{t<n} r_lin(t)``.

    ``r_lin`` interpolates linearly between grid points and is held constant
    outside them, so the full grid gives equal weights ``1/n``.
    """
    grid = np.asarray(grid, dtype=float)
    ts = np.arange(n, dtype=float)
    eye = np.eye(len(grid))
    return np.array([np.interp(ts, grid, eye[j]).mean() for j in range(len(grid))])


class PrefixEvaluator:
    """Test losses of prefix solutions on one (already shuffled) sample.

    The train Gram and the test/train cross matrix are computed once and
    reused for every ``lam``.
    """

    def __init__(self, train: Dataset, test: Dataset, kernel: KernelSpec):
        self.train = train
        self.test = test
        self.kernel = kernel
        self.n = len(train)
        self.gram = gram_matrix(kernel, train.inputs)
        self.cross = cross_matrix(kernel, test.inputs, train.inputs)

    def _state(self, lam: float) -> SolverState:
        return SolverState.from_gram(self.kernel, self.train.inputs, self.train.labels,
                                     self.gram, lam * self.n)

    def alphas(self, lam: float, ts, rel_tol: float = MIN_NORM_RTOL):
        state = self._state(lam) if lam > 0 else None
        y = self.train.labels
        for t in ts:
            t = int(t)
            if t == 0:
                yield t, np.zeros(0)
            elif state is not None:
                yield t, state.prefix_coefficients(t)
            else:
                yield t, min_norm_solve(self.gram[:t, :t], y[:t], rel_tol)

    def losses(self, lam: float, ts, y_cap: float, rel_tol: float = MIN_NORM_RTOL):
        """Rows of per-test-point excess losses, one per prefix length."""
        rows = []
        offset = 0.0
        for t, alpha in self.alphas(lam, ts, rel_tol):
            raw = self.cross[:, :t] @ alpha if t else np.zeros(len(self.test))
            row, offset = _pointwise_excess(truncate(raw, y_cap), self.test)
            rows.append(row)
        return np.asarray(rows), offset

    def k_average(self, lam: float, y_cap: float, grid=None, rel_tol: float = MIN_NORM_RTOL) -> RiskEstimate:
        grid = geometric_grid(self.n) if grid is None else np.asarray(sorted(set(int(t) for t in grid)))
        w = trapezoid_weights(grid, self.n)
        rows, offset = self.losses(lam, grid, y_cap, rel_tol)
        return _summarize(w @ rows, offset, "k_average")

    def single(self, lam: float, y_cap: float, k: int, rel_tol: float = MIN_NORM_RTOL) -> RiskEstimate:
        rows, offset = self.losses(lam, [k], y_cap, rel_tol)
        return _summarize(rows[0], offset, "single_draw")


def expected_risk_over_k(dataset: Dataset, kernel: KernelSpec, lam: float, y_cap, test: Dataset,
                         t_grid=None, rng_seed: int | None = 0, *, permute: bool = True) -> RiskEstimate:
    """Estimate of ``(1/n) sum_{t<n} excess(T o f_t)``, the risk averaged over
    the random prefix length.

    Exact when ``t_grid`` covers ``0..n-1``; otherwise the prefix risks are
    interpolated linearly between grid points.
    """
    n = len(dataset)
    if t_grid is not None:
        t_grid = list(t_grid)
        if not t_grid:
            raise ValueError("empty t_grid")
        if min(t_grid) < 0 or max(t_grid) > n - 1:
            raise ValueError(f"t_grid must lie in 0..{n - 1}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    cap = float(np.max(np.abs(dataset.labels))) if y_cap is None else float(y_cap)
    order = np.random.Generator(np.random.PCG64(rng_seed)).permutation(n) if permute else np.arange(n)
    ev = PrefixEvaluator(dataset.permuted(order), test, kernel)
    return ev.k_average(lam, cap, t_grid)


def fit_rate(points) -> RateFit:
    """Least squares line through ``(ln n, ln excess)``."""
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError("rate fit needs at least 3 points")
    if any(e <= 0 for _, e in pts) or any(n <= 0 for n, _ in pts):
        raise ValueError("rate fit needs positive sizes and excess risks")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, tuple(pts))


def predicted_rate(problem: ProblemSpec) -> float:
    """Exponent ``r`` of the ``n^-r`` rate the theory gives for this problem."""
    beta, b = problem.beta, problem.b
    if problem.epsilon > 0:
        return 2 * beta / (2 * beta + b)
    return 2 * beta / min(2 * beta + b, 1.0)


SCHEDULE_REGIMES = ("noisy", "zero_bayes", "capacity", "finite_dim")


def lambda_schedule(regime: str, *, n: float, beta: float | None = None, b: float | None = None,
                    bayes_risk: float | None = None, source_norm2: float | None = None,
                    trace_b: float | None = None, Y: float | None = None) -> float:
    """Regularization that minimizes the corresponding risk bound.

    noisy:      ((R*/n) / (2 beta S))^(1/(2 beta + 1))
    zero_bayes: (1/n) (1/(2 beta) - 1)
    capacity:   (b Y^2 T_b / (2 beta n b S))^(1/(2 beta + b))
    finite_dim: 1 / (n S)

    with ``S`` the squared source norm and ``T_b = Tr[L^b]``.
    """

    def need(name, value, positive=True):
        if value is None:
            raise ValueError(f"regime {regime!r} needs {name}")
        if positive and not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
        return float(value)

    n = need("n", n)
    if regime == "finite_dim":
        return 1.0 / (n * need("source_norm2", source_norm2))
    beta = need("beta", beta)
    if not 0 < beta <= 0.5:
        raise ValueError(f"beta must lie in (0, 1/2], got {beta}")
    if regime == "zero_bayes":
        return (1.0 / n) * (1.0 / (2 * beta) - 1.0)
    if regime == "noisy":
        r = need("bayes_risk", bayes_risk, positive=False)
        if r < 0:
            raise ValueError("bayes_risk must be >= 0")
        s = need("source_norm2", source_norm2)
        return ((r / n) / (2 * beta * s)) ** (1.0 / (2 * beta + 1))
    if regime == "capacity":
        b = need("b", b)
        y = need("Y", Y)
        tb = need("trace_b", trace_b)
        s = need("source_norm2", source_norm2)
        return (b * y**2 * tb / (2 * beta * n * b * s)) ** (1.0 / (2 * beta + b))
    raise ValueError(f"unknown regime {regime!r}; expected one of {SCHEDULE_REGIMES}")


def default_lambda_grid(size: int = 25, lo: float = 1e-6, hi: float = 1.0, include_zero: bool = True) -> list[float]:
    grid = [float(v) for v in np.geomspace(lo, hi, size)]
    return ([0.0] if include_zero else []) + grid


# --- cells -------------------------------------------------------------

def derive_seed(master: int, *key: int) -> int:
    """64-bit seed for a cell, a pure function of the master seed and key."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def split_seed(cell_seed: int) -> tuple[int, int]:
    data_seed, algo_seed = np.random.SeedSequence(int(cell_seed)).generate_state(2, np.uint64)
    return int(data_seed), int(algo_seed)


@dataclass(frozen=True)
class CellResult:
    n: int
    lam: float
    rep: int
    seed: int
    risk: RiskEstimate
    elapsed_ms: float


def evaluate_cell(problem: ProblemSpec, n: int, lambdas, rep: int, cell_seed: int,
                  risk_mode: str = "k_average", tail_fraction: float = 1.0,
                  grid_size: int = DEFAULT_GRID_SIZE, rel_tol: float = MIN_NORM_RTOL) -> list[CellResult]:
    """Excess risks for every ``lam`` on one fresh draw of size ``n``.

    Data and algorithm randomness both derive from ``cell_seed`` and are
    shared by all ``lam`` values of the cell.
    """
    if risk_mode not in RISK_MODES:
        raise ValueError(f"risk_mode must be one of {RISK_MODES}")
    data_seed, algo_seed = split_seed(cell_seed)
    train, test, kernel = make_spline_problem(problem.with_(n_train=int(n), seed=data_seed))
    rng = np.random.Generator(np.random.PCG64(algo_seed))
    order = rng.permutation(n)
    k = draw_prefix(rng, n, tail_fraction)
    y_cap = float(np.max(np.abs(train.labels)))
    ev = PrefixEvaluator(train.permuted(order), test, kernel)
    if tail_fraction < 1.0:
        lo = min(int(math.floor((1.0 - tail_fraction) * n)), n - 1)
        grid = np.unique(np.concatenate([[lo], geometric_grid(n, grid_size)]))
        grid = grid[grid >= lo]
    else:
        grid = geometric_grid(n, grid_size)
    out = []
    for lam in lambdas:
        t0 = time.perf_counter()
        if risk_mode == "k_average":
            risk = _k_average_tail(ev, float(lam), y_cap, grid, n, rel_tol)
        else:
            risk = ev.single(float(lam), y_cap, k, rel_tol)
        out.append(CellResult(int(n), float(lam), int(rep), int(cell_seed), risk,
                              1000.0 * (time.perf_counter() - t0)))
    return out


def _k_average_tail(ev: PrefixEvaluator, lam, y_cap, grid, n, rel_tol) -> RiskEstimate:
    # average over {grid[0], ..., n-1}, the support of the prefix draw
    lo = int(grid[0])
    w = trapezoid_weights(np.asarray(grid) - lo, n - lo)
    rows, offset = ev.losses(lam, grid, y_cap, rel_tol)
    return _summarize(w @ rows, offset, "k_average")


def best_lambda_sweep(problem: ProblemSpec, lambda_grid, n: int, repetitions: int = 5, seed: int = 0,
                      risk_mode: str = "k_average", tail_fraction: float = 1.0,
                      grid_size: int = DEFAULT_GRID_SIZE) -> tuple[float, float]:
    """``lam`` with the smallest excess risk averaged over repetitions.

    Each repetition draws fresh data and fresh algorithm randomness from
    seeds derived from ``seed``. Ties go to the earlier grid entry.
    """
    lams = list(lambda_grid)
    if not lams:
        raise ValueError("empty lambda grid")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    cells = [evaluate_cell(problem, n, lams, rep, derive_seed(seed, n, rep), risk_mode,
                           tail_fraction, grid_size)
             for rep in range(repetitions)]
    means = aggregate(cells, lams)
    j = int(np.argmin(means))
    return lams[j], float(means[j])


def aggregate(cells, lams) -> np.ndarray:
    """Mean excess risk per ``lam`` over repetitions (cells from evaluate_cell)."""
    table = np.array([[c.risk.excess_risk for c in cell] for cell in cells])
    return table.mean(axis=0) if len(lams) else np.zeros(0)
