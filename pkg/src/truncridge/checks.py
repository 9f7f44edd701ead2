"""Executable checks of the exact identities and inequalities behind KTR3.

Every check returns a :class:`CheckReport`; ``equal`` checks pass when
``|lhs - rhs| <= tol * max(1, |rhs|)`` and ``leq`` checks when
``lhs <= rhs + tol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .datagen import Dataset, ProblemSpec
from .kernels import KernelSpec, gram_matrix, spline_trace_power
from .ktr3 import OnlineTrace, krr_objective, online_pass, truncate
from .solver import log_det_ratio


@dataclass(frozen=True)
class CheckReport:
    name: str
    lhs: float
    rhs: float
    relation: str
    tolerance: float
    passed: bool
    seed: int | None = None

    @classmethod
    def build(cls, name, lhs, rhs, relation, tolerance, seed=None) -> "CheckReport":
        lhs, rhs = float(lhs), float(rhs)
        if relation == "equal":
            ok = abs(lhs - rhs) <= tolerance * max(1.0, abs(rhs))
        elif relation == "leq":
            ok = lhs <= rhs + tolerance
        else:
            raise ValueError(f"unknown relation {relation!r}")
        return cls(name, lhs, rhs, relation, float(tolerance), bool(ok), seed)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


def zhdanov_identity(dataset: Dataset, kernel: KernelSpec, lam: float, seed: int | None = 0,
                     tolerance: float = 1e-8, tamper: float = 0.0) -> CheckReport:
    """Online weighted loss average against the batch ridge objective.

    ``tamper`` scales the recorded leverages by ``1 + tamper``; it exists only
    to show the check can fail.
    """
    if not lam > 0:
        raise ValueError("identity needs lambda > 0")
    trace = online_pass(dataset, kernel, lam, rng_seed=seed)
    d = trace.d * (1.0 + tamper)
    n = trace.n
    lhs = float(np.mean(trace.loss_raw / (1.0 + d / (lam * n))))
    # objective is permutation invariant, so the unshuffled sample is fine
    rhs = krr_objective(gram_matrix(kernel, dataset.inputs), dataset.labels, lam)
    return CheckReport.build("zhdanov_identity", lhs, rhs, "equal", tolerance, seed)


def sum_dt_bound(trace: OnlineTrace, gram, lam: float, n: int, tolerance: float = 1e-10) -> CheckReport:
    """``sum_t d_t / (d_t + lam n) <= ln|lam I + K/n| - ln|lam I|``."""
    gram = np.asarray(gram)
    if len(trace.d) != n or gram.shape != (n, n):
        raise ValueError("trace, gram and n disagree in size")
    lhs = float(np.sum(trace.d / (trace.d + lam * n)))
    rhs = log_det_ratio(gram, lam, n).logdet_ratio
    return CheckReport.build("sum_dt_bound", lhs, rhs, "leq", tolerance, trace.seed)


def scalar_log_bound(x: float, M: float, b: float, tolerance: float = 1e-12) -> CheckReport:
    """``ln(1 + x) <= min(1/b, ln^(1-b)(1 + M)) * x^b`` for ``0 <= x <= M``."""
    if not 0 <= x <= M:
        raise ValueError(f"need 0 <= x <= M, got x={x}, M={M}")
    if not 0 <= b <= 1:
        raise ValueError(f"need b in [0, 1], got {b}")
    inv_b = math.inf if b == 0 else 1.0 / b
    coef = min(inv_b, math.log1p(M) ** (1.0 - b))
    rhs = coef * (x**b if b > 0 else 1.0)
    return CheckReport.build("scalar_log_bound", math.log1p(x), rhs, "leq", tolerance)


def scalar_log_sweep(Ms=(1.0, 10.0, 100.0), bs=None, points: int = 101) -> list[CheckReport]:
    """Worst case over an ``x`` grid in ``[0, M]``, one report per ``(M, b)``."""
    bs = np.round(np.arange(1, 10) / 10, 1) if bs is None else bs
    out = []
    for M in Ms:
        for b in bs:
            reps = [scalar_log_bound(float(x), M, float(b)) for x in np.linspace(0.0, M, points)]
            worst = max(reps, key=lambda r: r.lhs - r.rhs)
            name = f"scalar_log_bound[M={M:g},b={float(b):g}]"
            out.append(CheckReport(name, worst.lhs, worst.rhs, "leq", worst.tolerance,
                                   all(r.passed for r in reps)))
    return out


def logdet_bound_rhs(lam: float, b: float, trace_b: float) -> float:
    """``min(ln^(1-b)(1 + 1/lam), 1/b) * Tr[L^b] / lam^b``."""
    inv_b = math.inf if b == 0 else 1.0 / b
    return min(math.log1p(1.0 / lam) ** (1.0 - b), inv_b) * trace_b / lam**b


def logdet_expectation_bound(problem: ProblemSpec, lam: float, n: int, reps: int, seed: int = 0,
                             b_prime: float | None = None) -> CheckReport:
    """Monte Carlo mean of the log-det ratio against its expectation bound.

    Passes when the mean is within 3 standard errors of the bound. The
    exponent used in the bound is ``b_prime`` (default ``1.1 / q``) since
    ``Tr[L^{1/q}]`` itself diverges.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    q = problem.kernel_order
    bp = 1.1 / q if b_prime is None else float(b_prime)
    kernel = problem.kernel()
    ss = np.random.SeedSequence(seed)
    vals = []
    for child in ss.spawn(reps):
        rng = np.random.Generator(np.random.PCG64(child))
        x = rng.uniform(0.0, 1.0, n)
        vals.append(log_det_ratio(gram_matrix(kernel, x), lam, n).logdet_ratio)
    vals = np.asarray(vals)
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    rhs = logdet_bound_rhs(lam, bp, spline_trace_power(q, bp))
    return CheckReport.build(f"logdet_expectation_bound[lam={lam:g}]", vals.mean(), rhs, "leq", 3.0 * se, seed)


def truncation_dominance(samples) -> CheckReport:
    """Clipping never increases the square loss against a label inside the cap.

    Reports the worst ``(T(z) - y)^2 - (z - y)^2`` against 0.
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 3)
    z, y, cap = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(np.abs(y) > cap):
        raise ValueError("every label must satisfy |y| <= y_cap")
    gap = (np.clip(z, -cap, cap) - y) ** 2 - (z - y) ** 2
    worst = int(np.argmax(gap))
    lhs = (truncate(z[worst], cap[worst]) - y[worst]) ** 2
    rhs = (z[worst] - y[worst]) ** 2
    ok = bool(np.all(gap <= 0.0))
    return CheckReport("truncation_dominance", float(lhs), float(rhs), "leq", 0.0, ok)


# --- randomized suite ----------------------------------------------------

def random_instance(rng: np.random.Generator, n: int) -> tuple[Dataset, KernelSpec]:
    """Small regression problem with a spline or Gaussian kernel."""
    x = rng.uniform(0.0, 1.0, n)
    y = rng.uniform(-1.0, 1.0, n)
    if rng.random() < 0.5:
        kernel = KernelSpec.spline(float(rng.choice([2, 4])))
    else:
        kernel = KernelSpec.gaussian(float(rng.uniform(0.05, 0.5)))
    return Dataset(x, y, 1.0), kernel


def identity_sweep(seed: int, count: int = 100, sizes=None, lam_range=(1e-3, 1.0),
                   tamper: float = 0.0) -> list[CheckReport]:
    """Zhdanov identity and the leverage-sum bound on random instances."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for i in range(count):
        n = int(rng.choice(sizes)) if sizes else int(rng.integers(1, 51))
        lam = float(np.exp(rng.uniform(np.log(lam_range[0]), np.log(lam_range[1]))))
        ds, kernel = random_instance(rng, n)
        inst_seed = int(rng.integers(0, 2**63))
        out.append(zhdanov_identity(ds, kernel, lam, inst_seed, tamper=tamper))
        trace = online_pass(ds, kernel, lam, rng_seed=inst_seed)
        gram = gram_matrix(kernel, ds.inputs)
        out.append(sum_dt_bound(trace, gram, lam, n))
    return out


def run_all(seed: int = 0, sizes=None, tamper: float = 0.0) -> list[CheckReport]:
    """Every check family with default sizes."""
    reports = identity_sweep(seed, sizes=sizes, tamper=tamper)
    reports += scalar_log_sweep()
    problem = ProblemSpec(b=0.5, beta=0.5)
    for lam in (1e-3, 1e-2, 1e-1):
        reports.append(logdet_expectation_bound(problem, lam, 100, 50, seed, b_prime=0.6))
    rng = np.random.Generator(np.random.PCG64(seed))
    cap = rng.uniform(0.0, 3.0, 10_000)
    triples = np.column_stack([rng.normal(0.0, 3.0, 10_000), cap * rng.uniform(-1.0, 1.0, 10_000), cap])
    reports.append(truncation_dominance(triples))
    return [r if r.seed is not None else _with_seed(r, seed) for r in reports]


def _with_seed(r: CheckReport, seed: int) -> CheckReport:
    return CheckReport(r.name, r.lhs, r.rhs, r.relation, r.tolerance, r.passed, seed)
