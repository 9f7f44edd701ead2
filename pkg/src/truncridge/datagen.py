"""Synthetic spline benchmarks and dataset CSV I/O.

Inputs are uniform on [0, 1]; the kernel is ``Lambda_{1/b}`` and the target
``f*(x) = Lambda_{beta/b + 1/2}(x, 0)``. Labels get additive uniform noise on
``[-epsilon, epsilon]``, so the Bayes risk is ``epsilon^2 / 3``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelSpec, spline_value

N_TEST_FACTOR = 10
N_TEST_CAP = 10_000


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    y_cap: float
    f_star: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels differ in length")
        if self.f_star is not None:
            self.f_star = np.asarray(self.f_star, dtype=float)
            if len(self.f_star) != len(self.labels):
                raise ValueError("f_star and labels differ in length")
        if len(self.labels) and self.y_cap < np.max(np.abs(self.labels)):
            raise ValueError("y_cap is below the largest |label|")

    def __len__(self):
        return len(self.labels)

    @property
    def bayes_risk(self) -> float | None:
        return self.meta.get("bayes_risk")

    def permuted(self, order) -> "Dataset":
        order = np.asarray(order)
        return Dataset(
            self.inputs[order],
            self.labels[order],
            self.y_cap,
            None if self.f_star is None else self.f_star[order],
            dict(self.meta),
        )


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of the spline benchmark.

    ``target_order`` overrides the target index ``beta/b + 1/2``; the
    zero-noise problem uses it to put the target inside the RKHS.
    """

    b: float
    beta: float
    epsilon: float = 0.0
    n_train: int = 100
    n_test: int | None = None
    seed: int = 0
    target_order: float | None = None

    def __post_init__(self):
        if not 0 < self.b <= 1:
            raise ValueError(f"b must lie in (0, 1], got {self.b}")
        if not 1.0 / self.b > 1:
            raise ValueError(f"kernel order 1/b = {1 / self.b:g} must exceed 1")
        if not 0 < self.beta <= 0.5:
            raise ValueError(f"beta must lie in (0, 1/2], got {self.beta}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.target > 1:
            raise ValueError(f"target order {self.target:g} must exceed 1")

    @property
    def kernel_order(self) -> float:
        return _snap(1.0 / self.b)

    @property
    def target(self) -> float:
        if self.target_order is not None:
            return float(self.target_order)
        return _snap(self.beta / self.b + 0.5)

    @property
    def test_size(self) -> int:
        if self.n_test is not None:
            return int(self.n_test)
        return min(N_TEST_FACTOR * self.n_train, N_TEST_CAP)

    @property
    def bayes_risk(self) -> float:
        return self.epsilon**2 / 3.0

    def kernel(self) -> KernelSpec:
        return KernelSpec.spline(self.kernel_order)

    def target_kernel(self) -> KernelSpec:
        return KernelSpec.spline(self.target)

    def label_bound(self) -> float:
        return float(spline_value(self.target_kernel(), 0.0)) + self.epsilon

    def with_(self, **changes) -> "ProblemSpec":
        values = {**self.__dict__, **changes}
        return ProblemSpec(**values)


def _snap(v: float) -> float:
    # 1/(1/8) etc. should land on the integer so closed forms apply
    r = round(v)
    return float(r) if abs(v - r) < 1e-9 else float(v)


def true_function_eval(spec: ProblemSpec, x):
    """Target ``f*(x) = Lambda_{q*}(x, 0)``; accepts scalars or arrays."""
    out = spline_value(spec.target_kernel(), np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _draw(spec: ProblemSpec, rng: np.random.Generator, n: int, kind: str) -> Dataset:
    x = rng.uniform(0.0, 1.0, n)
    f = np.asarray(true_function_eval(spec, x), dtype=float).reshape(n)
    noise = rng.uniform(-spec.epsilon, spec.epsilon, n) if spec.epsilon > 0 else np.zeros(n)
    meta = {
        "kind": kind,
        "b": spec.b,
        "beta": spec.beta,
        "epsilon": spec.epsilon,
        "target_order": spec.target,
        "bayes_risk": spec.bayes_risk,
        "seed": spec.seed,
    }
    return Dataset(x, f + noise, spec.label_bound(), f, meta)


def make_spline_problem(spec: ProblemSpec) -> tuple[Dataset, Dataset, KernelSpec]:
    """Seeded train/test draw; both carry noiseless target values."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    train = _draw(spec, rng, spec.n_train, "train")
    test = _draw(spec, rng, spec.test_size, "test")
    return train, test, spec.kernel()


def zero_noise_problem_spec(q: int, n_train: int, n_test: int | None = None, seed: int = 0) -> ProblemSpec:
    if q < 2 or q % 2:
        raise ValueError(f"zero-noise problem needs an even order >= 2, got {q}")
    return ProblemSpec(b=1.0 / q, beta=0.5, epsilon=0.0, n_train=n_train,
                       n_test=n_test, seed=seed, target_order=float(q))


def zero_noise_h_problem(q: int, n_train: int, n_test: int | None = None, seed: int = 0):
    """Noiseless problem with ``f* = Lambda_q(., 0)``, a kernel section.

    The target lies in the RKHS (source exponent 1/2) with squared norm
    ``Lambda_q(0)``.
    """
    return make_spline_problem(zero_noise_problem_spec(q, n_train, n_test, seed))


# --- CSV ---------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    has_f = ds.f_star is not None
    w.writerow(["x", "y", "f_star"] if has_f else ["x", "y"])
    for i in range(len(ds)):
        row = [_fmt(ds.inputs[i]), _fmt(ds.labels[i])]
        if has_f:
            row.append(_fmt(ds.f_star[i]))
        w.writerow(row)
    return buf.getvalue()


def write_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    path.write_text(dataset_to_csv(ds))
    return path


def read_dataset(path, y_cap: float | None = None) -> Dataset:
    """Load ``x,y[,f_star]``; ``y_cap`` defaults to the largest ``|y|``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "y"] or header[2:] not in ([], ["f_star"]):
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
    labels = arr[:, 1]
    cap = float(np.max(np.abs(labels))) if y_cap is None and len(labels) else (y_cap or 0.0)
    f_star = arr[:, 2] if len(header) == 3 else None
    return Dataset(arr[:, 0], labels, cap, f_star)
