import json

import numpy as np
import pytest

from truncridge.checks import (
    CheckReport,
    identity_sweep,
    logdet_bound_rhs,
    logdet_expectation_bound,
    run_all,
    scalar_log_bound,
    scalar_log_sweep,
    sum_dt_bound,
    truncation_dominance,
    zhdanov_identity,
)
from truncridge.datagen import Dataset, ProblemSpec
from truncridge.kernels import KernelSpec, gram_matrix
from truncridge.ktr3 import online_pass


def test_report_pass_rules():
    assert CheckReport.build("a", 1.0, 1.0 + 1e-9, "equal", 1e-8).passed
    assert not CheckReport.build("a", 1.0, 1.1, "equal", 1e-8).passed
    assert CheckReport.build("b", 1.0, 1.0, "leq", 0.0).passed
    assert not CheckReport.build("b", 1.1, 1.0, "leq", 0.05).passed
    with pytest.raises(ValueError):
        CheckReport.build("c", 1, 1, "geq", 0)


def test_report_json_fields():
    r = CheckReport.build("x", 1, 2, "leq", 0.0, seed=5)
    assert json.loads(r.to_json()) == {"name": "x", "lhs": 1.0, "rhs": 2.0, "relation": "leq",
                                       "tolerance": 0.0, "passed": True, "seed": 5}


def test_identity_scalar_case():
    r = zhdanov_identity(Dataset([0.3], [2.0], 2.0), KernelSpec.gaussian(1e6), 1.0)
    assert r.passed and r.lhs == pytest.approx(2.0) and r.rhs == pytest.approx(2.0)


def test_identity_detects_tampering():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.uniform(size=20), rng.uniform(-1, 1, 20), 1.0)
    assert zhdanov_identity(ds, KernelSpec.spline(2), 0.01).passed
    assert not zhdanov_identity(ds, KernelSpec.spline(2), 0.01, tamper=0.5).passed


def test_sum_dt_bound_and_size_check():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.uniform(size=15), rng.uniform(-1, 1, 15), 1.0)
    k = KernelSpec.spline(4)
    tr = online_pass(ds, k, 0.05)
    r = sum_dt_bound(tr, gram_matrix(k, ds.inputs), 0.05, 15)
    assert r.passed and r.lhs <= r.rhs
    with pytest.raises(ValueError):
        sum_dt_bound(tr, gram_matrix(k, ds.inputs[:5]), 0.05, 15)


def test_scalar_bound_cases():
    assert scalar_log_bound(0.0, 1.0, 0.5).passed
    assert scalar_log_bound(100.0, 100.0, 0.1).passed
    with pytest.raises(ValueError):
        scalar_log_bound(2.0, 1.0, 0.5)
    reports = scalar_log_sweep()
    assert len(reports) == 27 and all(r.passed for r in reports)


def test_logdet_rhs_picks_smaller_factor():
    # ln(1 + 1/lam)^(1-b) vs 1/b
    assert logdet_bound_rhs(0.1, 0.5, 1.0) == pytest.approx(np.log(11) ** 0.5 / 0.1**0.5)
    assert logdet_bound_rhs(1e-30, 0.9, 1.0) == pytest.approx((1 / 0.9) / 1e-30**0.9)


def test_logdet_expectation_default_exponent():
    p = ProblemSpec(b=1 / 8, beta=7 / 16)
    r = logdet_expectation_bound(p, 0.01, 40, 5, seed=1)
    assert r.passed
    r2 = logdet_expectation_bound(ProblemSpec(b=0.5, beta=0.5), 0.01, 100, 50, seed=0, b_prime=0.6)
    assert r2.passed and r2.lhs < r2.rhs


def test_truncation_dominance():
    rng = np.random.default_rng(2)
    cap = rng.uniform(0, 3, 1000)
    t = np.column_stack([rng.normal(0, 3, 1000), cap * rng.uniform(-1, 1, 1000), cap])
    assert truncation_dominance(t).passed
    with pytest.raises(ValueError):
        truncation_dominance([[0.0, 2.0, 1.0]])


def test_identity_sweep_sizes_and_seed():
    a = identity_sweep(3, count=10)
    b = identity_sweep(3, count=10)
    assert len(a) == 20 and all(r.passed for r in a)
    assert [r.lhs for r in a] == [r.lhs for r in b]


def test_run_all_passes_and_fault_fails():
    reports = run_all(0)
    assert len(reports) == 231 and all(r.passed for r in reports)
    assert all(r.seed is not None for r in reports)
    bad = run_all(0, tamper=0.5)
    assert sum(not r.passed for r in bad) > 0
