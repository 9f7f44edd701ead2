import numpy as np
import pytest

from truncridge.datagen import Dataset, ProblemSpec, make_spline_problem, zero_noise_h_problem, zero_noise_problem_spec
from truncridge.evaluation import (
    PrefixEvaluator,
    best_lambda_sweep,
    default_lambda_grid,
    derive_seed,
    evaluate_cell,
    excess_risk,
    expected_risk_over_k,
    fit_rate,
    geometric_grid,
    lambda_schedule,
    predicted_rate,
    split_seed,
    trapezoid_weights,
)
from truncridge.kernels import KernelSpec, spline_value
from truncridge.ktr3 import Predictor, run_ktr3

S2 = KernelSpec.spline(2)


def test_zero_predictor_excess_matches_quadrature():
    m = 1_000_000
    x = (np.arange(m) + 0.5) / m
    f = spline_value(S2, x)
    test = Dataset(x, f, float(f.max()), f)
    zero = Predictor(np.zeros(0), np.zeros(0), S2, 10.0, 1.0, 0)
    # Parseval: int Lambda_2^2 = 1 + 2 sum (2 pi k)^-4 = 1 + 1/720
    assert excess_risk(zero, test).excess_risk == pytest.approx(1 + 1 / 720, rel=1e-10)


def test_excess_falls_back_to_bayes_risk():
    x = np.linspace(0, 1, 5)
    test = Dataset(x, np.full(5, 0.1), 1.0, meta={"bayes_risk": 0.004})
    zero = Predictor(np.zeros(0), np.zeros(0), S2, 1.0, 1.0, 0)
    assert excess_risk(zero, test).excess_risk == pytest.approx(0.01 - 0.004)
    with pytest.raises(ValueError):
        excess_risk(zero, Dataset(x, np.zeros(5), 1.0))


def test_fit_rate_exact_power_law():
    n = np.array([100, 200, 400, 800])
    fit = fit_rate(zip(n, 3.0 * n**-0.75))
    assert fit.slope == pytest.approx(-0.75)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.predict(1600) == pytest.approx(3.0 * 1600**-0.75)
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 1)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 0), (3, 1)])


def test_predicted_rates():
    assert predicted_rate(ProblemSpec(b=1 / 8, beta=7 / 16, epsilon=0.1)) == pytest.approx(7 / 8)
    assert predicted_rate(ProblemSpec(b=1 / 6, beta=1 / 4, epsilon=0.1)) == pytest.approx(3 / 4)
    assert predicted_rate(zero_noise_problem_spec(2, 10)) == pytest.approx(1.0)


def test_lambda_schedules():
    assert lambda_schedule("zero_bayes", n=100, beta=0.5) == 0.0
    assert lambda_schedule("zero_bayes", n=100, beta=0.25) == pytest.approx(0.01)
    assert lambda_schedule("finite_dim", n=50, source_norm2=2.0) == pytest.approx(0.01)
    noisy = lambda_schedule("noisy", n=1000, beta=0.5, bayes_risk=0.01, source_norm2=1.0)
    assert noisy == pytest.approx((1e-5) ** 0.5)
    cap = lambda_schedule("capacity", n=1000, beta=0.5, b=0.5, Y=1.0, trace_b=2.0, source_norm2=1.0)
    assert cap == pytest.approx((2.0 / 1000) ** (1 / 1.5))
    with pytest.raises(ValueError):
        lambda_schedule("capacity", n=10, beta=0.5)
    with pytest.raises(ValueError):
        lambda_schedule("nope", n=10, beta=0.5)
    with pytest.raises(ValueError):
        lambda_schedule("zero_bayes", n=10, beta=0.7)


def test_geometric_grid_shape():
    g = geometric_grid(1000, 32)
    assert g[0] == 0 and g[1] == 1 and g[-1] == 999
    assert np.all(np.diff(g) > 0) and len(g) <= 32
    assert np.array_equal(geometric_grid(10, 32), np.arange(10))


def test_trapezoid_weights():
    w = trapezoid_weights(np.arange(7), 7)
    assert np.allclose(w, 1 / 7)
    g = geometric_grid(500, 16)
    w = trapezoid_weights(g, 500)
    assert w.sum() == pytest.approx(1.0)
    # exact for functions linear in t
    assert w @ (3 * g + 1.0) == pytest.approx(np.mean(3 * np.arange(500) + 1.0))


def test_k_average_full_grid_equals_prefix_mean():
    spec = ProblemSpec(b=1 / 6, beta=1 / 4, epsilon=0.1, n_train=20, n_test=200, seed=4)
    train, test, kernel = make_spline_problem(spec)
    est = expected_risk_over_k(train, kernel, 1e-3, None, test, t_grid=range(20), rng_seed=7)
    order = np.random.Generator(np.random.PCG64(7)).permutation(20)
    risks = [excess_risk(run_ktr3(train, kernel, 1e-3, rng_seed=7, k=k), test).excess_risk
             for k in range(20)]
    assert run_ktr3(train, kernel, 1e-3, rng_seed=7, k=5).support == pytest.approx(train.inputs[order[:5]])
    assert est.excess_risk == pytest.approx(np.mean(risks), rel=1e-10)


def test_geometric_grid_close_to_full_grid():
    spec = ProblemSpec(b=1 / 6, beta=1 / 4, epsilon=0.1, n_train=200, n_test=1000, seed=5)
    train, test, kernel = make_spline_problem(spec)
    full = expected_risk_over_k(train, kernel, 1e-5, None, test, t_grid=range(200))
    geo = expected_risk_over_k(train, kernel, 1e-5, None, test, t_grid=geometric_grid(200, 8))
    assert geo.excess_risk == pytest.approx(full.excess_risk, rel=0.10)


def test_t_grid_validation():
    train, test, kernel = zero_noise_h_problem(2, 10, 10)
    with pytest.raises(ValueError):
        expected_risk_over_k(train, kernel, 0.1, None, test, t_grid=[0, 10])
    with pytest.raises(ValueError):
        expected_risk_over_k(train, kernel, -0.1, None, test)


def test_min_norm_full_fit_improves_with_n():
    means = []
    for n in (25, 50, 100, 200):
        vals = []
        for seed in range(5):
            train, test, kernel = zero_noise_h_problem(2, n, 500, seed)
            ev = PrefixEvaluator(train, test, kernel)
            vals.append(ev.single(0.0, train.y_cap, n).excess_risk)
        means.append(np.mean(vals))
    assert all(b < a for a, b in zip(means, means[1:]))


def test_seed_derivation():
    a = derive_seed(0, 100, 0)
    assert a == derive_seed(0, 100, 0)
    assert len({a, derive_seed(0, 100, 1), derive_seed(0, 101, 0), derive_seed(1, 100, 0)}) == 4
    assert 0 <= a < 2**64
    d, g = split_seed(a)
    assert d != g and split_seed(a) == (d, g)


def test_cell_shares_data_across_lambdas():
    spec = ProblemSpec(b=1 / 6, beta=1 / 4, epsilon=0.1)
    cells = evaluate_cell(spec, 60, [0.0, 1e-3, 1e-3], 0, 12345)
    assert [c.lam for c in cells] == [0.0, 1e-3, 1e-3]
    assert cells[1].risk.excess_risk == cells[2].risk.excess_risk
    single = evaluate_cell(spec, 60, [1e-3], 0, 12345, risk_mode="single_draw")
    tail = evaluate_cell(spec, 60, [1e-3], 0, 12345, tail_fraction=0.5)
    assert single[0].risk.mode == "single_draw" and tail[0].risk.excess_risk > 0
    with pytest.raises(ValueError):
        evaluate_cell(spec, 60, [1e-3], 0, 1, risk_mode="median")


def test_default_lambda_grid():
    g = default_lambda_grid(5, 1e-4, 1.0)
    assert g[0] == 0.0 and len(g) == 6 and g[-1] == pytest.approx(1.0)
    assert 0.0 not in default_lambda_grid(5, include_zero=False)


def test_best_lambda_prefers_small_on_noiseless():
    lam, risk = best_lambda_sweep(zero_noise_problem_spec(2, 10), [1.0, 0.1, 0.0], 120, repetitions=2)
    assert lam == 0.0 and risk > 0
    with pytest.raises(ValueError):
        best_lambda_sweep(zero_noise_problem_spec(2, 10), [], 50)
