import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoconc import concentration, samplers
from infoconc.concentration import (bound_exp_concave, bound_iid,
                                    bound_log_concave, clopper_pearson_upper,
                                    estimate_mgf, estimate_tails,
                                    estimate_variance_bounds,
                                    jackknife_variance_se, mgf_product_bound,
                                    regime_table)
from infoconc.potentials import make_builtin
from infoconc.samplers import ChainConfig, SampleBatch, sample_exact, sample_mcmc


# ---------------------------------------------------------------------------
# closed-form bounds
# ---------------------------------------------------------------------------

def test_bound_log_concave_values():
    b = bound_log_concave(4, 1.0, 1.0)
    assert b.evaluate(2.0) == pytest.approx(math.exp(-1.0))   # min(2, 1) = 1
    assert b.evaluate(0.0) == pytest.approx(1.0)
    b1 = bound_log_concave(1, 1.0, 1.0)
    assert b1.evaluate(0.5) == pytest.approx(math.exp(-0.25))  # quadratic regime


def test_bound_exp_concave_values():
    assert bound_exp_concave(1.0).evaluate(2.0) == pytest.approx(6 * math.exp(-2))
    # max(sqrt(eta), eta) picks sqrt below 1 and eta above 1
    assert bound_exp_concave(0.25).evaluate(4.0) == pytest.approx(6 * math.exp(-2))
    assert bound_exp_concave(4.0).evaluate(1.0) == pytest.approx(6 * math.exp(-4))


def test_bound_iid_values():
    b = bound_iid(1.0, 20)
    assert b.evaluate(1.5) == pytest.approx(2 * math.exp(-20 * (1.5 - math.log(3))))
    assert b.evaluate(1.5) == pytest.approx(6.5256e-4, rel=1e-3)
    assert b.evaluate(math.log(3.0)) == pytest.approx(2.0)
    assert bound_iid(4.0, 1).evaluate(2.0) == pytest.approx(
        2 * math.exp(-(4.0 - math.log(3))))


def test_bound_validation():
    with pytest.raises(ValueError):
        bound_log_concave(0)
    with pytest.raises(ValueError):
        bound_exp_concave(0.0)
    with pytest.raises(ValueError):
        bound_iid(1.0, 0)


@settings(max_examples=50, deadline=None)
@given(eta=st.floats(0.01, 100.0), t1=st.floats(0.0, 50.0),
       dt=st.floats(0.0, 50.0))
def test_tail_bounds_nonincreasing(eta, t1, dt):
    for b in (bound_exp_concave(eta), bound_log_concave(5, 2.0, 0.7),
              bound_iid(eta, 7)):
        assert b.evaluate(t1 + dt) <= b.evaluate(t1) + 1e-15


# ---------------------------------------------------------------------------
# MGF product bound
# ---------------------------------------------------------------------------

def test_mgf_product_frozen_oracle():
    # independent oracle: direct log-space summation of
    # sum_{k>=1} 2^k * (-log(1 - 4^{-(k+1)})) = 0.25464039 -> exp = 1.2899976
    oracle = math.exp(sum((2.0 ** k) * (-math.log1p(-(4.0 ** -(k + 1))))
                          for k in range(1, 200)))
    assert oracle == pytest.approx(1.2899976403, rel=1e-9)
    assert mgf_product_bound(1.0, 1.0, 30) == pytest.approx(oracle, rel=1e-9)


def test_mgf_product_trivial_and_errors():
    assert mgf_product_bound(0.0, 1.0, 30) == 1.0
    with pytest.raises(ValueError):
        mgf_product_bound(4.0, 1.0, 30)   # lam^2 = 16*eta diverges
    with pytest.raises(ValueError):
        mgf_product_bound(1.0, 1.0, 0)


def test_mgf_product_at_sqrt_eta_below_3():
    # the value at lam = sqrt(eta) does not depend on eta
    for eta in (0.01, 0.1, 1.0, 10.0):
        assert mgf_product_bound(math.sqrt(eta), eta, 60) <= 3.0


def test_mgf_product_converges_from_above():
    # every truncation is a valid upper bound of the infinite product; the
    # conservative tail makes the sequence approach the limit from above
    limit = mgf_product_bound(1.0, 1.0, 200)
    vals = [mgf_product_bound(1.0, 1.0, K) for K in (1, 2, 4, 8, 16, 32)]
    for lo, hi in zip(vals[1:], vals[:-1]):
        assert lo <= hi + 1e-15
    assert all(v >= limit - 1e-12 for v in vals)


# ---------------------------------------------------------------------------
# Clopper-Pearson and jackknife
# ---------------------------------------------------------------------------

def test_clopper_pearson_known_values():
    n = 1000
    assert clopper_pearson_upper(n, n) == 1.0
    assert clopper_pearson_upper(0, n) == pytest.approx(1 - 0.01 ** (1 / n))


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 5000), frac=st.floats(0.0, 1.0))
def test_clopper_pearson_dominates_empirical(n, frac):
    k = min(n, int(frac * n))
    assert clopper_pearson_upper(k, n) >= k / n - 1e-12


def test_jackknife_matches_normal_theory():
    gen = np.random.Generator(np.random.Philox(key=5))
    x = gen.standard_normal(20_000)
    se = jackknife_variance_se(x)
    assert se == pytest.approx(math.sqrt(2.0 / 20_000), rel=0.15)


# ---------------------------------------------------------------------------
# tail estimation
# ---------------------------------------------------------------------------

def test_estimate_tails_neg_log(neg_log_exact_100k):
    bounds = [bound_exp_concave(1.0)]
    rep = estimate_tails(neg_log_exact_100k, [0.5, 1.0, 2.0, 4.0], bounds)
    # V ~ Exp(2): P(|V - 1/2| > 1) = exp(-3)
    assert rep.empirical_survival[1] == pytest.approx(math.exp(-3), abs=3e-3)
    assert np.all(np.diff(rep.empirical_survival) <= 0)
    assert np.all(rep.survival_ucb >= rep.empirical_survival)
    assert rep.var_v >= 0
    assert rep.mean_v == pytest.approx(0.5, abs=0.01)


def test_estimate_tails_empty_tail(neg_log_exact_100k):
    rep = estimate_tails(neg_log_exact_100k, [50.0], [bound_exp_concave(1.0)])
    assert rep.empirical_survival[0] == 0.0
    assert rep.survival_ucb[0] > 0.0


def test_estimate_tails_gaussian_variance():
    batch = sample_exact(make_builtin("gaussian", d=10), 100_000, seed=12)
    rep = estimate_tails(batch, [1.0], [bound_log_concave(10)])
    assert 4.0 <= rep.var_v <= 6.0


def test_estimate_tails_validation(neg_log_exact_100k):
    with pytest.raises(ValueError):
        estimate_tails(neg_log_exact_100k, [], [])
    with pytest.raises(ValueError):
        estimate_tails(neg_log_exact_100k, [2.0, 1.0], [])


def test_centering_invariance(neg_log_1d):
    batch = sample_exact(neg_log_1d, 20_000, seed=77)
    bounds = [bound_exp_concave(1.0), bound_log_concave(1)]
    grid = [0.5, 1.0, 2.0]
    rep = estimate_tails(batch, grid, bounds)
    shifted = SampleBatch(points=batch.points.copy(),
                          v_values=batch.v_values + 10.0,
                          seed=batch.seed, method=batch.method,
                          diagnostics=batch.diagnostics)
    rep2 = estimate_tails(shifted, grid, bounds)
    # the additive constant (log of the normalizing integral) cancels
    assert np.array_equal(rep.empirical_survival, rep2.empirical_survival)
    assert np.array_equal(rep.survival_ucb, rep2.survival_ucb)
    for k in rep.bounds:
        assert np.array_equal(rep.bounds[k], rep2.bounds[k])
    assert rep2.mean_v == pytest.approx(rep.mean_v + 10.0, rel=1e-12)


def test_tail_report_csv(neg_log_exact_100k):
    rep = estimate_tails(neg_log_exact_100k, [1.0, 2.0], [bound_exp_concave(1.0)])
    text = rep.to_csv()
    lines = text.strip().split("\n")
    assert lines[0].startswith("t,empirical,ucb,bound_")
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# MGF estimation
# ---------------------------------------------------------------------------

def test_estimate_mgf_neg_log(neg_log_exact_100k):
    est, se = estimate_mgf(neg_log_exact_100k, 1.0)
    truth = 2.0 * math.exp(-0.5)  # Exp(2) MGF at 1, centered
    assert abs(est - truth) <= 3.0 * se
    assert est <= 3.0


def test_estimate_mgf_lambda_zero(neg_log_exact_100k):
    assert estimate_mgf(neg_log_exact_100k, 0.0) == (1.0, 0.0)


def test_estimate_mgf_log_space_stability(neg_log_1d):
    batch = sample_exact(neg_log_1d, 1_000, seed=3)
    est, se = estimate_mgf(batch, 100.0)
    assert math.isfinite(est) and est > 1.0
    # beyond float range the estimate saturates to inf without raising
    big, _ = estimate_mgf(batch, 2000.0)
    assert big == math.inf


# ---------------------------------------------------------------------------
# variance reports
# ---------------------------------------------------------------------------

def test_variance_exponential_equality_case():
    batch = sample_exact(make_builtin("exponential", d=20), 100_000, seed=21)
    rep = estimate_variance_bounds(batch)
    assert 18.5 <= rep.variance <= 21.5
    assert rep.passed_log_concave  # d = 20 is the equality case


def test_variance_neg_log(neg_log_exact_100k):
    rep = estimate_variance_bounds(neg_log_exact_100k, eta=1.0)
    assert rep.variance == pytest.approx(0.25, abs=0.02)
    assert rep.passed_exp_concave
    assert rep.limit_exp_concave == 1.0


def test_variance_composite(neg_log_composite_5d):
    batch = sample_mcmc(neg_log_composite_5d, 30_000,
                        ChainConfig(burn_in=2_000), seed=6)
    rep = estimate_variance_bounds(batch, eta=0.2)
    assert rep.variance == pytest.approx(1.25, abs=0.15)
    assert rep.passed_exp_concave


# ---------------------------------------------------------------------------
# regime table
# ---------------------------------------------------------------------------

def test_regime_table_entries():
    table = regime_table([1.0, 0.01], 100, [0.0, 1.0, 10.0])
    assert table.baseline[1] == pytest.approx(-0.01)       # -min(1, 1/100)
    assert table.exp_concave[0][1] == pytest.approx(-1.0)  # eta = 1, t = 1
    assert table.exp_concave[1][2] == pytest.approx(-1.0)  # eta = 1/d, t = sqrt(d)
    assert table.baseline[0] == 0.0
    assert all(col[0] == 0.0 for col in table.exp_concave)


def test_regime_table_output_formats():
    table = regime_table([1.0], 4, [1.0, 2.0])
    text = table.text()
    assert "log_concave" in text and "eta=1" in text
    csv = table.to_csv()
    assert csv.splitlines()[0] == "t,log_concave,eta=1"
    assert len(csv.splitlines()) == 3


# ---------------------------------------------------------------------------
# statistical domination and the sample-mean Chernoff bound
# ---------------------------------------------------------------------------

def test_domination_neg_log_mcmc(neg_log_1d):
    cfg = ChainConfig(burn_in=2_000)
    batch = sample_mcmc(neg_log_1d, 20_000, cfg, seed=31)
    bound = bound_exp_concave(1.0)
    rep = estimate_tails(batch, [0.5, 1.0, 2.0, 4.0], [bound])
    for t, ucb in zip(rep.t_grid, rep.survival_ucb):
        bv = float(bound.evaluate(t))
        if bv < 1.0:
            assert ucb <= bv


def test_sample_mean_concentration(neg_log_1d):
    batch = sample_exact(neg_log_1d, 100_000 * 20, seed=47)
    means = batch.v_values.reshape(100_000, 20).mean(axis=1)
    spec = bound_iid(1.0, 20)
    for t in (1.25, 1.5, 2.0):
        freq = float(np.mean(np.abs(means - 0.5) > t))
        assert freq <= float(spec.evaluate(t))
