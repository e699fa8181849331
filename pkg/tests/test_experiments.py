import math

import numpy as np
import pytest

from infoconc import experiments
from infoconc.experiments import (deviation_frequency,
                                  hpd_experiment, hpd_thresholds,
                                  information_density_experiment,
                                  minimize_convex, portfolio_loss_stream,
                                  run_exp_weights)
from infoconc.potentials import PotentialError, make_builtin, scale
from infoconc.samplers import sample_exact


# ---------------------------------------------------------------------------
# convex minimization
# ---------------------------------------------------------------------------

def test_minimize_gaussian_origin():
    x = minimize_convex(make_builtin("gaussian", d=3))
    assert np.linalg.norm(x) <= 1e-8


def test_minimize_neg_log_boundary(neg_log_1d):
    x = minimize_convex(neg_log_1d)
    assert x[0] == pytest.approx(1.0, abs=1e-9)


def test_minimize_portfolio_on_simplex():
    p = make_builtin("portfolio_log_loss",
                     rows=[[1.2, 0.9, 1.0], [0.8, 1.15, 1.0], [1.05, 1.0, 0.9]])
    x = minimize_convex(p)
    assert np.all(x > 0) and x.sum() <= 1.0
    # first-order optimality: the projected step does not move
    g = p.gradient(x)
    from infoconc.experiments import _project
    assert np.linalg.norm(x - _project(p.support, x - g)) <= 1e-8


# ---------------------------------------------------------------------------
# exponential weights
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def exp_weights_run():
    losses = portfolio_loss_stream(3, 200, seed=2024, volatility=0.25,
                                   drift=[0.1, 0.0, -0.1])
    result = run_exp_weights(losses, N=50, T=200, seed=7,
                             reference_samples=192)
    return losses, result


def test_exp_weights_regret_consistency(exp_weights_run):
    losses, result = exp_weights_run
    realized = np.array([r.loss for r in result.rounds])
    best = np.asarray(result.best_point)
    comp = np.array([float(l.value(best)) for l in losses])
    recomputed = np.cumsum(realized) - np.cumsum(comp)
    stored = np.array([r.cumulative_regret for r in result.rounds])
    assert np.array_equal(recomputed, stored)  # bit-exact resummation


def test_exp_weights_sublinear_regret(exp_weights_run):
    _, result = exp_weights_run
    regret = np.array([r.cumulative_regret for r in result.rounds])
    avg = {t: regret[t - 1] / t for t in (100, 150, 200)}
    assert avg[150] < avg[100]
    assert avg[200] < avg[150]
    assert regret[199] < 2.0 * regret[99]  # grows sublinearly


def test_exp_weights_empty_and_validation(neg_log_1d):
    losses = portfolio_loss_stream(3, 5, seed=1)
    assert run_exp_weights(losses, N=5, T=0, seed=1).rounds == ()
    with pytest.raises(ValueError):
        run_exp_weights(losses, N=5, T=10, seed=1)  # more rounds than losses
    unbounded = make_builtin("gaussian", d=1)
    object.__setattr__(unbounded, "known_eta", 1.0)
    with pytest.raises(PotentialError):
        run_exp_weights([unbounded], N=5, T=1, seed=1)


def test_exp_weights_single_round_matches_quadrature(neg_log_1d):
    # after one -log x loss the sampling measure has density 2x on (0,1);
    # quadrature oracle: mean 2/3, std sqrt(1/18)
    result = run_exp_weights([neg_log_1d, neg_log_1d], N=400, T=2, seed=8,
                             reference_samples=50)
    pred = result.rounds[1].prediction[0]
    tol = 4.0 * math.sqrt(1.0 / 18.0) / math.sqrt(400)
    assert abs(pred - 2.0 / 3.0) <= tol


def test_exp_weights_csv(exp_weights_run):
    _, result = exp_weights_run
    text = result.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,loss,regret,deviation"
    assert len(lines) == 201
    row = lines[1].split(",")
    assert int(row[0]) == 1 and len(row) == 4


# ---------------------------------------------------------------------------
# i.i.d. deviation frequency
# ---------------------------------------------------------------------------

def test_deviation_frequency_neg_log(neg_log_1d):
    freq, bound = deviation_frequency(neg_log_1d, N=20, t=1.5, reps=100_000,
                                      seed=123)
    assert bound == pytest.approx(2 * math.exp(-20 * (1.5 - math.log(3))))
    assert freq <= 6.55e-4


def test_deviation_frequency_trivial_t(neg_log_1d):
    freq, bound = deviation_frequency(neg_log_1d, N=20, t=0.0, reps=2_000,
                                      seed=3)
    assert freq >= 0.99
    assert bound == pytest.approx(2.0 * 3.0 ** 20)  # vacuous


def test_deviation_frequency_single_draw(neg_log_1d):
    freq, bound = deviation_frequency(neg_log_1d, N=1, t=2.0, reps=100_000,
                                      seed=5)
    assert bound == pytest.approx(2 * math.exp(-(2.0 - math.log(3))))
    assert freq <= bound


@pytest.mark.parametrize("d", [1, 5])
def test_deviation_frequency_dominates_for_exact_families(d):
    p = make_builtin("neg_log", d=d)
    for N, t in ((10, 2.0), (20, 1.5), (40, 1.0)):
        freq, bound = deviation_frequency(p, N=N, t=t, reps=20_000, seed=d * 7)
        if bound < 0.5:
            assert freq <= bound


def test_deviation_frequency_needs_eta():
    with pytest.raises(PotentialError):
        deviation_frequency(make_builtin("gaussian", d=1), N=5, t=1.0,
                            reps=10, seed=0)


# ---------------------------------------------------------------------------
# HPD regions
# ---------------------------------------------------------------------------

def test_hpd_containment_1d(neg_log_1d):
    n_scale = 5.0
    batch = sample_exact(scale(neg_log_1d, n_scale), 2_000, seed=7)
    res = hpd_experiment(neg_log_1d, n_scale, 0.05, (1.0, 1.0), batch)
    assert res.contained_baseline and res.contained_exp_concave
    assert res.contained_baseline == (res.gamma_alpha <= res.threshold_baseline)
    assert res.contained_exp_concave == (res.gamma_alpha <= res.threshold_exp_concave)


def test_hpd_alpha_near_one(neg_log_1d):
    n_scale = 5.0
    batch = sample_exact(scale(neg_log_1d, n_scale), 2_000, seed=9)
    res = hpd_experiment(neg_log_1d, n_scale, 0.999, (1.0, 1.0), batch)
    v_min = float(np.min(neg_log_1d.value(batch.points)))
    assert res.gamma_alpha <= v_min + 5e-3  # gamma tends to min V = V(x*)
    assert res.contained_baseline and res.contained_exp_concave


def test_hpd_threshold_monotone_in_alpha(neg_log_1d):
    n_scale = 5.0
    batch = sample_exact(scale(neg_log_1d, n_scale), 2_000, seed=11)
    alphas = [0.01, 0.05, 0.1, 0.25, 0.5, 0.9]
    results = [hpd_experiment(neg_log_1d, n_scale, a, (1.0, 1.0), batch)
               for a in alphas]
    for lo, hi in zip(results[:-1], results[1:]):
        assert hi.threshold_baseline <= lo.threshold_baseline
        assert hi.threshold_exp_concave <= lo.threshold_exp_concave
    contained = [r.contained_baseline and r.contained_exp_concave
                 for r in results]
    for was, now in zip(contained[:-1], contained[1:]):
        if was:
            assert now  # containment is monotone in alpha here


def test_hpd_regime_comparison():
    thr_base, thr_eta = hpd_thresholds(0.0, d=50, n=10, eta=1.0, alpha=0.05)
    assert thr_eta < thr_base  # the eta = Omega(n/d) improvement regime


# ---------------------------------------------------------------------------
# information densities
# ---------------------------------------------------------------------------

def test_info_density_independent_pair():
    rep = information_density_experiment(0.0, 2, 5_000, seed=5)
    assert abs(rep.mi_estimate) <= 1e-10
    assert rep.mi_analytic == 0.0
    assert rep.identity_error <= 1e-10


def test_info_density_correlated_pair():
    rep = information_density_experiment(0.5, 1, 200_000, seed=11)
    truth = -0.5 * math.log(1 - 0.25)
    assert truth == pytest.approx(0.1438, abs=1e-4)
    assert abs(rep.mi_estimate - truth) <= 4.0 * rep.mi_se
    assert abs(rep.cond_entropy_estimate - rep.cond_entropy_analytic) \
        <= 4.0 * rep.cond_entropy_se
    assert rep.identity_error <= 1e-10


def test_info_density_validation():
    with pytest.raises(ValueError):
        information_density_experiment(1.0, 1, 100, seed=0)
    with pytest.raises(ValueError):
        information_density_experiment(0.5, 0, 100, seed=0)


def test_info_density_tail_tables():
    rep = information_density_experiment(0.3, 2, 20_000, seed=13)
    assert len(rep.cond_tails.t_grid) == 4
    assert list(rep.mi_tails.bounds)  # baseline bound present
    d = rep.to_dict()
    import json
    json.dumps(d)
