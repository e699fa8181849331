import math

import numpy as np
import pytest

from infoconc import expconcavity, potentials
from infoconc.potentials import (DomainError, PotentialError, SupportSpec,
                                 add_nonsmooth, compose_sum, embed, fd_gradient,
                                 fd_hessian, indicator, l1_potential,
                                 make_builtin, scale)

from conftest import interior_points


def test_neg_log_1d_values(neg_log_1d):
    x = np.array([0.5])
    assert math.isclose(neg_log_1d.value(x), math.log(2.0), rel_tol=1e-12)
    assert math.isclose(neg_log_1d.gradient(x)[0], -2.0, rel_tol=1e-12)
    assert math.isclose(neg_log_1d.hessian(x)[0, 0], 4.0, rel_tol=1e-12)
    assert neg_log_1d.known_eta == 1.0


def test_gaussian_identity_case():
    p = make_builtin("gaussian", d=3)
    x = np.zeros(3)
    assert p.value(x) == 0.0
    assert np.all(p.gradient(x) == 0.0)
    assert np.array_equal(p.hessian(x), np.eye(3))
    assert p.known_eta is None


def test_logistic_single_row_derivatives():
    a = np.array([1.0, 1.0]) / math.sqrt(2.0)
    p = make_builtin("logistic", rows=a[None, :])
    x = np.zeros(2)
    assert math.isclose(p.value(x), math.log(2.0), rel_tol=1e-12)
    np.testing.assert_allclose(p.gradient(x), -a / 2.0, rtol=1e-12)
    np.testing.assert_allclose(p.hessian(x), np.outer(a, a) / 4.0, rtol=1e-12)
    # hand derivation cross-checked against central differences
    fd = fd_gradient(lambda pt: float(p.value(pt)), np.array([0.3, -0.2]))
    np.testing.assert_allclose(p.gradient(np.array([0.3, -0.2])), fd, rtol=1e-5)


def test_make_builtin_errors():
    with pytest.raises(PotentialError):
        make_builtin("nope")
    with pytest.raises(PotentialError):
        make_builtin("quadratic", Q=[[1.0, 2.0], [0.0, 1.0]])   # not symmetric
    with pytest.raises(PotentialError):
        make_builtin("quadratic", Q=[[1.0, 0.0], [0.0, -1.0]])  # not PSD
    with pytest.raises(PotentialError):
        make_builtin("gaussian", d=3, extra=1)
    with pytest.raises(PotentialError):
        make_builtin("portfolio_log_loss", rows=[[1.0, -0.5]])


def test_compose_sum_eta():
    one = make_builtin("neg_log", d=1)
    assert compose_sum([(one, 1.0), (one, 1.0)]).known_eta == pytest.approx(0.5)
    assert compose_sum([(one, 3.0)]).known_eta == pytest.approx(3.0)


def test_compose_sum_coordinatewise(neg_log_composite_5d):
    p = neg_log_composite_5d
    assert p.known_eta == pytest.approx(0.2)
    assert p.dimension == 5
    x = np.full(5, 0.5)
    assert p.value(x) == pytest.approx(5 * math.log(2.0))
    # lifted coordinates keep the per-term local eta = 1 structure
    cert = expconcavity.certify(p, interior_points(p.support, 1000, seed=5))
    assert cert.global_eta >= p.known_eta - 1e-8


def test_compose_sum_errors():
    one = make_builtin("neg_log", d=1)
    two = make_builtin("gaussian", d=2)
    with pytest.raises(PotentialError):
        compose_sum([(one, 1.0), (two, 1.0)])
    with pytest.raises(PotentialError):
        compose_sum([(one, 0.0)])
    with pytest.raises(PotentialError):
        compose_sum([])
    shifted = make_builtin("neg_log", d=1, interval=(2.0, 3.0))
    with pytest.raises(PotentialError):
        compose_sum([(one, 1.0), (shifted, 1.0)])


def test_add_nonsmooth_abs():
    base = make_builtin("quadratic", Q=[[1.0]])
    p = add_nonsmooth(base, l1_potential(1))
    assert p.value(np.array([1.0])) == pytest.approx(1.5)
    assert p.smooth_part is base
    assert not p.differentiable_at(np.array([0.0]))
    assert p.differentiable_at(np.array([0.4]))


def test_add_nonsmooth_box_indicator():
    a = np.array([[1.0, 1.0]]) / math.sqrt(2.0)
    base = make_builtin("logistic", rows=a)
    box = SupportSpec.box([-5.0, -5.0], [5.0, 5.0])
    p = add_nonsmooth(base, indicator(box))
    assert p.support.kind == "box"
    assert np.all(p.support.upper == 5.0)
    x = np.array([1.0, -1.0])
    assert p.value(x) == pytest.approx(float(base.value(x)))
    with pytest.raises(DomainError):
        p.value(np.array([6.0, 0.0]))


def test_add_nonsmooth_zero_is_identity(neg_log_1d):
    zero = indicator(neg_log_1d.support)
    p = add_nonsmooth(neg_log_1d, zero)
    grid = np.linspace(0.05, 0.95, 23)[:, None]
    np.testing.assert_array_equal(p.value(grid), neg_log_1d.value(grid))


def _builtin_zoo():
    rng = np.random.Generator(np.random.Philox(key=7))
    A = rng.standard_normal((3, 2))
    R = np.abs(rng.standard_normal((4, 3))) + 0.5
    M = rng.standard_normal((3, 3))
    return {
        "gaussian": make_builtin("gaussian", d=3),
        "exponential": make_builtin("exponential", d=3),
        "neg_log": make_builtin("neg_log", d=2),
        "logistic": make_builtin("logistic", rows=A),
        "portfolio_log_loss": make_builtin("portfolio_log_loss", rows=R),
        "quadratic": make_builtin("quadratic", Q=M @ M.T + np.eye(3)),
    }


@pytest.mark.parametrize("name", ["gaussian", "exponential", "neg_log",
                                  "logistic", "portfolio_log_loss", "quadratic"])
def test_finite_difference_consistency(name):
    p = _builtin_zoo()[name]
    pts = interior_points(p.support, 100, seed=11)
    worst_g = worst_h = 0.0
    for x in pts:
        g = p.gradient(x)
        fg = fd_gradient(lambda q: float(p.value(q)), x)
        worst_g = max(worst_g, np.linalg.norm(g - fg) / (1 + np.linalg.norm(g)))
        H = p.hessian(x)
        fh = fd_hessian(lambda q: float(p.value(q)), x)
        worst_h = max(worst_h, np.linalg.norm(H - fh) / (1 + np.linalg.norm(H)))
    assert worst_g <= 1e-5
    assert worst_h <= 1e-4


@pytest.mark.parametrize("name", ["gaussian", "exponential", "neg_log",
                                  "logistic", "portfolio_log_loss", "quadratic"])
def test_segment_convexity(name):
    p = _builtin_zoo()[name]
    gen = np.random.Generator(np.random.Philox(key=23))
    xs = interior_points(p.support, 1000, seed=13)
    ys = interior_points(p.support, 1000, seed=17)
    lam = gen.random(1000)
    mid = lam[:, None] * xs + (1 - lam[:, None]) * ys
    v = np.asarray(p.value(mid))
    bound = lam * np.asarray(p.value(xs)) + (1 - lam) * np.asarray(p.value(ys))
    assert np.all(v <= bound + 1e-9)


@pytest.mark.parametrize("name", ["gaussian", "neg_log", "logistic",
                                  "portfolio_log_loss", "quadratic"])
def test_hessian_symmetric_psd(name):
    p = _builtin_zoo()[name]
    for x in interior_points(p.support, 50, seed=29):
        H = p.hessian(x)
        hnorm = np.linalg.norm(H, 2)
        assert np.allclose(H, H.T, rtol=1e-10, atol=1e-10 * (1 + hnorm))
        evals = np.linalg.eigvalsh(H)
        assert evals[0] >= -1e-8 * max(evals[-1], 0.0)


@pytest.mark.parametrize("name,eta", [("neg_log", None), ("exponential", 0.0),
                                      ("portfolio_log_loss", None)])
def test_declared_eta_certifies(name, eta):
    p = _builtin_zoo()[name]
    declared = p.known_eta if eta is None else eta
    pts = interior_points(p.support, 200, seed=31)
    cert = expconcavity.certify(p, pts, declared_eta=declared)
    assert cert.ok


def test_support_validation():
    with pytest.raises(PotentialError):
        SupportSpec.box([1.0], [0.5])
    with pytest.raises(PotentialError):
        SupportSpec.membership(lambda pts: np.zeros(len(pts), bool),
                               np.zeros(2), radius=1.0)
    spec = SupportSpec.simplex(2)
    assert bool(spec.contains(spec.interior))


def test_domain_margin_is_enforced(neg_log_1d):
    assert np.isfinite(neg_log_1d.value(np.array([1e-12])))
    with pytest.raises(DomainError):
        neg_log_1d.value(np.array([1e-13]))
    with pytest.raises(DomainError):
        neg_log_1d.value(np.array([0.5, 0.5]))  # wrong dimension


def test_support_intersection():
    a = SupportSpec.box([0.0, -np.inf], [1.0, np.inf])
    b = SupportSpec.box([-np.inf, 0.0], [np.inf, 1.0])
    c = a.intersect(b)
    assert c.kind == "box"
    assert np.all(c.lower == 0.0) and np.all(c.upper == 1.0)
    with pytest.raises(PotentialError):
        SupportSpec.box([0.0], [1.0]).intersect(SupportSpec.box([2.0], [3.0]))


def test_scale_rescales_eta(neg_log_1d):
    p = scale(neg_log_1d, 4.0)
    assert p.known_eta == pytest.approx(0.25)
    x = np.array([0.3])
    assert p.value(x) == pytest.approx(4.0 * float(neg_log_1d.value(x)))
    with pytest.raises(PotentialError):
        scale(neg_log_1d, 0.0)


def test_embed_requires_matching_coords(neg_log_1d):
    with pytest.raises(PotentialError):
        embed(neg_log_1d, 3, [0, 1])
    p = embed(neg_log_1d, 3, [1])
    x = np.array([5.0, 0.5, -2.0])
    assert p.value(x) == pytest.approx(math.log(2.0))
    g = p.gradient(x)
    assert g[0] == 0.0 and g[2] == 0.0 and g[1] == pytest.approx(-2.0)


def test_finite_difference_hessian_fallback():
    ref = make_builtin("logistic", rows=[[0.8, -0.5]])
    from dataclasses import replace
    p = replace(ref, hessian_fn=None)
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(p.hessian(x), ref.hessian(x),
                               rtol=1e-4, atol=1e-6)


def test_v_mean_closed_forms():
    assert make_builtin("neg_log", d=1).v_mean == pytest.approx(0.5)
    assert make_builtin("neg_log", d=4).v_mean == pytest.approx(2.0)
    assert make_builtin("gaussian", d=6).v_mean == pytest.approx(3.0)
    assert make_builtin("exponential", d=20).v_mean == pytest.approx(20.0)
