"""Variance-inequality checks and the sub-Gaussian impossibility probe.

The variance inequality under test:  for mu_V log-concave with strictly
convex C^2 potential and any locally Lipschitz f in L2(mu_V),

    Var(f)  <=  int <H^{-1} grad f, grad f> dmu_V,       H = Hessian of V.

Its nonsmooth extension keeps the right-hand side built from the Hessian of
the smooth part V1 alone when V = V1 + V2 with V2 convex nonsmooth.  Both
are checked by quadrature (d <= 3) and by Monte Carlo with jackknife errors.

The impossibility probe exhibits the divergence of E exp(lambda*(V - EV)^2)
for V(x) = -log(x) on (0,1) through monotone growth of truncated integrals;
a finite machine can only demonstrate unboundedness through monotone escape.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .potentials import Potential, fd_gradient
from .samplers import SampleBatch

QUAD_RTOL = 1e-10
QUAD_FAIL_TOL = 1e-8
_GL_NODES = 32


class QuadratureError(RuntimeError):
    """Adaptive refinement did not converge."""


@dataclass(frozen=True)
class TestFunction:
    """A scalar test function with its gradient, both batched over (n, d)."""

    value_fn: Callable
    gradient_fn: Callable
    label: str

    def value(self, x):
        return np.asarray(self.value_fn(np.atleast_2d(np.asarray(x, float))), float)

    def gradient(self, x):
        return np.asarray(self.gradient_fn(np.atleast_2d(np.asarray(x, float))), float)


def f_coordinate(j: int = 0, d: int = 1) -> TestFunction:
    def grad(x):
        g = np.zeros_like(x)
        g[:, j] = 1.0
        return g
    return TestFunction(lambda x: x[:, j].copy(), grad, label=f"x{j}")


def f_square(j: int = 0) -> TestFunction:
    def grad(x):
        g = np.zeros_like(x)
        g[:, j] = 2.0 * x[:, j]
        return g
    return TestFunction(lambda x: x[:, j] ** 2, grad, label=f"x{j}^2")


def f_tanh(j: int = 0) -> TestFunction:
    def grad(x):
        g = np.zeros_like(x)
        g[:, j] = 1.0 / np.cosh(x[:, j]) ** 2
        return g
    return TestFunction(lambda x: np.tanh(x[:, j]), grad, label=f"tanh(x{j})")


def f_constant(c: float = 1.0) -> TestFunction:
    return TestFunction(lambda x: np.full(len(x), float(c)),
                        lambda x: np.zeros_like(x), label=f"const({c:g})")


def check_gradient(f: TestFunction, points: np.ndarray, rtol: float = 1e-5) -> float:
    """Max relative error of f's gradient against central differences."""
    worst = 0.0
    for x in np.atleast_2d(points):
        g = f.gradient(x)[0]
        fd = fd_gradient(lambda p: float(f.value(p)[0]), x)
        worst = max(worst, float(np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g))))
    return worst


# ---------------------------------------------------------------------------
# nested Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

def _panel_edges(a: float, b: float, panels: int, splits) -> np.ndarray:
    cuts = sorted({a, b, *(s for s in splits if a < s < b)})
    edges = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        frac = max(1, round(panels * (hi - lo) / (b - a)))
        edges.append(np.linspace(lo, hi, frac + 1))
    merged = np.concatenate([e[:-1] for e in edges] + [[b]])
    return merged


def _gl_nodes(a: float, b: float, panels: int, splits=()) -> tuple:
    xs, ws = leggauss(_GL_NODES)
    edges = _panel_edges(a, b, panels, splits)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2.0
        nodes.append((hi + lo) / 2.0 + half * xs)
        weights.append(half * ws)
    return np.concatenate(nodes), np.concatenate(weights)


def gauss_legendre(fn, a: float, b: float, rtol: float = QUAD_RTOL,
                   splits=(), max_doublings: int = 10):
    """Adaptive panel-doubling Gauss-Legendre integral of a batched fn.

    fn maps a node vector to one or more integrand vectors (an array whose
    last axis matches the nodes); all components are integrated on shared
    nodes and refinement stops when every component is stable to rtol.
    """
    prev = None
    panels = 1
    for _ in range(max_doublings + 1):
        nodes, weights = _gl_nodes(a, b, panels, splits)
        vals = np.asarray(fn(nodes), dtype=float)
        total = vals @ weights
        if prev is not None:
            err = np.max(np.abs(total - prev) / (1.0 + np.abs(total)))
            if err <= rtol:
                return total
        prev = total
        panels *= 2
    err = float(np.max(np.abs(total - prev if prev is not None else total)))
    if err > QUAD_FAIL_TOL:
        raise QuadratureError(f"quadrature did not converge (change {err:.2e})")
    return total


def _integration_box(p: Potential, level_shift: float = 60.0) -> tuple:
    """Per-coordinate integration bounds: the support box, or for unbounded
    coordinates the range where V rises level_shift nats above its value at
    the interior point (density ratio exp(-60) ~ 1e-26)."""
    d = p.dimension
    center = np.asarray(p.support.interior, dtype=float)
    v0 = float(p.value_fn(center[None, :])[0])
    s = p.support
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    if s.kind == "box":
        lo = np.where(s.lower_open, s.lower + 1e-9 * np.maximum(1, np.abs(s.lower)),
                      s.lower)
        hi = np.where(s.upper_open, s.upper - 1e-9 * np.maximum(1, np.abs(s.upper)),
                      s.upper)
    out_lo, out_hi = lo.copy(), hi.copy()
    for j in range(d):
        for sign, arr in ((1.0, out_hi), (-1.0, out_lo)):
            if np.isfinite(arr[j]):
                continue
            r = 1.0
            x = center.copy()
            for _ in range(200):
                x[j] = center[j] + sign * r
                if float(p.value_fn(x[None, :])[0]) - v0 >= level_shift:
                    break
                r *= 1.4
            arr[j] = center[j] + sign * r
    return out_lo, out_hi


def _hessian_quadform(p: Potential, pts: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """<H^{-1} grad f, grad f> at each point; H from the smooth part when
    a nonsmooth decomposition exists."""
    src = p.smooth_part if p.smooth_part is not None else p
    H = np.asarray(src.hessian_fn(pts), dtype=float)
    sols = np.linalg.solve(H, grads[..., None])[..., 0]
    return np.einsum("ni,ni->n", sols, grads)


def bl_check_quadrature(p: Potential, f: TestFunction) -> tuple:
    """(lhs, rhs) of the variance inequality by adaptive tensor quadrature.

    Needs dimension <= 3, smooth strictly convex V and smooth f; the
    normalizing constant is computed on the same nodes.  Raises if the
    inequality fails beyond 1e-6 relative slack.
    """
    d = p.dimension
    if d > 3:
        raise ValueError("quadrature check supports dimension <= 3")
    lo, hi = _integration_box(p)
    splits = tuple(p.kinks)

    if d == 1:
        def integrands(nodes):
            pts = nodes[:, None]
            w = np.exp(-np.asarray(p.value_fn(pts), float))
            fv = f.value(pts)
            quad = _hessian_quadform(p, pts, f.gradient(pts))
            return np.stack([w, fv * w, fv * fv * w, quad * w])

        z, m1, m2, rq = gauss_legendre(integrands, float(lo[0]), float(hi[0]),
                                       splits=splits)
    else:
        z, m1, m2, rq = _tensor_integrals(p, f, lo, hi)

    mean = m1 / z
    lhs = m2 / z - mean * mean
    rhs = rq / z
    if lhs > rhs + 1e-6 * (1.0 + rhs):
        raise AssertionError(
            f"variance inequality violated under quadrature: {lhs} > {rhs}")
    return float(lhs), float(rhs)


def _tensor_integrals(p: Potential, f: TestFunction, lo, hi) -> tuple:
    d = p.dimension
    prev = None
    for level in range(3, 9):
        nodes_1d, weights_1d = [], []
        for j in range(d):
            nj, wj = _gl_nodes(float(lo[j]), float(hi[j]), 2 ** level)
            nodes_1d.append(nj)
            weights_1d.append(wj)
        grids = np.meshgrid(*nodes_1d, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wgrids = np.meshgrid(*weights_1d, indexing="ij")
        w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        dens = np.exp(-np.asarray(p.value_fn(pts), float))
        fv = f.value(pts)
        quad = _hessian_quadform(p, pts, f.gradient(pts))
        total = np.array([np.dot(w, dens), np.dot(w, fv * dens),
                          np.dot(w, fv * fv * dens), np.dot(w, quad * dens)])
        if prev is not None:
            err = np.max(np.abs(total - prev) / (1.0 + np.abs(total)))
            if err <= 1e-9:
                return tuple(total)
        prev = total
    if np.max(np.abs(total - prev)) > QUAD_FAIL_TOL:
        raise QuadratureError("tensor quadrature did not converge")
    return tuple(total)


@dataclass(frozen=True)
class BlMonteCarlo:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    n_failed_solves: int

    @property
    def violation(self) -> bool:
        return self.lhs - self.rhs > 4.0 * (self.lhs_se + self.rhs_se)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs,
                "rhs_se": self.rhs_se, "violation": self.violation}


def bl_check_montecarlo(p: Potential, f: TestFunction,
                        batch: SampleBatch) -> BlMonteCarlo:
    """Monte Carlo estimate of both sides with jackknife standard errors.

    For a nonsmooth decomposition the quadratic form uses the smooth part's
    Hessian.  Points where the Hessian solve fails are dropped; more than
    0.1% of them is an error.
    """
    pts = np.asarray(batch.points, dtype=float)
    n = len(pts)
    if n < 3:
        raise ValueError("batch too small")
    fv = f.value(pts)
    grads = f.gradient(pts)
    src = p.smooth_part if p.smooth_part is not None else p
    H = np.asarray(src.hessian_fn(pts), dtype=float)
    quad = np.empty(n)
    failed = 0
    try:
        sols = np.linalg.solve(H, grads[..., None])[..., 0]
        quad = np.einsum("ni,ni->n", sols, grads)
        bad = ~np.isfinite(quad)
    except np.linalg.LinAlgError:
        bad = np.zeros(n, dtype=bool)
        for i in range(n):
            try:
                quad[i] = float(grads[i] @ np.linalg.solve(H[i], grads[i]))
            except np.linalg.LinAlgError:
                bad[i] = True
        bad |= ~np.isfinite(quad)
    failed = int(bad.sum())
    if failed > 0.001 * n:
        raise np.linalg.LinAlgError(
            f"Hessian solve failed at {failed}/{n} sample points")
    fv, quad = fv[~bad], quad[~bad]
    m = fv.size
    lhs = float(np.var(fv, ddof=1))
    lhs_se = _jackknife_var_se(fv)
    rhs = float(np.mean(quad))
    rhs_se = float(np.std(quad, ddof=1) / math.sqrt(m))
    return BlMonteCarlo(lhs=lhs, lhs_se=lhs_se, rhs=rhs, rhs_se=rhs_se,
                        n_failed_solves=failed)


def _jackknife_var_se(x: np.ndarray) -> float:
    from .concentration import jackknife_variance_se
    return jackknife_variance_se(x)


# ---------------------------------------------------------------------------
# sub-Gaussian impossibility (V = -log x on (0,1))
# ---------------------------------------------------------------------------

def counterexample_divergence(lam: float, truncations) -> list:
    """log int_a^1 x^1.25 exp(lam*(log x)^2) dx for each truncation a.

    Substituting u = -log(x) turns the integrand into exp(lam*u^2 - 2.25*u)
    on (0, -log a), integrated in log space; for lam > 0 the returned
    sequence grows without bound as a decreases.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    truncations = [float(a) for a in truncations]
    if any(not 0.0 < a < 1.0 for a in truncations):
        raise ValueError("truncations must lie in (0, 1)")
    if any(b >= a for a, b in zip(truncations[:-1], truncations[1:])):
        raise ValueError("truncations must be strictly decreasing")
    out = []
    for a in truncations:
        upper = -math.log(a)
        out.append(_log_integral_exp(lambda u: lam * u * u - 2.25 * u, 0.0, upper))
    return out


def _log_integral_exp(log_f, a: float, b: float, rtol: float = 1e-10,
                      max_doublings: int = 16) -> float:
    """log of int_a^b exp(log_f(u)) du by panelled Gauss-Legendre in log space."""
    xs, ws = leggauss(_GL_NODES)
    prev = None
    panels = 4
    for _ in range(max_doublings):
        edges = np.linspace(a, b, panels + 1)
        half = (edges[1:] - edges[:-1]) / 2.0
        nodes = (edges[1:] + edges[:-1])[:, None] / 2.0 + half[:, None] * xs
        logw = np.log(half)[:, None] + np.log(ws)
        terms = log_f(nodes.ravel()) + logw.ravel()
        m = terms.max()
        total = m + math.log(float(np.sum(np.exp(terms - m))))
        if prev is not None and abs(total - prev) <= rtol * max(1.0, abs(total)):
            return total
        prev = total
        panels *= 2
    raise QuadratureError("log-space quadrature did not converge")


def subgaussian_mgf_probe(batch: SampleBatch, lam: float, clip_grid) -> list:
    """Empirical E exp(lam * min((V - mean V)^2, clip)) per clip level.

    For the -log x measure the sequence keeps growing as the clip increases,
    the finite-sample signature of a divergent sub-Gaussian moment.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    clips = [float(c) for c in clip_grid]
    if any(c < 0 for c in clips) or any(b <= a for a, b in zip(clips[:-1], clips[1:])):
        raise ValueError("clip_grid must be nonnegative and strictly increasing")
    v = np.asarray(batch.v_values, dtype=float)
    dev2 = (v - v.mean()) ** 2
    out = []
    for clip in clips:
        out.append((clip, float(np.mean(np.exp(lam * np.minimum(dev2, clip))))))
    return out
