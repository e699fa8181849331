"""Numerical exp-concavity certification.

V is eta-exp-concave iff the matrix inequality H(x) >= eta * g(x) g(x)^T
holds everywhere (H = Hessian, g = gradient).  When H(x) is invertible the
largest feasible eta at x is 1 / <H(x)^{-1} g(x), g(x)>; certificates here
evaluate that quantity on sampled points, so they are empirical evidence,
not proofs.
"""

import math
from dataclasses import dataclass

import numpy as np

from .potentials import DOMAIN_MARGIN, Potential, SupportSpec

# relative eigenvalue tolerance for declaring a PSD violation
PSD_TOL = 1e-8
# eigenvalues below this fraction of the largest define the null space
NULLSPACE_CUTOFF = 1e-10
# gradients below this (relative) size get the +inf sentinel: the defining
# inequality is vacuous where the gradient vanishes
ZERO_GRAD_RTOL = 1e-12


class NotExpConcaveAtPointError(ValueError):
    """The Hessian quadratic form rejects exp-concavity at the probed point."""


def _grad_hess(p: Potential, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    g = p.gradient(x)
    H = p.hessian(x)
    return x, g, H


def local_eta(p: Potential, x) -> float:
    """Largest exp-concavity parameter feasible at x.

    Returns 1 / <H^{-1} g, g> via a linear solve, or the +inf sentinel when
    the gradient vanishes.  A singular or indefinite Hessian along the
    gradient direction signals that V is not exp-concave at x.
    """
    x, g, H = _grad_hess(p, x)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= ZERO_GRAD_RTOL * (1.0 + float(np.linalg.norm(x))):
        return math.inf
    try:
        y = np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        raise NotExpConcaveAtPointError(
            f"Hessian singular in the gradient direction at {x}") from None
    residual = float(np.linalg.norm(H @ y - g))
    scale = float(np.linalg.norm(H, 2)) * float(np.linalg.norm(y)) + gnorm
    if not np.all(np.isfinite(y)) or residual > 1e-8 * scale:
        raise NotExpConcaveAtPointError(
            f"Hessian solve failed (residual {residual:.2e}) at {x}")
    q = float(y @ g)
    if q <= 0:
        raise NotExpConcaveAtPointError(
            f"<H^{{-1}}g, g> = {q:.2e} <= 0 at {x}")
    return 1.0 / q


def regularized_local_eta(p: Potential, x, eps: float) -> float:
    """Ridge variant 1 / <(H + eps*I)^{-1} g, g>, defined for singular H.

    Nondecreasing in eps; as eps -> 0 it decreases toward the value justified
    by the gradient living in the positive-eigenvalue subspace.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x, g, H = _grad_hess(p, x)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= ZERO_GRAD_RTOL * (1.0 + float(np.linalg.norm(x))):
        return math.inf
    d = p.dimension
    y = np.linalg.solve(H + eps * np.eye(d), g)
    q = float(y @ g)
    if q <= 0:
        raise NotExpConcaveAtPointError(
            f"<(H+eps I)^{{-1}}g, g> = {q:.2e} <= 0 at {x}")
    return 1.0 / q


def _pseudo_local_eta(p: Potential, x) -> float:
    """Rank-aware local eta for singular Hessians.

    When the gradient lies in the positive-eigenvalue subspace (which holds
    for exp-concave potentials), the eps -> 0 limit of the regularized value
    is 1 over the pseudo-inverse quadratic form; otherwise the point rejects
    exp-concavity and the value is 0.
    """
    x, g, H = _grad_hess(p, x)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= ZERO_GRAD_RTOL * (1.0 + float(np.linalg.norm(x))):
        return math.inf
    evals, evecs = np.linalg.eigh(H)
    lam_max = float(evals[-1])
    keep = evals > NULLSPACE_CUTOFF * max(lam_max, 0.0)
    if not np.any(keep):
        return 0.0
    coeffs = evecs.T @ g
    null_norm = float(np.linalg.norm(coeffs[~keep]))
    if null_norm > 1e-8 * (1.0 + gnorm):
        return 0.0
    q = float(np.sum(coeffs[keep] ** 2 / evals[keep]))
    return 1.0 / q if q > 0 else math.inf


def project_gradient_check(p: Potential, x) -> float:
    """Norm of the gradient's projection onto the Hessian null space.

    For an exp-concave potential the gradient lies in the span of the
    positive-eigenvalue directions, so the returned norm must be ~0.
    """
    x, g, H = _grad_hess(p, x)
    evals, evecs = np.linalg.eigh(H)
    lam_max = float(evals[-1])
    null = evals < NULLSPACE_CUTOFF * max(lam_max, 0.0)
    if not np.any(null):
        return 0.0
    coeffs = evecs[:, null].T @ g
    return float(np.linalg.norm(coeffs))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaCertificate:
    """Result of empirical certification on a finite point set.

    Sampled points only, not a proof.  In certify mode, violations lists the
    points where min-eig(H - eta*g g^T) falls below -PSD_TOL*(1+||H||).
    """

    points: np.ndarray
    local_eta: np.ndarray
    global_eta: float
    violations: tuple
    mode: str
    declared_eta: float | None = None
    empirical: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "declared_eta": self.declared_eta,
            "global_eta": self.global_eta,
            "n_points": int(len(self.points)),
            "local_eta": [None if math.isinf(v) else float(v) for v in self.local_eta],
            "violations": [
                {"point": [float(c) for c in pt], "min_eig": float(me)}
                for pt, me in self.violations],
            "empirical": self.empirical,
        }


def _points_array(points) -> np.ndarray:
    pts = getattr(points, "points", points)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) == 0:
        raise ValueError("empty point set")
    return pts


def certify(p: Potential, points, declared_eta: float | None = None) -> EtaCertificate:
    """Certify a declared eta or estimate the global one over sampled points.

    points may be a SampleBatch or a plain (n, d) array.  Estimate mode takes
    global_eta = min of the local values (+inf entries ignored unless all
    are); points where the local solve rejects exp-concavity contribute 0.
    """
    pts = _points_array(points)
    local = np.empty(len(pts))
    for i, x in enumerate(pts):
        try:
            local[i] = local_eta(p, x)
        except NotExpConcaveAtPointError:
            # singular Hessian: fall back to the rank-aware limit, which is
            # 0 exactly when the gradient leaves the positive subspace
            local[i] = _pseudo_local_eta(p, x)
    finite = local[np.isfinite(local)]
    global_eta = float(finite.min()) if finite.size else math.inf

    violations = []
    if declared_eta is not None:
        grads = p.gradient(pts)
        hessians = p.hessian(pts)
        for x, g, H in zip(pts, grads, hessians):
            M = H - declared_eta * np.outer(g, g)
            min_eig = float(np.linalg.eigvalsh(M)[0])
            hnorm = float(np.linalg.norm(H, 2))
            if min_eig < -PSD_TOL * (1.0 + hnorm):
                violations.append((x.copy(), min_eig))
        mode = "certify_declared"
    else:
        mode = "estimate"
    return EtaCertificate(points=pts, local_eta=local, global_eta=global_eta,
                          violations=tuple(violations), mode=mode,
                          declared_eta=declared_eta)


# ---------------------------------------------------------------------------
# certification point sets
# ---------------------------------------------------------------------------

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def _halton(n: int, d: int) -> np.ndarray:
    if d > len(_PRIMES):
        raise ValueError("halton grid supports up to 16 dimensions")
    out = np.empty((n, d))
    for j in range(d):
        base = _PRIMES[j]
        for i in range(n):
            f, r, k = 1.0, 0.0, i + 1
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, j] = r
    return out


def _grid_to_support(u: np.ndarray, support: SupportSpec) -> np.ndarray:
    """Map unit-cube low-discrepancy points into the support interior."""
    pad = 1e-3
    u = pad + (1.0 - 2.0 * pad) * u
    if support.kind == "box":
        lo, hi = support.lower, support.upper
        x = np.empty_like(u)
        for j in range(u.shape[1]):
            a, b = lo[j], hi[j]
            if np.isfinite(a) and np.isfinite(b):
                x[:, j] = a + (b - a) * u[:, j]
            elif np.isfinite(a):
                x[:, j] = a - np.log1p(-u[:, j])
            elif np.isfinite(b):
                x[:, j] = b + np.log1p(-u[:, j])
            else:
                x[:, j] = np.sqrt(2.0) * _erfinv_vec(2.0 * u[:, j] - 1.0)
        return x
    if support.kind == "full":
        return np.sqrt(2.0) * _erfinv_vec(2.0 * u - 1.0)
    if support.kind == "simplex":
        d = u.shape[1]
        # gaps of the order statistics of u are uniform on the solid simplex
        aug = np.sort(np.column_stack([np.zeros(len(u)), u]), axis=1)
        gaps = np.diff(np.column_stack([aug, np.ones(len(u))]), axis=1)
        return gaps[:, :d] * (1.0 - 2 * DOMAIN_MARGIN) + DOMAIN_MARGIN
    # membership: rejection-filter a hypercube around the interior point
    center, r = support.interior, support.radius or 1.0
    cand = center + r * (2.0 * u - 1.0)
    keep = support.contains(cand, DOMAIN_MARGIN)
    kept = cand[np.asarray(keep, bool)]
    return kept if len(kept) else np.atleast_2d(center)


def _erfinv_vec(y: np.ndarray) -> np.ndarray:
    from scipy.special import erfinv
    return erfinv(y)


def certification_points(p: Potential, n: int = 512, seed: int = 0,
                         grid_points: int = 128) -> np.ndarray:
    """Points for certification: draws from mu_V plus a low-discrepancy grid.

    Sampling concentrates the check where the measure lives; the
    deterministic Halton grid still probes the rest of the domain.
    """
    from . import samplers

    grid = _grid_to_support(_halton(grid_points, p.dimension), p.support)
    try:
        batch = samplers.sample_exact(p, n, seed)
        drawn = batch.points
    except samplers.UnsupportedExactSamplerError:
        cfg = samplers.ChainConfig(burn_in=500, n_chains=2)
        method = "mala" if p.support.kind in ("full", "box") else "hit_and_run"
        drawn = samplers.sample_mcmc(p, n, cfg, seed, method=method).points
    return np.vstack([drawn, grid])
