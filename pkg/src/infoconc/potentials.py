"""Convex potentials and the supports they live on.

A potential V is a convex function defining the probability measure with
density proportional to exp(-V) on its support.  Every potential here
exposes (batched) value, gradient and Hessian evaluation plus an optional
declared exp-concavity parameter eta, meaning exp(-eta*V) is concave.

Evaluation is pure: instances are immutable after construction and safe to
share across workers.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

# Interior margin used to represent open interval bounds.  Evaluating a
# potential outside the margin is an error rather than +/- infinity, which
# keeps values like -log(x) finite everywhere they are legal to query.
DOMAIN_MARGIN = 1e-12

_FD_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)


class PotentialError(ValueError):
    """Bad construction parameters (unknown name, shape/PSD violations)."""


class DomainError(ValueError):
    """A point outside the support (interior margin included) was evaluated."""


# ---------------------------------------------------------------------------
# supports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportSpec:
    """Convex support description.

    kind is one of "full", "box", "simplex", "membership".  Boxes carry
    per-coordinate bounds with open/closed flags; the simplex of dimension d
    is the open solid simplex {x in R^d : x_i > 0, sum(x) < 1}; membership
    supports wrap an arbitrary convex indicator with a known interior point
    and a bounding radius (needed for chord searches).
    """

    kind: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    lower_open: np.ndarray | None = None
    upper_open: np.ndarray | None = None
    simplex_dim: int | None = None
    member: Callable[[np.ndarray], np.ndarray] | None = None
    interior: np.ndarray | None = None
    radius: float | None = None

    @staticmethod
    def full(d: int) -> "SupportSpec":
        return SupportSpec(kind="full", interior=np.zeros(d))

    @staticmethod
    def box(lower, upper, lower_open=None, upper_open=None) -> "SupportSpec":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise PotentialError("box bounds must be 1-D arrays of equal length")
        if np.any(lower >= upper):
            raise PotentialError("box bounds must satisfy lower < upper")
        d = lower.size
        lo_open = np.full(d, True) if lower_open is None else np.asarray(lower_open, bool)
        up_open = np.full(d, True) if upper_open is None else np.asarray(upper_open, bool)
        # infinite bounds are necessarily open
        lo_open = lo_open | ~np.isfinite(lower)
        up_open = up_open | ~np.isfinite(upper)
        with np.errstate(invalid="ignore"):
            interior = np.where(
                np.isfinite(lower) & np.isfinite(upper), (lower + upper) / 2.0,
                np.where(np.isfinite(lower), lower + 1.0,
                         np.where(np.isfinite(upper), upper - 1.0, 0.0)))
        return SupportSpec(kind="box", lower=lower, upper=upper,
                           lower_open=lo_open, upper_open=up_open,
                           interior=interior)

    @staticmethod
    def simplex(d: int) -> "SupportSpec":
        if d < 1:
            raise PotentialError("simplex dimension must be >= 1")
        return SupportSpec(kind="simplex", simplex_dim=d,
                           interior=np.full(d, 1.0 / (d + 1)))

    @staticmethod
    def membership(member, interior, radius: float) -> "SupportSpec":
        interior = np.asarray(interior, dtype=float)
        spec = SupportSpec(kind="membership", member=member,
                           interior=interior, radius=float(radius))
        if not bool(spec.contains(interior)):
            raise PotentialError("interior point fails its own membership predicate")
        return spec

    # -- queries ------------------------------------------------------------

    @property
    def dimension(self) -> int:
        if self.kind == "box":
            return self.lower.size
        if self.kind == "simplex":
            return self.simplex_dim
        return self.interior.size

    def contains(self, x: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Vectorized membership test; margin shrinks open bounds inward."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pts = np.atleast_2d(x)
        if self.kind == "full":
            ok = np.all(np.isfinite(pts), axis=1)
        elif self.kind == "box":
            lo = np.where(self.lower_open, self.lower + margin, self.lower)
            hi = np.where(self.upper_open, self.upper - margin, self.upper)
            ok = np.all((pts >= lo) & (pts <= hi), axis=1)
        elif self.kind == "simplex":
            ok = np.all(pts >= margin, axis=1) & (pts.sum(axis=1) <= 1.0 - margin)
        else:
            ok = np.asarray(self.member(pts), dtype=bool).reshape(len(pts))
        return bool(ok[0]) if squeeze else ok

    def is_bounded(self) -> bool:
        if self.kind == "box":
            return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))
        if self.kind == "simplex":
            return True
        if self.kind == "membership":
            return self.radius is not None
        return False

    def intersect(self, other: "SupportSpec") -> "SupportSpec":
        if self.dimension != other.dimension:
            raise PotentialError("support dimension mismatch")
        if self.kind == "full":
            return other
        if other.kind == "full":
            return self
        if self.kind == "box" and other.kind == "box":
            lower = np.maximum(self.lower, other.lower)
            upper = np.minimum(self.upper, other.upper)
            if np.any(lower >= upper):
                raise PotentialError("empty support intersection")
            lo_open = np.where(self.lower > other.lower, self.lower_open,
                               np.where(self.lower < other.lower, other.lower_open,
                                        self.lower_open | other.lower_open))
            up_open = np.where(self.upper < other.upper, self.upper_open,
                               np.where(self.upper > other.upper, other.upper_open,
                                        self.upper_open | other.upper_open))
            return SupportSpec.box(lower, upper, lo_open, up_open)
        if self.kind == "simplex" and other.kind == "simplex":
            return self
        # generic fallback: conjunction of predicates
        a, b = self, other
        member = lambda pts: a.contains(pts, DOMAIN_MARGIN) & b.contains(pts, DOMAIN_MARGIN)
        for candidate in (self.interior, other.interior,
                          (self.interior + other.interior) / 2.0):
            if bool(member(np.atleast_2d(candidate))[0]):
                radii = [s.radius for s in (a, b) if s.radius is not None]
                radius = min(radii) if radii else _bounding_radius(a, b)
                return SupportSpec(kind="membership", member=member,
                                   interior=np.asarray(candidate, float),
                                   radius=radius)
        raise PotentialError("empty support intersection")


def _bounding_radius(a: SupportSpec, b: SupportSpec) -> float | None:
    for s in (a, b):
        if s.kind == "box" and s.is_bounded():
            return float(np.linalg.norm(s.upper - s.lower))
        if s.kind == "simplex":
            return 2.0
    return None


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def fd_gradient(value_fn, x: np.ndarray) -> np.ndarray:
    """Central differences with per-coordinate step eps^(1/3)*(1+|x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = _FD_EPS * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (value_fn(xp) - value_fn(xm)) / (2.0 * h)
    return g


def fd_hessian(value_fn, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.size
    h = _FD_EPS * (1.0 + np.abs(x))
    H = np.zeros((d, d))
    f0 = value_fn(x)
    for i in range(d):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        H[i, i] = (value_fn(xp) - 2.0 * f0 + value_fn(xm)) / h[i] ** 2
        for j in range(i + 1, d):
            xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
            xpp[[i, j]] += (h[i], h[j])
            xpm[[i, j]] += (h[i], -h[j])
            xmp[[i, j]] += (-h[i], h[j])
            xmm[[i, j]] += (-h[i], -h[j])
            H[i, j] = H[j, i] = (value_fn(xpp) - value_fn(xpm)
                                 - value_fn(xmp) + value_fn(xmm)) / (4.0 * h[i] * h[j])
    return H


# ---------------------------------------------------------------------------
# the potential abstraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """A convex potential with batched value/gradient/Hessian evaluation.

    value_fn maps (n, d) arrays to (n,) values; gradient_fn to (n, d);
    hessian_fn to (n, d, d).  When hessian_fn is None a central finite
    difference of the gradient is used.  smooth_part/nonsmooth_part record
    a decomposition V = V1 + V2 when one exists; gradient and Hessian then
    refer to the smooth part only.
    """

    dimension: int
    support: SupportSpec
    value_fn: Callable
    gradient_fn: Callable
    hessian_fn: Callable | None = None
    known_eta: float | None = None
    smooth_part: "Potential | None" = None
    nonsmooth_part: "Potential | None" = None
    family: str = "custom"
    params: dict = field(default_factory=dict)
    v_mean: float | None = None
    kinks: tuple = ()

    # -- evaluation ----------------------------------------------------------

    def _check(self, x: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dimension:
            raise DomainError(f"expected dimension {self.dimension}, got {pts.shape[1]}")
        ok = self.support.contains(pts, DOMAIN_MARGIN)
        if not np.all(ok):
            bad = pts[~np.asarray(ok, bool)][0]
            raise DomainError(f"point {bad} outside support ({self.support.kind})")
        return pts

    def value(self, x) -> float | np.ndarray:
        pts = self._check(x)
        out = np.asarray(self.value_fn(pts), dtype=float)
        return float(out[0]) if np.asarray(x).ndim == 1 else out

    def gradient(self, x) -> np.ndarray:
        pts = self._check(x)
        out = np.asarray(self.gradient_fn(pts), dtype=float)
        return out[0] if np.asarray(x).ndim == 1 else out

    def hessian(self, x) -> np.ndarray:
        pts = self._check(x)
        if self.hessian_fn is not None:
            out = np.asarray(self.hessian_fn(pts), dtype=float)
        else:
            out = np.stack([
                fd_hessian(lambda p: float(self.value_fn(np.atleast_2d(p))[0]), pt)
                for pt in pts])
        return out[0] if np.asarray(x).ndim == 1 else out

    def differentiable_at(self, x) -> bool:
        """False on the kink set of the nonsmooth part (if any)."""
        if not self.kinks:
            return True
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return not bool(np.any(np.min(np.abs(x[:, None] - np.asarray(self.kinks)), axis=1) < 1e-12))


# ---------------------------------------------------------------------------
# builtin families
# ---------------------------------------------------------------------------

def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _gaussian(d: int) -> Potential:
    return Potential(
        dimension=d, support=SupportSpec.full(d),
        value_fn=lambda x: 0.5 * np.sum(x * x, axis=1),
        gradient_fn=lambda x: x.copy(),
        hessian_fn=lambda x: np.broadcast_to(np.eye(d), (len(x), d, d)).copy(),
        known_eta=None,  # exp(-eta*|x|^2/2) is not concave on an unbounded domain
        family="gaussian", params={"d": d}, v_mean=d / 2.0)


def _exponential(d: int) -> Potential:
    support = SupportSpec.box(np.zeros(d), np.full(d, np.inf),
                              lower_open=np.full(d, False))
    return Potential(
        dimension=d, support=support,
        value_fn=lambda x: np.sum(x, axis=1),
        gradient_fn=lambda x: np.ones_like(x),
        hessian_fn=lambda x: np.zeros((len(x), d, d)),
        known_eta=0.0,  # linear potential: not exp-concave for any eta > 0
        family="exponential", params={"d": d}, v_mean=float(d))


def _neg_log_mean(a: float, b: float) -> float:
    # E[-log X] for density 2x/(b^2-a^2) on (a, b); a^2*log(a) -> 0 as a -> 0
    ta = 0.0 if a == 0.0 else a * a * (0.5 * math.log(a) - 0.25)
    tb = b * b * (0.5 * math.log(b) - 0.25)
    return -2.0 * (tb - ta) / (b * b - a * a)


def _neg_log(d: int, interval=(0.0, 1.0)) -> Potential:
    a, b = float(interval[0]), float(interval[1])
    if not (0.0 <= a < b):
        raise PotentialError("neg_log interval must satisfy 0 <= a < b")
    support = SupportSpec.box(np.full(d, a), np.full(d, b))

    def hess(x):
        H = np.zeros((len(x), d, d))
        idx = np.arange(d)
        H[:, idx, idx] = 1.0 / x ** 2
        return H

    return Potential(
        dimension=d, support=support,
        value_fn=lambda x: -np.sum(np.log(x), axis=1),
        gradient_fn=lambda x: -1.0 / x,
        hessian_fn=hess,
        known_eta=1.0 / d,  # <H^{-1}g, g> = d exactly, at every point
        family="neg_log", params={"d": d, "interval": (a, b)},
        v_mean=d * _neg_log_mean(a, b))


def _logistic(rows) -> Potential:
    A = np.atleast_2d(np.asarray(rows, dtype=float))
    m, d = A.shape

    def value(x):
        return np.sum(_softplus(-x @ A.T), axis=1)

    def grad(x):
        s = x @ A.T
        return -_sigmoid(-s) @ A

    def hess(x):
        s = x @ A.T                      # (n, m)
        w = _sigmoid(s) * _sigmoid(-s)   # (n, m)
        return np.einsum("nm,mi,mj->nij", w, A, A)

    return Potential(dimension=d, support=SupportSpec.full(d),
                     value_fn=value, gradient_fn=grad, hessian_fn=hess,
                     known_eta=None, family="logistic", params={"rows": A})


def _portfolio(rows) -> Potential:
    A = np.atleast_2d(np.asarray(rows, dtype=float))
    m, k = A.shape
    if k < 2:
        raise PotentialError("portfolio_log_loss needs at least 2 assets")
    if np.any(A <= 0):
        raise PotentialError("portfolio returns must be strictly positive")
    d = k - 1
    # weights w = (x, 1 - sum x); <a, w> = <b, x> + c with b = a[:d] - a[d]
    B = A[:, :d] - A[:, d:]
    c = A[:, d]

    def value(x):
        return -np.sum(np.log(x @ B.T + c), axis=1)

    def grad(x):
        s = x @ B.T + c
        return -(1.0 / s) @ B

    def hess(x):
        s = x @ B.T + c
        return np.einsum("nm,mi,mj->nij", 1.0 / s ** 2, B, B)

    return Potential(dimension=d, support=SupportSpec.simplex(d),
                     value_fn=value, gradient_fn=grad, hessian_fn=hess,
                     known_eta=1.0 / m,  # each -log<a_i, w> term is 1-exp-concave
                     family="portfolio_log_loss", params={"rows": A})


def _quadratic(Q, b=None) -> Potential:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise PotentialError("Q must be a square matrix")
    d = Q.shape[0]
    if not np.allclose(Q, Q.T, rtol=1e-10, atol=1e-12):
        raise PotentialError("Q must be symmetric")
    eigs = np.linalg.eigvalsh(Q)
    if eigs[0] < -1e-8 * max(1.0, eigs[-1]):
        raise PotentialError("Q must be positive semidefinite")
    bvec = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    v_mean = None
    if eigs[0] > 1e-10 * max(1.0, eigs[-1]):
        v_mean = d / 2.0 - 0.5 * float(bvec @ np.linalg.solve(Q, bvec))
    return Potential(
        dimension=d, support=SupportSpec.full(d),
        value_fn=lambda x: 0.5 * np.sum((x @ Q) * x, axis=1) + x @ bvec,
        gradient_fn=lambda x: x @ Q + bvec,
        hessian_fn=lambda x: np.broadcast_to(Q, (len(x), d, d)).copy(),
        known_eta=None, family="quadratic", params={"Q": Q, "b": bvec},
        v_mean=v_mean)


_BUILTINS = {
    "gaussian": _gaussian,
    "exponential": _exponential,
    "neg_log": _neg_log,
    "logistic": _logistic,
    "portfolio_log_loss": _portfolio,
    "quadratic": _quadratic,
}

BUILTIN_NOTES = {
    "gaussian": "V(x) = |x|^2/2 on R^d; params d; eta unset on unbounded support",
    "exponential": "V(x) = sum(x) on [0,inf)^d; params d; eta=0, not exp-concave",
    "neg_log": "V(x) = -sum(log x_i) on (0,1)^d; params d, interval; eta=1/d (1-D: eta=1)",
    "logistic": "V(x) = sum_i log(1+exp(-<a_i,x>)); params rows; eta unset on unbounded support",
    "portfolio_log_loss": "V(x) = -sum_i log<a_i, w(x)> on the simplex; params rows; eta=1/m",
    "quadratic": "V(x) = x'Qx/2 + b'x on R^d; params Q, b; eta unset on unbounded support",
}


def make_builtin(name: str, **params) -> Potential:
    """Construct a builtin potential by name.

    Names: gaussian(d), exponential(d), neg_log(d, interval), logistic(rows),
    portfolio_log_loss(rows), quadratic(Q, b).
    """
    if name not in _BUILTINS:
        raise PotentialError(f"unknown builtin potential {name!r}; "
                             f"choices: {sorted(_BUILTINS)}")
    try:
        return _BUILTINS[name](**params)
    except TypeError as exc:
        raise PotentialError(f"bad parameters for {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# nonsmooth pieces
# ---------------------------------------------------------------------------

def indicator(support: SupportSpec) -> Potential:
    """Convex indicator: value 0 inside the support, never evaluated outside."""
    d = support.dimension
    return Potential(
        dimension=d, support=support,
        value_fn=lambda x: np.zeros(len(x)),
        gradient_fn=lambda x: np.zeros_like(x),
        hessian_fn=lambda x: np.zeros((len(x), d, d)),
        known_eta=None, family="indicator", params={"kind": support.kind})


def l1_potential(d: int, weight: float = 1.0) -> Potential:
    """V(x) = weight * sum |x_i|; nondifferentiable on coordinate hyperplanes."""
    if weight <= 0:
        raise PotentialError("weight must be positive")
    return Potential(
        dimension=d, support=SupportSpec.full(d),
        value_fn=lambda x: weight * np.sum(np.abs(x), axis=1),
        gradient_fn=lambda x: weight * np.sign(x),
        hessian_fn=lambda x: np.zeros((len(x), d, d)),
        known_eta=None, family="l1", params={"d": d, "weight": weight},
        kinks=(0.0,))


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

def compose_sum(parts) -> Potential:
    """Sum of exp-concave potentials.

    parts is a list of (Potential, eta_i) pairs (or bare Potentials whose
    known_eta is used).  The sum is exp-concave with 1/eta = sum_i 1/eta_i.
    """
    if not parts:
        raise PotentialError("compose_sum needs at least one part")
    pots, etas = [], []
    for part in parts:
        if isinstance(part, Potential):
            p, eta = part, part.known_eta
        else:
            p, eta = part
        if eta is None or eta <= 0:
            raise PotentialError("every part needs a positive exp-concavity parameter")
        pots.append(p)
        etas.append(float(eta))
    d = pots[0].dimension
    if any(p.dimension != d for p in pots):
        raise PotentialError("dimension mismatch between parts")
    support = pots[0].support
    for p in pots[1:]:
        support = support.intersect(p.support)
    eta = 1.0 / sum(1.0 / e for e in etas)

    def value(x):
        return sum(np.asarray(p.value_fn(x)) for p in pots)

    def grad(x):
        return sum(np.asarray(p.gradient_fn(x)) for p in pots)

    def hess(x):
        return sum(np.asarray(p.hessian_fn(x)) for p in pots)

    if any(p.hessian_fn is None for p in pots):
        hess = None
    return Potential(dimension=d, support=support, value_fn=value,
                     gradient_fn=grad, hessian_fn=hess, known_eta=eta,
                     family="composite",
                     params={"families": tuple(p.family for p in pots),
                             "etas": tuple(etas)})


def add_nonsmooth(base: Potential, nonsmooth: Potential) -> Potential:
    """V = V1 + V2 with V1 twice differentiable and V2 convex, maybe an indicator.

    Value is the sum; gradient and Hessian delegate to the smooth base, which
    is the object concentration statements are made about.
    """
    if base.dimension != nonsmooth.dimension:
        raise PotentialError("dimension mismatch")
    support = base.support.intersect(nonsmooth.support)

    def value(x):
        return np.asarray(base.value_fn(x)) + np.asarray(nonsmooth.value_fn(x))

    return Potential(
        dimension=base.dimension, support=support,
        value_fn=value, gradient_fn=base.gradient_fn, hessian_fn=base.hessian_fn,
        known_eta=base.known_eta, smooth_part=base, nonsmooth_part=nonsmooth,
        family=f"{base.family}+{nonsmooth.family}",
        params={"base": base.family, "nonsmooth": nonsmooth.family},
        kinks=nonsmooth.kinks)


def embed(p: Potential, dim: int, coords) -> Potential:
    """Lift a potential onto a subset of coordinates of a larger space.

    The lifted potential depends only on x[coords]; its support is the box
    constraint of p on those coordinates (p must have box or full support).
    Exp-concavity is preserved: the flat directions add zero blocks to both
    sides of the defining matrix inequality.
    """
    coords = list(coords)
    if len(coords) != p.dimension:
        raise PotentialError("coords must list one target coordinate per source dim")
    if max(coords) >= dim or min(coords) < 0:
        raise PotentialError("coords out of range")
    if p.support.kind not in ("full", "box"):
        raise PotentialError("embed requires box or full support")
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    lo_open = np.full(dim, True)
    up_open = np.full(dim, True)
    if p.support.kind == "box":
        lower[coords] = p.support.lower
        upper[coords] = p.support.upper
        lo_open[coords] = p.support.lower_open
        up_open[coords] = p.support.upper_open
    support = SupportSpec.box(lower, upper, lo_open, up_open)

    def value(x):
        return np.asarray(p.value_fn(x[:, coords]))

    def grad(x):
        g = np.zeros_like(x)
        g[:, coords] = np.asarray(p.gradient_fn(x[:, coords]))
        return g

    def hess(x):
        H = np.zeros((len(x), dim, dim))
        Hs = np.asarray(p.hessian_fn(x[:, coords]))
        for a, ca in enumerate(coords):
            H[:, ca, coords] = Hs[:, a, :]
        return H

    return Potential(dimension=dim, support=support, value_fn=value,
                     gradient_fn=grad,
                     hessian_fn=None if p.hessian_fn is None else hess,
                     known_eta=p.known_eta, family=f"embedded({p.family})",
                     params={"coords": tuple(coords), "inner": p.family})


def scale(p: Potential, c: float) -> Potential:
    """c*V for c > 0; if V is eta-exp-concave then c*V is (eta/c)-exp-concave."""
    if c <= 0:
        raise PotentialError("scale factor must be positive")
    eta = None if p.known_eta is None else p.known_eta / c
    hess = None
    if p.hessian_fn is not None:
        hess = lambda x: c * np.asarray(p.hessian_fn(x))
    return replace(
        p,
        value_fn=lambda x: c * np.asarray(p.value_fn(x)),
        gradient_fn=lambda x: c * np.asarray(p.gradient_fn(x)),
        hessian_fn=hess,
        known_eta=eta, family=f"scaled({p.family})",
        params={"inner": p.family, "factor": c}, v_mean=None)
