"""Reproducible sampling from mu_V = exp(-V)/Z.

Exact samplers cover the builtin families plus any 1-D potential on a
bounded interval (inverse CDF by quadrature).  MCMC covers the rest:
Metropolis-adjusted Langevin with reflection at open-interval margins,
its unadjusted variant, and hit-and-run for bounded convex bodies.

Randomness is counter-based (Philox) and keyed by (seed XOR chain, stream
purpose), so a chain's trajectory does not depend on how many other chains
run, and identical (seed, method, config) reproduce bit-identical batches.
"""

import math
from dataclasses import dataclass

import numpy as np

from .potentials import DOMAIN_MARGIN, Potential

METHODS = ("exact_inverse_cdf", "exact_gaussian", "exact_exponential",
           "mala", "ula", "hit_and_run")

_MASK64 = 0xFFFFFFFFFFFFFFFF
# stream purposes
_EXACT, _NORMALS, _UNIFORMS, _JITTER, _DIRECTIONS, _CHORD = range(6)

# mirror images per side retained in the folded proposal density; with the
# step clamp below, mass beyond these is under exp(-32)
_FOLD_IMAGES = 2


class UnsupportedExactSamplerError(ValueError):
    """No exact scheme is known for this potential family."""


class DivergenceError(RuntimeError):
    """A chain reached a state with non-finite potential or gradient."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class TuningFailureError(RuntimeError):
    """Step-size adaptation could not reach a workable acceptance rate."""


@dataclass(frozen=True)
class Diagnostics:
    acceptance_rate: float
    effective_sample_size: float
    burn_in: int
    thinning: int

    def to_dict(self) -> dict:
        return {"acceptance_rate": self.acceptance_rate,
                "effective_sample_size": self.effective_sample_size,
                "burn_in": self.burn_in, "thinning": self.thinning}


@dataclass(frozen=True)
class ChainConfig:
    step_size: float = 0.25
    burn_in: int = 10_000
    thinning: int = 1
    n_chains: int = 4
    target_acceptance: float = 0.574

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thinning < 1:
            raise ValueError("thinning must be a positive integer")
        if self.n_chains < 1:
            raise ValueError("n_chains must be a positive integer")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    v_values: np.ndarray
    seed: int
    method: str
    diagnostics: Diagnostics

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        vals = np.ascontiguousarray(np.asarray(self.v_values, dtype=float))
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "v_values", vals)

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self) -> str:
        d = self.points.shape[1]
        lines = [",".join([f"x{j}" for j in range(d)] + ["v"])]
        for row, v in zip(self.points, self.v_values):
            lines.append(",".join(repr(float(c)) for c in row) + "," + repr(float(v)))
        return "\n".join(lines) + "\n"


def _generator(seed: int, chain: int, purpose: int) -> np.random.Generator:
    key = ((int(seed) ^ int(chain)) & _MASK64) | (purpose << 64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# exact samplers
# ---------------------------------------------------------------------------

def _inverse_cdf_1d(p: Potential, n: int, gen: np.random.Generator,
                    grid_points: int = 4097) -> np.ndarray:
    support = p.support
    if p.dimension != 1 or support.kind != "box" or not support.is_bounded():
        raise UnsupportedExactSamplerError(
            "generic inverse-CDF sampling needs a bounded 1-D interval")
    lo = float(support.lower[0]) + (DOMAIN_MARGIN if support.lower_open[0] else 0.0)
    hi = float(support.upper[0]) - (DOMAIN_MARGIN if support.upper_open[0] else 0.0)
    ts = np.linspace(lo, hi, grid_points)
    logw = -np.asarray(p.value_fn(ts[:, None]))
    w = np.exp(logw - logw.max())
    h = ts[1] - ts[0]
    cum = np.concatenate([[0.0], np.cumsum((w[:-1] + w[1:]) * (h / 2.0))])
    u = gen.random(n) * cum[-1]
    idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, grid_points - 2)
    r = u - cum[idx]
    w0, w1 = w[idx], w[idx + 1]
    a = (w1 - w0) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        s_lin = r / (h * w0)
        disc = np.sqrt(np.maximum(w0 * w0 + 4.0 * a * r / h, 0.0))
        s_quad = (disc - w0) / (2.0 * a)
    s = np.where(np.abs(a) < 1e-300, s_lin, s_quad)
    s = np.clip(np.nan_to_num(s, nan=0.0), 0.0, 1.0)
    return (ts[idx] + s * h)[:, None]


def sample_exact(p: Potential, n: int, seed: int) -> SampleBatch:
    """Draw n i.i.d. samples by closed-form transforms or 1-D inverse CDF.

    Supported: gaussian, exponential, neg_log products, and any 1-D
    potential on a bounded interval.  neg_log uses X = sqrt(a^2 + U(b^2-a^2))
    since the density is proportional to x.
    """
    if n < 1:
        raise ValueError("n must be positive")
    gen = _generator(seed, 0, _EXACT)
    d = p.dimension
    if p.family == "gaussian":
        pts, method = gen.standard_normal((n, d)), "exact_gaussian"
    elif p.family == "exponential":
        pts, method = gen.standard_exponential((n, d)), "exact_exponential"
    elif p.family == "neg_log":
        a, b = p.params["interval"]
        u = gen.random((n, d))
        pts = np.sqrt(a * a + u * (b * b - a * a))
        # u = 0 would land exactly on the open lower bound
        pts = np.maximum(pts, a + DOMAIN_MARGIN)
        method = "exact_inverse_cdf"
    else:
        pts, method = _inverse_cdf_1d(p, n, gen), "exact_inverse_cdf"
    v = np.asarray(p.value_fn(pts), dtype=float)
    diag = Diagnostics(acceptance_rate=1.0, effective_sample_size=float(n),
                       burn_in=0, thinning=1)
    return SampleBatch(points=pts, v_values=v, seed=seed, method=method,
                       diagnostics=diag)


# ---------------------------------------------------------------------------
# MALA / ULA
# ---------------------------------------------------------------------------

def _box_walls(p: Potential):
    """Finite reflection walls (with open-bound margins), or None when the
    support is the full space or not box-shaped."""
    s = p.support
    if s.kind == "box":
        lo = np.where(s.lower_open, s.lower + DOMAIN_MARGIN, s.lower)
        hi = np.where(s.upper_open, s.upper - DOMAIN_MARGIN, s.upper)
        if np.any(np.isfinite(lo)) or np.any(np.isfinite(hi)):
            return lo, hi
    return None


def _fold(y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Reflect points into [lo, hi] coordinatewise (inf bounds = no wall)."""
    out = y.copy()
    both = np.isfinite(lo) & np.isfinite(hi)
    if np.any(both):
        width = hi - lo
        period = 2.0 * width
        t = np.mod(y - lo, period)
        folded = lo + np.minimum(t, period - t)
        out = np.where(both, folded, out)
    lo_only = np.isfinite(lo) & ~np.isfinite(hi)
    if np.any(lo_only):
        out = np.where(lo_only, lo + np.abs(y - lo), out)
    hi_only = ~np.isfinite(lo) & np.isfinite(hi)
    if np.any(hi_only):
        out = np.where(hi_only, hi - np.abs(hi - y), out)
    return out


def _folded_normal_logpdf(x: np.ndarray, mean: np.ndarray, var: np.ndarray,
                          lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """log density of the reflected Gaussian proposal, summed over coordinates.

    Images of x are x + k*P and mirror(x) + k*P where the mirror is about a
    finite wall and P is the two-wall period.  Coordinates without walls keep
    only the direct image (the others evaluate to -inf and drop out).
    """
    width = hi - lo
    period = np.where(np.isfinite(width), 2.0 * width, np.inf)
    mirror = np.where(np.isfinite(lo), 2.0 * lo - x,
                      np.where(np.isfinite(hi), 2.0 * hi - x, np.inf))
    ks = np.arange(-_FOLD_IMAGES, _FOLD_IMAGES + 1, dtype=float)
    with np.errstate(invalid="ignore"):
        shifts = ks * period[..., None]                   # (..., d, K)
    shifts = np.where(np.isnan(shifts), 0.0, shifts)      # 0 * inf at k = 0
    with np.errstate(invalid="ignore"):
        images = np.concatenate([x[..., None] + shifts,
                                 mirror[..., None] + shifts], axis=-1)
        z2 = (images - mean[..., None]) ** 2 / (2.0 * var[..., None])
    z2 = np.where(np.isnan(z2), np.inf, z2)
    log_terms = -0.5 * np.log(2.0 * np.pi * var[..., None]) - z2
    m = log_terms.max(axis=-1)
    m = np.where(np.isfinite(m), m, 0.0)
    per_coord = m + np.log(np.sum(np.exp(log_terms - m[..., None]), axis=-1))
    return per_coord.sum(axis=-1)


def _chain_counts(n: int, n_chains: int) -> list:
    return [n // n_chains + (1 if i < n % n_chains else 0) for i in range(n_chains)]


def _initial_states(p: Potential, cfg: ChainConfig, seed: int) -> np.ndarray:
    d = p.dimension
    states = np.empty((cfg.n_chains, d))
    interior = np.asarray(p.support.interior, dtype=float)
    for c in range(cfg.n_chains):
        jit = _generator(seed, c, _JITTER).standard_normal(d)
        w = 0.1
        x = interior + w * jit
        while not bool(p.support.contains(x, DOMAIN_MARGIN)):
            w *= 0.5
            x = interior + w * jit
            if w < 1e-14:
                x = interior.copy()
                break
        states[c] = x
    return states


def _langevin(p: Potential, n: int, cfg: ChainConfig, seed: int,
              adjust: bool) -> SampleBatch:
    C, d = cfg.n_chains, p.dimension
    counts = _chain_counts(n, C)
    walls = _box_walls(p)
    steps = cfg.burn_in + max(counts) * cfg.thinning
    normals = np.stack([_generator(seed, c, _NORMALS).standard_normal((steps, d))
                        for c in range(C)])
    unifs = np.stack([_generator(seed, c, _UNIFORMS).random(steps)
                      for c in range(C)])

    x = _initial_states(p, cfg, seed)
    v_x = np.asarray(p.value_fn(x), dtype=float)
    g_x = np.asarray(p.gradient_fn(x), dtype=float)

    tau = np.full(C, cfg.step_size)
    tau_cap = math.inf
    if walls is not None:
        lo, hi = walls
        finite = np.isfinite(lo) & np.isfinite(hi)
        if np.any(finite):
            tau_cap = float(np.min((hi[finite] - lo[finite]) ** 2) / 8.0)
        tau = np.minimum(tau, tau_cap)

    out = [np.empty((counts[c], d)) for c in range(C)]
    out_v = [np.empty(counts[c]) for c in range(C)]
    filled = np.zeros(C, dtype=int)
    acc_sum, acc_n = 0.0, 0
    tail_acc = []

    for step in range(steps):
        z = normals[:, step]
        u = unifs[:, step]
        sd = np.sqrt(2.0 * tau)[:, None]
        mean_fwd = x - tau[:, None] * g_x
        y_raw = mean_fwd + sd * z
        if walls is not None:
            lo, hi = walls
            y = _fold(y_raw, lo, hi)
            valid = np.ones(C, dtype=bool)
        else:
            y = y_raw
            valid = np.asarray(p.support.contains(y, DOMAIN_MARGIN), dtype=bool)

        v_y = np.full(C, np.inf)
        g_y = np.zeros((C, d))
        if np.any(valid):
            v_y[valid] = np.asarray(p.value_fn(y[valid]), dtype=float)
            g_y[valid] = np.asarray(p.gradient_fn(y[valid]), dtype=float)
        if not np.all(np.isfinite(v_y[valid])) or not np.all(np.isfinite(g_y[valid])):
            raise DivergenceError("non-finite potential or gradient at proposal",
                                  last_state=x.copy())

        if adjust:
            var = (2.0 * tau)[:, None] * np.ones((1, d))
            if walls is not None:
                logq_fwd = _folded_normal_logpdf(y, mean_fwd, var, lo, hi)
                mean_bwd = y - tau[:, None] * g_y
                logq_bwd = _folded_normal_logpdf(x, mean_bwd, var, lo, hi)
            else:
                logq_fwd = -0.5 * np.sum((y - mean_fwd) ** 2 / var
                                         + np.log(2.0 * np.pi * var), axis=1)
                mean_bwd = y - tau[:, None] * g_y
                logq_bwd = -0.5 * np.sum((x - mean_bwd) ** 2 / var
                                         + np.log(2.0 * np.pi * var), axis=1)
            with np.errstate(invalid="ignore"):
                log_alpha = (v_x - v_y) + logq_bwd - logq_fwd
            log_alpha = np.where(valid, np.nan_to_num(log_alpha, nan=-np.inf),
                                 -np.inf)
            acc_prob = np.exp(np.minimum(0.0, log_alpha))
            accept = u < acc_prob
        else:
            accept = valid
            acc_prob = valid.astype(float)

        x = np.where(accept[:, None], y, x)
        v_x = np.where(accept, v_y, v_x)
        g_x = np.where(accept[:, None], g_y, g_x)

        if step < cfg.burn_in:
            if adjust:
                gamma = 1.0 / (10.0 + step) ** 0.6
                tau = tau * np.exp(gamma * (acc_prob - cfg.target_acceptance))
                tau = np.clip(tau, 1e-9, tau_cap if math.isfinite(tau_cap) else 1e6)
                if step >= cfg.burn_in - 500:
                    tail_acc.append(float(acc_prob.mean()))
        else:
            post = step - cfg.burn_in
            acc_sum += float(acc_prob.sum())
            acc_n += C
            if post % cfg.thinning == 0:
                k = post // cfg.thinning
                for c in range(C):
                    if k < counts[c]:
                        out[c][k] = x[c]
                        out_v[c][k] = v_x[c]
                        filled[c] = k + 1

    if adjust and cfg.burn_in >= 500 and tail_acc and float(np.mean(tail_acc)) < 0.05:
        raise TuningFailureError(
            f"acceptance {np.mean(tail_acc):.3f} < 0.05 after step-size tuning")

    points = np.vstack([out[c][:counts[c]] for c in range(C)])
    v = np.concatenate([out_v[c][:counts[c]] for c in range(C)])
    ess_total = float(sum(ess(out_v[c][:counts[c]]) for c in range(C)
                          if counts[c] >= 10))
    diag = Diagnostics(acceptance_rate=acc_sum / max(acc_n, 1),
                       effective_sample_size=ess_total or float(n),
                       burn_in=cfg.burn_in, thinning=cfg.thinning)
    return SampleBatch(points=points, v_values=v, seed=seed,
                       method="mala" if adjust else "ula", diagnostics=diag)


# ---------------------------------------------------------------------------
# hit-and-run
# ---------------------------------------------------------------------------

def _chord(p: Potential, x: np.ndarray, u: np.ndarray) -> tuple:
    """Signed extent (t_lo, t_hi) of {x + t*u} inside the support interior."""
    s = p.support
    m = DOMAIN_MARGIN
    if s.kind == "box":
        lo = np.where(s.lower_open, s.lower + m, s.lower)
        hi = np.where(s.upper_open, s.upper - m, s.upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - x) / u
            t2 = (hi - x) / u
        t_low = np.where(u > 0, t1, np.where(u < 0, t2, -np.inf))
        t_high = np.where(u > 0, t2, np.where(u < 0, t1, np.inf))
        return float(np.max(t_low)), float(np.min(t_high))
    if s.kind == "simplex":
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (m - x) / u
        t_low = np.where(u > 0, t1, -np.inf)
        t_high = np.where(u < 0, t1, np.inf)
        t_lo, t_hi = float(np.max(t_low)), float(np.min(t_high))
        su = float(u.sum())
        budget = (1.0 - m) - float(x.sum())
        if su > 0:
            t_hi = min(t_hi, budget / su)
        elif su < 0:
            t_lo = max(t_lo, budget / su)
        return t_lo, t_hi
    # membership: bisect outward from x within the bounding radius
    radius = s.radius
    if radius is None:
        raise ValueError("hit-and-run needs a bounded support")

    def edge(sign):
        t_in, t_out = 0.0, sign * 2.0 * radius
        for _ in range(60):
            mid = 0.5 * (t_in + t_out)
            if bool(s.contains(x + mid * u, m)):
                t_in = mid
            else:
                t_out = mid
        return t_in

    return edge(-1.0), edge(1.0)


def _hit_and_run(p: Potential, n: int, cfg: ChainConfig, seed: int,
                 grid_points: int = 257) -> SampleBatch:
    if not p.support.is_bounded():
        raise ValueError("hit-and-run requires a bounded convex support")
    C, d = cfg.n_chains, p.dimension
    counts = _chain_counts(n, C)
    steps = cfg.burn_in + max(counts) * cfg.thinning
    dirs = np.stack([_generator(seed, c, _DIRECTIONS).standard_normal((steps, d))
                     for c in range(C)])
    unifs = np.stack([_generator(seed, c, _CHORD).random(steps)
                      for c in range(C)])

    x = _initial_states(p, cfg, seed)
    out = [np.empty((counts[c], d)) for c in range(C)]
    out_v = [np.empty(counts[c]) for c in range(C)]
    G = grid_points

    for step in range(steps):
        z = dirs[:, step]
        u_dir = z / np.linalg.norm(z, axis=1, keepdims=True)
        ts = np.empty((C, G))
        for c in range(C):
            t_lo, t_hi = _chord(p, x[c], u_dir[c])
            ts[c] = np.linspace(t_lo, t_hi, G)
        pts = x[:, None, :] + ts[:, :, None] * u_dir[:, None, :]
        logw = -np.asarray(p.value_fn(pts.reshape(C * G, d))).reshape(C, G)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        h = ts[:, 1] - ts[:, 0]
        seg = (w[:, :-1] + w[:, 1:]) * (h[:, None] / 2.0)
        cum = np.concatenate([np.zeros((C, 1)), np.cumsum(seg, axis=1)], axis=1)
        target = unifs[:, step] * cum[:, -1]
        idx = np.clip((cum <= target[:, None]).sum(axis=1) - 1, 0, G - 2)
        rows = np.arange(C)
        r = target - cum[rows, idx]
        w0, w1 = w[rows, idx], w[rows, idx + 1]
        a = (w1 - w0) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            s_lin = r / (h * w0)
            disc = np.sqrt(np.maximum(w0 * w0 + 4.0 * a * r / h, 0.0))
            s_quad = (disc - w0) / (2.0 * a)
        sfrac = np.where(np.abs(a) < 1e-300, s_lin, s_quad)
        sfrac = np.clip(np.nan_to_num(sfrac, nan=0.5), 0.0, 1.0)
        t_new = ts[rows, idx] + sfrac * h
        x = x + t_new[:, None] * u_dir

        if step >= cfg.burn_in:
            post = step - cfg.burn_in
            if post % cfg.thinning == 0:
                k = post // cfg.thinning
                v_now = np.asarray(p.value_fn(x), dtype=float)
                for c in range(C):
                    if k < counts[c]:
                        out[c][k] = x[c]
                        out_v[c][k] = v_now[c]

    points = np.vstack([out[c][:counts[c]] for c in range(C)])
    v = np.concatenate([out_v[c][:counts[c]] for c in range(C)])
    ess_total = float(sum(ess(out_v[c][:counts[c]]) for c in range(C)
                          if counts[c] >= 10))
    diag = Diagnostics(acceptance_rate=1.0,
                       effective_sample_size=ess_total or float(n),
                       burn_in=cfg.burn_in, thinning=cfg.thinning)
    return SampleBatch(points=points, v_values=v, seed=seed,
                       method="hit_and_run", diagnostics=diag)


def sample_mcmc(p: Potential, n: int, cfg: ChainConfig | None = None,
                seed: int = 0, method: str = "mala") -> SampleBatch:
    """Run n_chains Markov chains and return n thinned post-burn-in samples.

    MALA tunes its step size toward cfg.target_acceptance during burn-in only
    (Robbins-Monro on the log step), then freezes it so the retained samples
    form a Markov chain.
    """
    if n < 1:
        raise ValueError("n must be positive")
    cfg = cfg or ChainConfig()
    if method == "mala":
        return _langevin(p, n, cfg, seed, adjust=True)
    if method == "ula":
        return _langevin(p, n, cfg, seed, adjust=False)
    if method == "hit_and_run":
        return _hit_and_run(p, n, cfg, seed)
    raise ValueError(f"unknown MCMC method {method!r}")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def ess(sequence) -> float:
    """Effective sample size by initial-positive-sequence autocorrelation.

    Sums autocorrelation pair sums (Geyer) while they stay positive; a
    constant sequence returns its length (zero autocorrelation by
    convention).  The result lies in [1, n].
    """
    x = np.asarray(sequence, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("sequence must have length >= 10")
    x = x - x.mean()
    c0 = float(x @ x) / n
    if c0 == 0.0:
        return float(n)
    m = 1
    while m < 2 * n:
        m *= 2
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f))[:n].real / n
    rho = acov / acov[0]
    tau = 0.0
    k = 0
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 2
    tau -= 1.0
    tau = max(tau, 1.0)
    return float(min(max(n / tau, 1.0), n))


def ks_statistic(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
