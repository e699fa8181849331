"""Empirical moments/tails of the potential and the closed-form bounds.

For X ~ mu_V the potential V(X) is the information content up to the
additive constant log(int exp(-V)), so every estimator here centers at the
empirical mean of the cached V values and the constant cancels.

Bound kinds:
  log_concave   c1 * exp(-c2 * min(t, t^2/d))           (baseline, d-dim)
  exp_concave   6 * exp(-max(sqrt(eta), eta) * t)       (dimension-free)
  iid_chernoff  2 * exp(-N * (sqrt(eta) * t - log 3))   (means of N draws)
  mgf_product   truncated product bound on E exp(lambda (V - E V))
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .samplers import SampleBatch

CONFIDENCE_LEVEL = 0.99  # one-sided Clopper-Pearson level for tail UCBs


@dataclass(frozen=True)
class BoundSpec:
    kind: str
    params: dict
    _fn: object = field(repr=False)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        out = self._fn(t)
        return float(out) if out.ndim == 0 else out

    @property
    def label(self) -> str:
        inner = ";".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.kind}[{inner}]"


def _fmt(v):
    if isinstance(v, float) and v == int(v):
        return str(int(v))
    return f"{v:g}" if isinstance(v, float) else str(v)


def bound_log_concave(d: int, c1: float = 1.0, c2: float = 1.0) -> BoundSpec:
    """Baseline tail bound c1*exp(-c2*min(t, t^2/d)) for d-dim log-concave V.

    The universal constants are unspecified; c1 = c2 = 1 are illustrative
    defaults and reports must flag them as such.
    """
    if d < 1 or c1 <= 0 or c2 <= 0:
        raise ValueError("need d >= 1 and positive c1, c2")
    fn = lambda t: c1 * np.exp(-c2 * np.minimum(t, t * t / d))
    return BoundSpec(kind="log_concave", params={"d": d, "c1": c1, "c2": c2}, _fn=fn)


def bound_exp_concave(eta: float) -> BoundSpec:
    """Dimension-free tail bound 6*exp(-max(sqrt(eta), eta)*t)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    rate = max(math.sqrt(eta), eta)
    fn = lambda t: 6.0 * np.exp(-rate * t)
    return BoundSpec(kind="exp_concave", params={"eta": eta}, _fn=fn)


def bound_iid(eta: float, N: int) -> BoundSpec:
    """Chernoff bound 2*exp(-N*(sqrt(eta)*t - log 3)) for means of N draws.

    Vacuous (value > 1) for t below log(3)/sqrt(eta); reported as-is.
    """
    if eta <= 0 or N < 1:
        raise ValueError("need eta > 0 and N >= 1")
    fn = lambda t: 2.0 * np.exp(-N * (math.sqrt(eta) * t - math.log(3.0)))
    return BoundSpec(kind="iid_chernoff", params={"eta": eta, "N": N}, _fn=fn)


def mgf_product_bound(lam: float, eta: float, K: int) -> float:
    """Product bound on the centered MGF, truncated to K factors.

    Evaluates prod_{k=1..K} (1 - lam^2/(4^(k+1) eta))^(-2^k) in log space and
    adds a rigorous geometric tail for the dropped factors, using
    -log(1-u) <= u / (1 - u_max).  Nondecreasing in K toward the limit; at
    lam = sqrt(eta) the limit is 1.2900 <= 3 for every eta.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if K < 1:
        raise ValueError("K must be >= 1")
    if lam * lam >= 16.0 * eta:
        raise ValueError("divergence: need lam^2 < 16*eta")
    if lam == 0.0:
        return 1.0
    r = lam * lam / eta
    log_m = 0.0
    for k in range(1, K + 1):
        u = r / 4.0 ** (k + 1)
        log_m += 2.0 ** k * (-math.log1p(-u))
    u_max = r / 4.0 ** (K + 2)
    tail = (r / 4.0) * 2.0 ** (-K) / (1.0 - u_max)
    return math.exp(log_m + tail)


def bound_mgf_product(eta: float, K: int = 60) -> BoundSpec:
    fn = np.vectorize(lambda lam: mgf_product_bound(float(lam), eta, K))
    return BoundSpec(kind="mgf_product", params={"eta": eta, "K": K},
                     _fn=lambda t: np.asarray(fn(t), dtype=float))


def make_bound(kind: str, **params) -> BoundSpec:
    factory = {"log_concave": bound_log_concave, "exp_concave": bound_exp_concave,
               "iid_chernoff": bound_iid, "mgf_product": bound_mgf_product}
    if kind not in factory:
        raise ValueError(f"unknown bound kind {kind!r}")
    return factory[kind](**params)


# ---------------------------------------------------------------------------
# confidence machinery
# ---------------------------------------------------------------------------

def clopper_pearson_upper(k: int, n: int, level: float = CONFIDENCE_LEVEL) -> float:
    """Exact one-sided upper confidence bound for a binomial proportion."""
    if not 0 <= k <= n or n < 1:
        raise ValueError("need 0 <= k <= n, n >= 1")
    if k == n:
        return 1.0
    return float(stats.beta.ppf(level, k + 1, n - k))


def jackknife_variance_se(x: np.ndarray) -> float:
    """Jackknife standard error of the unbiased sample variance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        return float("nan")
    s, q = x.sum(), float(x @ x)
    s_i = s - x
    q_i = q - x * x
    var_i = (q_i - s_i * s_i / (n - 1)) / (n - 2)
    return float(np.sqrt((n - 1) / n * np.sum((var_i - var_i.mean()) ** 2)))


# ---------------------------------------------------------------------------
# tail estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailReport:
    t_grid: np.ndarray
    empirical_survival: np.ndarray
    survival_ucb: np.ndarray
    bounds: dict
    mean_v: float
    var_v: float
    mean_v_se: float
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "t_grid": [float(t) for t in self.t_grid],
            "empirical_survival": [float(v) for v in self.empirical_survival],
            "survival_ucb": [float(v) for v in self.survival_ucb],
            "bounds": {k: [float(v) for v in vals] for k, vals in self.bounds.items()},
            "mean_v": self.mean_v, "var_v": self.var_v,
            "mean_v_se": self.mean_v_se, "n_samples": self.n_samples,
        }

    def to_csv(self) -> str:
        names = list(self.bounds)
        header = ["t", "empirical", "ucb"] + [f"bound_{n}" for n in names]
        lines = [",".join(header)]
        for i, t in enumerate(self.t_grid):
            row = [repr(float(t)), repr(float(self.empirical_survival[i])),
                   repr(float(self.survival_ucb[i]))]
            row += [repr(float(self.bounds[n][i])) for n in names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _tail_curves(values: np.ndarray, t_grid, bounds) -> TailReport:
    v = np.asarray(values, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ValueError("empty threshold grid")
    if np.any(np.diff(t_grid) <= 0) or np.any(t_grid <= 0):
        raise ValueError("t_grid must be strictly increasing and positive")
    n = v.size
    mean = float(np.mean(v))
    dev = np.abs(v - mean)
    counts = np.array([int(np.count_nonzero(dev > t)) for t in t_grid])
    survival = counts / n
    ucb = np.array([clopper_pearson_upper(int(k), n) for k in counts])
    bound_vals = {b.label: np.asarray(b.evaluate(t_grid), dtype=float)
                  for b in bounds}
    var = float(np.var(v, ddof=1)) if n > 1 else 0.0
    se = math.sqrt(var / n) if n > 1 else 0.0
    return TailReport(t_grid=t_grid, empirical_survival=survival,
                      survival_ucb=ucb, bounds=bound_vals, mean_v=mean,
                      var_v=var, mean_v_se=se, n_samples=n)


def estimate_tails(batch: SampleBatch, t_grid, bounds) -> TailReport:
    """Survival curve of |V - mean(V)| with exact binomial UCBs and bounds.

    Centering uses the empirical mean (the true one is unknown in general);
    the induced bias is reported through mean_v_se.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    return _tail_curves(batch.v_values, t_grid, bounds)


def estimate_mgf(batch: SampleBatch, lam: float) -> tuple:
    """(estimate, standard error) of E exp(lam*(V - mean V)), in log-sum-exp form."""
    from scipy.special import logsumexp

    v = np.asarray(batch.v_values, dtype=float)
    n = v.size
    if n == 0:
        raise ValueError("empty batch")
    if lam == 0.0:
        return 1.0, 0.0
    z = lam * (v - v.mean())
    log_e1 = float(logsumexp(z)) - math.log(n)
    log_e2 = float(logsumexp(2.0 * z)) - math.log(n)
    # e2 >= e1^2 by Jensen; log variance stays finite where the moments do
    gap = -math.expm1(min(2.0 * log_e1 - log_e2, 0.0))
    log_var = log_e2 + math.log(gap) if gap > 0.0 else -math.inf
    with np.errstate(over="ignore"):
        e1 = float(np.exp(log_e1))
        se = float(np.exp(0.5 * (log_var - math.log(n))))
    return e1, se


@dataclass(frozen=True)
class VarianceReport:
    variance: float
    jackknife_se: float
    mean: float
    n_samples: int
    dimension: int
    limit_log_concave: float
    passed_log_concave: bool
    eta: float | None
    limit_exp_concave: float | None
    passed_exp_concave: bool | None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "variance", "jackknife_se", "mean", "n_samples", "dimension",
            "limit_log_concave", "passed_log_concave", "eta",
            "limit_exp_concave", "passed_exp_concave")}


def estimate_variance_bounds(batch: SampleBatch, eta: float | None = None,
                             d: int | None = None) -> VarianceReport:
    """Check Var(V) against the d and (optionally) 1/eta limits.

    Pass/fail uses a 4-standard-error allowance on the jackknife estimate.
    """
    v = np.asarray(batch.v_values, dtype=float)
    if v.size == 0:
        raise ValueError("empty batch")
    if d is None:
        d = batch.points.shape[1]
    var = float(np.var(v, ddof=1))
    se = jackknife_variance_se(v)
    slack = 4.0 * se
    passed_d = var <= d + slack
    limit_eta = None if eta is None else 1.0 / eta
    passed_eta = None if eta is None else var <= limit_eta + slack
    return VarianceReport(variance=var, jackknife_se=se, mean=float(v.mean()),
                          n_samples=v.size, dimension=int(d),
                          limit_log_concave=float(d), passed_log_concave=passed_d,
                          eta=eta, limit_exp_concave=limit_eta,
                          passed_exp_concave=passed_eta)


# ---------------------------------------------------------------------------
# regime comparison table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeTable:
    d: int
    t_values: tuple
    eta_values: tuple
    baseline: tuple      # -min(t, t^2/d) per t
    exp_concave: tuple   # per eta: tuple of -max(sqrt(eta), eta)*t per t

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "t_values": list(self.t_values),
            "baseline_exponent": list(self.baseline),
            "exp_concave_exponent": {
                _fmt(eta): list(vals)
                for eta, vals in zip(self.eta_values, self.exp_concave)},
        }

    def text(self) -> str:
        head = ["t", "log_concave"] + [f"eta={_fmt(e)}" for e in self.eta_values]
        rows = [head]
        for i, t in enumerate(self.t_values):
            row = [f"{t:g}", f"{self.baseline[i]:.6g}"]
            row += [f"{col[i]:.6g}" for col in self.exp_concave]
            rows.append(row)
        widths = [max(len(r[j]) for r in rows) for j in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths))
                         for r in rows) + "\n"

    def to_csv(self) -> str:
        head = ["t", "log_concave"] + [f"eta={_fmt(e)}" for e in self.eta_values]
        lines = [",".join(head)]
        for i, t in enumerate(self.t_values):
            row = [repr(float(t)), repr(float(self.baseline[i]))]
            row += [repr(float(col[i])) for col in self.exp_concave]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def regime_table(eta_values, d: int, t_values) -> RegimeTable:
    """Tail exponents of the baseline and dimension-free bounds side by side.

    Reproduces the three-regime comparison (eta of order 1 versus 1/d against
    the d-dimensional baseline) for the supplied deviation levels.
    """
    t_values = [float(t) for t in t_values]
    eta_values = [float(e) for e in eta_values]
    if d < 1 or any(t < 0 for t in t_values) or any(e <= 0 for e in eta_values):
        raise ValueError("need d >= 1, t >= 0, eta > 0")
    baseline = tuple(-min(t, t * t / d) for t in t_values)
    cols = tuple(tuple(-max(math.sqrt(e), e) * t for t in t_values)
                 for e in eta_values)
    return RegimeTable(d=d, t_values=tuple(t_values), eta_values=tuple(eta_values),
                       baseline=baseline, exp_concave=cols)
