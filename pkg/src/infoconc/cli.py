"""Declarative experiment runner.

Parses a JSON configuration, wires potential -> sampler -> estimators ->
bounds, writes report.json plus experiment CSVs (and SVG plots with
--plot), and exits 0 only if every declared verdict passes.

Exit codes: 0 all verdicts pass, 1 verdict failure, 2 configuration error
(the message names the offending key), 3 runtime error.
"""

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import __version__, concentration, expconcavity, experiments, functional
from . import potentials, samplers
from .potentials import PotentialError, SupportSpec

EXPERIMENT_KINDS = ("tails", "variance", "mgf", "bl_check", "counterexample",
                    "exp_weights", "iid", "hpd", "info_density", "regime_table")

CONFIG_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _require(cfg: dict, key: str, types, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}{key}", "missing required key")
    val = cfg[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"{path}{key}", f"expected {types}, got {type(val).__name__}")
    return val


def _positive_list(values, key):
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(key, "expected a list of numbers") from None
    if any(v <= 0 for v in out):
        raise ConfigError(key, "values must be positive")
    if any(b <= a for a, b in zip(out[:-1], out[1:])):
        raise ConfigError(key, "values must be strictly increasing")
    return out


def build_potential(spec: dict, path: str = "potential.") -> potentials.Potential:
    if not isinstance(spec, dict):
        raise ConfigError(path.rstrip("."), "expected an object")
    name = _require(spec, "name", str, path)
    if name == "compose":
        parts_spec = _require(spec, "parts", list, path)
        parts = []
        for i, part in enumerate(parts_spec):
            ppath = f"{path}parts[{i}]."
            p = build_potential(part, ppath)
            emb = part.get("embed")
            if emb is not None:
                dim = _require(emb, "dim", int, ppath + "embed.")
                coords = _require(emb, "coords", list, ppath + "embed.")
                p = potentials.embed(p, dim, coords)
            eta = part.get("eta", p.known_eta)
            if eta is None or eta <= 0:
                raise ConfigError(ppath + "eta", "each part needs a positive eta")
            parts.append((p, float(eta)))
        try:
            base = potentials.compose_sum(parts)
        except PotentialError as exc:
            raise ConfigError(path + "parts", str(exc)) from None
    else:
        params = dict(spec.get("params", {}))
        for key in ("rows", "Q", "b"):
            if key in params:
                params[key] = np.asarray(params[key], dtype=float)
        if "interval" in params:
            params["interval"] = tuple(params["interval"])
        try:
            base = potentials.make_builtin(name, **params)
        except PotentialError as exc:
            raise ConfigError(path + "name", str(exc)) from None
    box = spec.get("box")
    if box is not None:
        lower = _require(box, "lower", list, path + "box.")
        upper = _require(box, "upper", list, path + "box.")
        try:
            support = SupportSpec.box(np.asarray(lower, float), np.asarray(upper, float),
                                      lower_open=np.full(len(lower), False),
                                      upper_open=np.full(len(upper), False))
            base = potentials.add_nonsmooth(base, potentials.indicator(support))
        except PotentialError as exc:
            raise ConfigError(path + "box", str(exc)) from None
    if spec.get("l1_weight") is not None:
        w = float(spec["l1_weight"])
        try:
            base = potentials.add_nonsmooth(
                base, potentials.l1_potential(base.dimension, w))
        except PotentialError as exc:
            raise ConfigError(path + "l1_weight", str(exc)) from None
    return base


def _build_chain(spec: dict, path: str) -> samplers.ChainConfig:
    allowed = {"step_size", "burn_in", "thinning", "n_chains", "target_acceptance"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(path + sorted(unknown)[0], "unknown chain option")
    try:
        return samplers.ChainConfig(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path.rstrip("."), str(exc)) from None


def _draw_batch(p, sampler_spec: dict, seed: int) -> samplers.SampleBatch:
    method = sampler_spec.get("method", "exact")
    n = _require(sampler_spec, "n", int, "sampler.")
    if n < 1:
        raise ConfigError("sampler.n", "must be a positive integer")
    chain = _build_chain(sampler_spec.get("chain", {}), "sampler.chain.")
    if method == "exact":
        return samplers.sample_exact(p, n, seed)
    if method in ("mala", "ula", "hit_and_run"):
        return samplers.sample_mcmc(p, n, chain, seed, method=method)
    raise ConfigError("sampler.method", f"unknown method {method!r}")


def _build_bounds(specs, p, batch, path="bounds") -> tuple:
    """Returns (bounds, notes, extras).  eta may be the string "certify",
    resolved empirically from the batch plus a low-discrepancy grid."""
    if not isinstance(specs, list) or not specs:
        raise ConfigError(path, "expected a non-empty list")
    out, notes, extras = [], [], {}
    for i, spec in enumerate(specs):
        key = f"{path}[{i}]"
        kind = _require(spec, "kind", str, key + ".")
        try:
            if kind == "exp_concave":
                eta = spec.get("eta")
                if eta == "certify":
                    pts = np.vstack([batch.points[:2048],
                                     expconcavity._grid_to_support(
                                         expconcavity._halton(128, p.dimension),
                                         p.support)])
                    cert = expconcavity.certify(p, pts)
                    eta = cert.global_eta
                    notes.append(f"eta certified empirically: {eta:.6g}")
                    extras["eta_certificate"] = cert.to_dict()
                out.append(concentration.bound_exp_concave(float(eta)))
            elif kind == "log_concave":
                d = int(spec.get("d", p.dimension))
                c1 = float(spec.get("c1", 1.0))
                c2 = float(spec.get("c2", 1.0))
                if "c1" not in spec or "c2" not in spec:
                    notes.append("log_concave uses illustrative constants "
                                 "c1=c2=1 (the universal constants are "
                                 "unspecified)")
                out.append(concentration.bound_log_concave(d, c1, c2))
            elif kind == "iid_chernoff":
                out.append(concentration.bound_iid(float(spec["eta"]), int(spec["N"])))
            elif kind == "mgf_product":
                out.append(concentration.bound_mgf_product(
                    float(spec["eta"]), int(spec.get("K", 30))))
            else:
                raise ConfigError(key + ".kind", f"unknown bound kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(key, str(exc)) from None
    return out, notes, extras


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top-level value must be an object")
    version = _require(cfg, "schema_version", int, "")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError("schema_version",
                          f"unsupported version {version} (expected {CONFIG_SCHEMA_VERSION})")
    kind = _require(cfg, "kind", str, "")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError("kind", f"unknown experiment kind {kind!r}")
    _require(cfg, "seed", int, "")
    return cfg


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------

def _verdict(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _run_tails(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    est = _require(cfg, "estimator", dict, "")
    t_grid = _positive_list(_require(est, "t_grid", list, "estimator."),
                            "estimator.t_grid")
    batch = _draw_batch(p, _require(cfg, "sampler", dict, ""), seed)
    bounds, notes, extras = _build_bounds(_require(cfg, "bounds", list, ""), p, batch)
    report = concentration.estimate_tails(batch, t_grid, bounds)
    verdicts = []
    for b in bounds:
        vals = np.asarray(b.evaluate(np.asarray(t_grid)))
        for t, ucb, bv in zip(t_grid, report.survival_ucb, vals):
            if bv < 1.0:
                verdicts.append(_verdict(
                    f"domination[{b.label}][t={t:g}]", ucb <= bv,
                    f"ucb={ucb:.6g} bound={bv:.6g}"))
    if not verdicts:
        verdicts.append(_verdict("domination[vacuous]", True,
                                 "no bound below 1 on the grid"))
    payload = report.to_dict()
    payload["notes"] = notes
    payload.update(extras)
    payload["diagnostics"] = batch.diagnostics.to_dict()
    return payload, verdicts, {"tails.csv": report.to_csv()}, ("tails", report)


def _run_variance(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    est = cfg.get("estimator", {})
    eta = est.get("eta", p.known_eta if (p.known_eta or 0) > 0 else None)
    batch = _draw_batch(p, _require(cfg, "sampler", dict, ""), seed)
    rep = concentration.estimate_variance_bounds(batch, eta=eta)
    verdicts = [_verdict("variance<=d", rep.passed_log_concave,
                         f"var={rep.variance:.6g} d={rep.dimension}")]
    if eta is not None:
        verdicts.append(_verdict("variance<=1/eta", bool(rep.passed_exp_concave),
                                 f"var={rep.variance:.6g} 1/eta={rep.limit_exp_concave:.6g}"))
    payload = rep.to_dict()
    payload["diagnostics"] = batch.diagnostics.to_dict()
    return payload, verdicts, {}, None


def _run_mgf(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    est = _require(cfg, "estimator", dict, "")
    lam = float(_require(est, "lambda", (int, float), "estimator."))
    K = int(est.get("K", 30))
    eta = est.get("eta", p.known_eta)
    if eta is None or eta <= 0:
        raise ConfigError("estimator.eta", "needs a positive eta")
    batch = _draw_batch(p, _require(cfg, "sampler", dict, ""), seed)
    estimate, se = concentration.estimate_mgf(batch, lam)
    product = concentration.mgf_product_bound(lam, float(eta), K)
    verdicts = [
        _verdict("empirical_mgf<=3", estimate <= 3.0,
                 f"estimate={estimate:.6g} se={se:.3g}"),
        _verdict("product_bound<=3", product <= 3.0, f"value={product:.6g}"),
    ]
    payload = {"lambda": lam, "eta": float(eta), "K": K,
               "empirical_mgf": estimate, "empirical_mgf_se": se,
               "product_bound": product,
               "diagnostics": batch.diagnostics.to_dict()}
    return payload, verdicts, {}, None


_TEST_FUNCTIONS = {
    "x": functional.f_coordinate,
    "x^2": lambda: functional.f_square(0),
    "tanh": lambda: functional.f_tanh(0),
}


def _run_bl_check(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    est = _require(cfg, "estimator", dict, "")
    fname = est.get("function", "x")
    if fname not in _TEST_FUNCTIONS:
        raise ConfigError("estimator.function",
                          f"choices: {sorted(_TEST_FUNCTIONS)}")
    f = _TEST_FUNCTIONS[fname]()
    mode = est.get("mode", "both")
    if mode not in ("quadrature", "montecarlo", "both"):
        raise ConfigError("estimator.mode", "choices: quadrature, montecarlo, both")
    payload, verdicts = {"function": fname}, []
    if mode in ("quadrature", "both"):
        lhs, rhs = functional.bl_check_quadrature(p, f)
        payload["quadrature"] = {"lhs": lhs, "rhs": rhs}
        verdicts.append(_verdict("quadrature_lhs<=rhs",
                                 lhs <= rhs + 1e-6 * (1 + rhs),
                                 f"lhs={lhs:.8g} rhs={rhs:.8g}"))
    if mode in ("montecarlo", "both"):
        batch = _draw_batch(p, _require(cfg, "sampler", dict, ""), seed)
        mc = functional.bl_check_montecarlo(p, f, batch)
        payload["montecarlo"] = mc.to_dict()
        verdicts.append(_verdict("montecarlo_no_violation", not mc.violation,
                                 f"lhs={mc.lhs:.6g}({mc.lhs_se:.2g}) "
                                 f"rhs={mc.rhs:.6g}({mc.rhs_se:.2g})"))
    return payload, verdicts, {}, None


def _run_counterexample(cfg, seed):
    est = _require(cfg, "estimator", dict, "")
    lam = float(_require(est, "lambda", (int, float), "estimator."))
    truncs = _require(est, "truncations", list, "estimator.")
    try:
        logs = functional.counterexample_divergence(lam, truncs)
    except ValueError as exc:
        raise ConfigError("estimator.truncations", str(exc)) from None
    increasing = all(b > a for a, b in zip(logs[:-1], logs[1:]))
    verdicts = [_verdict("log_integrals_increasing", increasing or lam == 0.0,
                         f"values={['%.4f' % v for v in logs]}")]
    payload = {"lambda": lam, "truncations": [float(a) for a in truncs],
               "log_integrals": logs}
    csv = "truncation,log_integral\n" + "".join(
        f"{float(a)!r},{float(v)!r}\n" for a, v in zip(truncs, logs))
    return payload, verdicts, {"counterexample.csv": csv}, None


def _run_exp_weights(cfg, seed):
    est = _require(cfg, "estimator", dict, "")
    T = int(_require(est, "T", int, "estimator."))
    N = int(_require(est, "N", int, "estimator."))
    n_assets = int(est.get("n_assets", 3))
    vol = float(est.get("volatility", 0.25))
    drift = est.get("drift")
    losses = experiments.portfolio_loss_stream(n_assets, T, seed, vol, drift)
    chain = _build_chain(cfg.get("sampler", {}).get("chain", {}), "sampler.chain.")
    result = experiments.run_exp_weights(
        losses, N=N, T=T, seed=seed, cfg=chain,
        reference_samples=int(est.get("reference_samples", 256)))
    realized = np.array([r.loss for r in result.rounds])
    best = np.asarray(result.best_point)
    comp = np.array([float(losses[t].value(best)) for t in range(T)])
    recomputed = np.cumsum(realized) - np.cumsum(comp)
    stored = np.array([r.cumulative_regret for r in result.rounds])
    verdicts = [_verdict("regret_resummable", bool(np.array_equal(recomputed, stored)),
                         "cumulative regret re-summed from per-round losses")]
    payload = {"T": T, "N": N, "n_assets": n_assets,
               "best_point": list(result.best_point),
               "final_regret": float(stored[-1]) if T else 0.0,
               "final_avg_regret": float(stored[-1] / T) if T else 0.0}
    return payload, verdicts, {"rounds.csv": result.to_csv()}, ("regret", result)


def _run_iid(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    if p.known_eta is None or p.known_eta <= 0:
        raise ConfigError("potential", "iid experiment needs a potential with "
                                       "a declared positive eta")
    est = _require(cfg, "estimator", dict, "")
    N = int(_require(est, "N", int, "estimator."))
    t = float(_require(est, "t", (int, float), "estimator."))
    reps = int(_require(est, "reps", int, "estimator."))
    freq, bound = experiments.deviation_frequency(p, N, t, reps, seed)
    if bound < 0.5:
        verdicts = [_verdict("frequency<=bound", freq <= bound,
                             f"freq={freq:.6g} bound={bound:.6g}")]
    else:
        verdicts = [_verdict("frequency<=bound", True,
                             f"vacuous: bound={bound:.6g} >= 0.5")]
    payload = {"N": N, "t": t, "reps": reps, "frequency": freq, "bound": bound}
    return payload, verdicts, {}, None


def _run_hpd(cfg, seed):
    p = build_potential(_require(cfg, "potential", dict, ""))
    if p.known_eta is None or p.known_eta <= 0:
        raise ConfigError("potential", "hpd experiment needs a potential with "
                                       "a declared positive eta")
    est = _require(cfg, "estimator", dict, "")
    n_scale = float(_require(est, "n", (int, float), "estimator."))
    alpha = float(_require(est, "alpha", (int, float), "estimator."))
    if not 0 < alpha < 1:
        raise ConfigError("estimator.alpha", "must lie in (0, 1)")
    c1 = float(est.get("c1", 1.0))
    c2 = float(est.get("c2", 1.0))
    scaled = potentials.scale(p, n_scale)
    batch = _draw_batch(scaled, _require(cfg, "sampler", dict, ""), seed)
    res = experiments.hpd_experiment(p, n_scale, alpha, (c1, c2), batch)
    verdicts = [
        _verdict("contained_baseline", res.contained_baseline,
                 f"gamma={res.gamma_alpha:.6g} thr={res.threshold_baseline:.6g}"),
        _verdict("contained_exp_concave", res.contained_exp_concave,
                 f"gamma={res.gamma_alpha:.6g} thr={res.threshold_exp_concave:.6g}"),
    ]
    payload = res.to_dict()
    payload["note"] = ("thresholds use user constants c1, c2 "
                       "(defaults 1, not prescribed values)")
    return payload, verdicts, {}, None


def _run_info_density(cfg, seed):
    est = _require(cfg, "estimator", dict, "")
    rho = float(_require(est, "rho", (int, float), "estimator."))
    if not -1.0 < rho < 1.0:
        raise ConfigError("estimator.rho", "must lie in (-1, 1)")
    d = int(_require(est, "d", int, "estimator."))
    n = int(_require(est, "n", int, "estimator."))
    t_grid = est.get("t_grid", [0.5, 1.0, 2.0, 4.0])
    _positive_list(t_grid, "estimator.t_grid")
    rep = experiments.information_density_experiment(rho, d, n, seed,
                                                     tuple(t_grid))
    verdicts = [
        _verdict("identities<=1e-10", rep.identity_error <= 1e-10,
                 f"max error {rep.identity_error:.3g}"),
        _verdict("mutual_information_matches",
                 abs(rep.mi_estimate - rep.mi_analytic) <= 4 * rep.mi_se + 1e-12,
                 f"estimate={rep.mi_estimate:.6g} analytic={rep.mi_analytic:.6g}"),
    ]
    files = {"cond_tails.csv": rep.cond_tails.to_csv(),
             "mi_tails.csv": rep.mi_tails.to_csv()}
    return rep.to_dict(), verdicts, files, None


def _run_regime_table(cfg, seed):
    est = _require(cfg, "estimator", dict, "")
    etas = _require(est, "eta_values", list, "estimator.")
    d = int(_require(est, "d", int, "estimator."))
    ts = _require(est, "t_values", list, "estimator.")
    try:
        table = concentration.regime_table(etas, d, ts)
    except ValueError as exc:
        raise ConfigError("estimator", str(exc)) from None
    payload = table.to_dict()
    payload["note"] = "baseline exponent uses illustrative c2=1"
    verdicts = [_verdict("table_emitted", True, f"{len(ts)} rows")]
    return payload, verdicts, {"regime.csv": table.to_csv(),
                               "regime.txt": table.text()}, None


_RUNNERS = {
    "tails": _run_tails, "variance": _run_variance, "mgf": _run_mgf,
    "bl_check": _run_bl_check, "counterexample": _run_counterexample,
    "exp_weights": _run_exp_weights, "iid": _run_iid, "hpd": _run_hpd,
    "info_density": _run_info_density, "regime_table": _run_regime_table,
}


# ---------------------------------------------------------------------------
# report writing and validation
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def report_schema() -> dict:
    with resources.files("infoconc").joinpath("schema/report-v1.json").open() as fh:
        return json.load(fh)


def validate_report(report: dict, schema: dict | None = None) -> list:
    """Minimal JSON-schema validation (type/required/properties/items/enum/
    const); returns a list of error strings, empty when valid."""
    schema = schema or report_schema()
    errors = []

    def walk(inst, sch, path):
        if "const" in sch and inst != sch["const"]:
            errors.append(f"{path}: expected const {sch['const']!r}")
            return
        if "enum" in sch and inst not in sch["enum"]:
            errors.append(f"{path}: {inst!r} not in enum")
            return
        typ = sch.get("type")
        checks = {"object": dict, "array": list, "string": str,
                  "boolean": bool, "number": (int, float), "integer": int}
        if typ is not None:
            ok_type = checks[typ]
            if typ == "number":
                ok = isinstance(inst, (int, float)) and not isinstance(inst, bool)
            elif typ == "integer":
                ok = isinstance(inst, int) and not isinstance(inst, bool)
            else:
                ok = isinstance(inst, ok_type)
            if not ok:
                errors.append(f"{path}: expected {typ}")
                return
        for key in sch.get("required", []):
            if key not in inst:
                errors.append(f"{path}.{key}: missing")
        for key, sub in sch.get("properties", {}).items():
            if isinstance(inst, dict) and key in inst:
                walk(inst[key], sub, f"{path}.{key}")
        if "items" in sch and isinstance(inst, list):
            for i, item in enumerate(inst):
                walk(item, sch["items"], f"{path}[{i}]")

    walk(report, schema, "report")
    return errors


def _plot(kind_data, out_dir: str) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    tag, obj = kind_data
    if tag == "tails":
        fig, ax = plt.subplots(figsize=(6, 4))
        t = obj.t_grid
        ax.semilogy(t, np.maximum(obj.empirical_survival, 1e-12), "o-",
                    label="empirical")
        ax.semilogy(t, obj.survival_ucb, "s--", label="99% UCB")
        for name, vals in obj.bounds.items():
            ax.semilogy(t, vals, label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("P(|V - mean V| > t)")
        ax.legend(fontsize=8)
        path = os.path.join(out_dir, "tails.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append("tails.svg")
    elif tag == "regret":
        fig, ax = plt.subplots(figsize=(6, 4))
        ts = [r.index for r in obj.rounds]
        ax.plot(ts, [r.cumulative_regret for r in obj.rounds], label="regret")
        ax.plot(ts, [r.cumulative_regret / r.index for r in obj.rounds],
                label="regret / t")
        ax.set_xlabel("round")
        ax.legend(fontsize=8)
        path = os.path.join(out_dir, "regret.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append("regret.svg")
    return written


def run(config_path: str, plot: bool = False, out: str | None = None,
        seed: int | None = None) -> int:
    """Execute a configured experiment; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        out_dir = out or cfg.get("output_dir", ".")
        seed_val = int(seed if seed is not None else cfg["seed"])
        started = time.perf_counter()
        payload, verdicts, files, plot_data = _RUNNERS[cfg["kind"]](cfg, seed_val)
        elapsed = time.perf_counter() - started
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (samplers.DivergenceError, samplers.TuningFailureError,
            samplers.UnsupportedExactSamplerError, experiments.MinimizationError,
            functional.QuadratureError, potentials.DomainError, PotentialError,
            RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3

    os.makedirs(out_dir, exist_ok=True)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "toolkit_version": __version__,
        "kind": cfg["kind"],
        "seed": seed_val,
        "config": cfg,
        "payload": payload,
        "verdicts": verdicts,
        "wall_clock_s": elapsed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    errors = validate_report(report)
    if errors:
        print("internal error: report fails its schema: "
              + "; ".join(errors), file=sys.stderr)
        return 3
    for name, text in files.items():
        _atomic_write(os.path.join(out_dir, name), text)
    if plot and plot_data is not None:
        _plot(plot_data, out_dir)
    _atomic_write(os.path.join(out_dir, "report.json"),
                  json.dumps(report, indent=2, sort_keys=True) + "\n")
    failed = [v for v in verdicts if not v["passed"]]
    for v in verdicts:
        status = "PASS" if v["passed"] else "FAIL"
        print(f"[{status}] {v['name']}: {v['detail']}")
    return 1 if failed else 0


def list_builtins() -> str:
    lines = ["builtin potentials:"]
    for name in sorted(potentials.BUILTIN_NOTES):
        lines.append(f"  {name}: {potentials.BUILTIN_NOTES[name]}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="infoconc",
        description="concentration-of-information verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("config", help="path to a JSON experiment config")
    runp.add_argument("--plot", action="store_true", help="emit SVG plots")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--seed", type=int, default=None,
                      help="override the config seed")
    sub.add_parser("list-builtins", help="list builtin potentials")
    args = parser.parse_args(argv)
    if args.command == "list-builtins":
        print(list_builtins(), end="")
        return 0
    return run(args.config, plot=args.plot, out=args.out, seed=args.seed)


if __name__ == "__main__":
    raise SystemExit(main())
