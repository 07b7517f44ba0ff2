"""Scenario-driven experiment runner.

Scenarios are YAML files (key-value with nested sections) naming a
registered model, an initial datum preset, a schedule and a list of
diagnostics.  Each diagnostic writes one CSV; a JSON summary records
every check with the verbatim bound it was scored against.  Fixed seed
implies byte-identical outputs.

Convergence-table CSVs share the column schema
    s,t,distance,slope,bound,pass
and verify-style CSVs share
    check,parameter,value,bound,pass
(the contract consumed by the report component).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from .pcfn import PCFn
from . import models as model_registry
from .splitting import (
    SplitSchedule, commutation_defect, fit_slope, limit_run, run,
    sensitivity, DomainError,
)
from .source import SourceDomainError
from .verify import (
    HatFunction, LocalWindow, check_characterization, entropy_residual,
    kruzkov_pair, rescaling_check,
)

SCHEMA_VERSION = 1

CONVERGENCE_COLUMNS = ["s", "t", "distance", "slope", "bound", "pass"]
CHECK_COLUMNS = ["check", "parameter", "value", "bound", "pass"]
TRACE_COLUMNS = ["time", "V", "Q", "upsilon", "tv", "l1", "fronts",
                 "V_src", "Q_src", "ups_src", "bound", "admitted"]


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# initial datum presets
# ----------------------------------------------------------------------

def preset_bump(dim, amp=0.2, steps=4, lo=-1.0, hi=1.0, direction=None,
                **_):
    xs = np.linspace(lo, hi, 2 * int(steps))
    up = amp * np.arange(1, steps + 1) / steps
    prof = np.concatenate([up, up[::-1][1:]])
    d = _direction(dim, direction)
    return PCFn.from_steps(xs, prof[:, None] * d[None, :])


def preset_riemann(dim, left=0.2, right=-0.2, x0=0.0, width=5.0,
                   direction=None, **_):
    d = _direction(dim, direction)
    lv = np.asarray(left, dtype=float) * d if np.isscalar(left) else \
        np.asarray(left, dtype=float)
    rv = np.asarray(right, dtype=float) * d if np.isscalar(right) else \
        np.asarray(right, dtype=float)
    xs = np.array([x0 - width, x0, x0 + width])
    return PCFn(xs, np.stack([np.zeros(dim), lv, rv, np.zeros(dim)]))


def preset_multi_jump(dim, rng=None, njumps=6, span=1.5, amp=0.2,
                      direction=None, **_):
    rng = np.random.default_rng(0) if rng is None else rng
    xs = np.sort(rng.uniform(-span, span, int(njumps)))
    d = _direction(dim, direction)
    prof = rng.uniform(-amp, amp, (int(njumps) - 1, 1))
    return PCFn.from_steps(xs, prof * d[None, :])


def _direction(dim, direction):
    if direction is None:
        d = np.zeros(dim)
        d[-1] = 1.0  # perturb the last component by default
        if dim == 1:
            d[0] = 1.0
        return d
    d = np.asarray(direction, dtype=float)
    if len(d) != dim:
        raise ConfigError("direction length %d != model dimension %d"
                          % (len(d), dim))
    return d


PRESETS = {
    "bump": (preset_bump, "piecewise-constant rise-and-fall profile"),
    "riemann": (preset_riemann, "windowed two-state jump at x0"),
    "multi_jump": (preset_multi_jump, "seeded random multi-jump profile"),
}


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------

def diag_trace(model, src, u0, sched, params, rng):
    out, trace = run(model, src, u0, sched)
    names, data = trace.columns()
    rows = [[data[n][i] for n in names] for i in range(len(trace.rows))]
    bound_text = "Upsilon(u(t)) <= delta + C t (Lemma 3.6-type growth)"
    checks = [{"id": "trace-admitted", "parameter": "all rows",
               "value": float(sum(data["admitted"])),
               "bound": bound_text,
               "pass": all(data["admitted"])}]
    # structured record of the final state (exact round-trip table)
    return TRACE_COLUMNS, rows, checks, {"final_state_table": out.to_table()}


def diag_limit(model, src, u0, sched, params, rng):
    t = float(params.get("t", sched.t_final))
    levels = int(params.get("levels", 5))
    seq = params.get("s_sequence")
    _, rows, info = limit_run(model, src, u0, t, s_sequence=seq,
                              sched=sched, levels=levels)
    slope = fit_slope([r["s"] for r in rows], [r["distance"] for r in rows])
    bound_const = 3.0 * rows[0]["distance_over_t2"] + 1e-12 if rows else 0.0
    out_rows = []
    ok_mono = info["monotone"]
    for k, r in enumerate(rows):
        mono = k == 0 or rows[k]["distance"] <= rows[k - 1]["distance"] * 1.05
        out_rows.append([r["s"], r["t"], r["distance"], slope,
                         bound_const * t ** 2, mono])
    checks = [
        {"id": "limit-monotone", "parameter": "distances",
         "value": slope,
         "bound": "||F^s_t - F^{s/2}_t|| monotone decreasing within 5% slack",
         "pass": ok_mono},
        {"id": "limit-uniform", "parameter": "sup pairwise / t^2",
         "value": info["pair_max_over_t2"],
         "bound": "sup_{s,s'} ||F^s_t u - F^{s'}_t u|| / t^2 <= "
                  "3x coarsest-pair value + 1e-12",
         "pass": info["pair_max_over_t2"] <= bound_const},
    ]
    return CONVERGENCE_COLUMNS, out_rows, checks, {"slope": slope}


def diag_commutation(model, src, u0, sched, params, rng):
    t_list = params.get("t_list", [0.2, 0.1, 0.05, 0.025, 0.0125])
    rows, slope = commutation_defect(model, src, u0, t_list, sched)
    coef = np.median([r["defect"] / r["t"] ** 2 for r in rows])
    ok = slope >= float(params.get("min_slope", 1.9))
    out_rows = [[r["t"], r["t"], r["defect"], slope, coef * r["t"] ** 2, ok]
                for r in rows]
    checks = [{"id": "commutation-slope", "parameter": "log-log slope",
               "value": slope,
               "bound": "||S_t P_t u - P_t S_t u|| = O(t^2): slope >= 1.9",
               "pass": bool(ok)}]
    return CONVERGENCE_COLUMNS, out_rows, checks, {"slope": slope}


def diag_tangent(model, src, u0, sched, params, rng):
    from .splitting import tangent_defect
    t_list = params.get("t_list", [0.2, 0.1, 0.05])
    levels = int(params.get("levels", 5))
    rows, slope = tangent_defect(model, src, u0, t_list, sched, levels=levels)
    coef = np.median([r["quotient"] / r["t"] for r in rows])
    ok = slope >= float(params.get("min_slope", 0.9))
    out_rows = [[r["surrogate_error"], r["t"], r["quotient"], slope,
                 coef * r["t"], ok] for r in rows]
    checks = [{"id": "tangent-slope", "parameter": "log-log slope",
               "value": slope,
               "bound": "||F_t u - S_t u - t G(u)||/t -> 0 with slope >= 0.9",
               "pass": bool(ok)}]
    return CONVERGENCE_COLUMNS, out_rows, checks, {"slope": slope}


def diag_sensitivity(model, src, u0, sched, params, rng):
    param = params.get("param", "b")
    deltas = params.get("deltas", [1e-2, 1e-3, 1e-4])
    t = float(params.get("t", sched.t_final))
    base_params = dict(params.get("model_params", {}))
    model_id = params["_model_id"]
    base_val = base_params.get(param, 1.0)
    out_rows = []
    dists = []
    for db in deltas:
        pert = dict(base_params)
        pert[param] = base_val + db
        m2, s2 = model_registry.build(model_id, validate=False, **pert)
        rep = sensitivity(model, src, m2, s2, u0, t, sched, rng=rng)
        dists.append(rep["distance"])
        out_rows.append([db, t, rep["distance"], np.nan, rep["bound"], True])
    slope = fit_slope(deltas, dists, discard_coarsest=False)
    for r in out_rows:
        r[3] = slope
    lo, hi = float(params.get("slope_lo", 0.9)), float(params.get("slope_hi", 1.1))
    ok = lo <= slope <= hi
    for r in out_rows:
        r[5] = bool(ok)
    checks = [{"id": "sensitivity-slope", "parameter": "log-log slope in d%s" % param,
               "value": slope,
               "bound": "distance linear in the parameter gap: slope 1 +/- 0.1",
               "pass": bool(ok)}]
    return CONVERGENCE_COLUMNS, out_rows, checks, {"slope": slope}


def diag_characterization(model, src, u0, sched, params, rng):
    win = LocalWindow(
        xi=float(params.get("xi", 0.0)),
        a=float(params.get("a", -1.0)),
        b=float(params.get("b", 1.0)),
        thetas=tuple(params.get("thetas", (0.2, 0.1, 0.05))))
    levels = int(params.get("levels", 4))
    rows = check_characterization(model, src, u0, win, sched, levels=levels)
    qa = [r["quotient_sharp"] for r in rows]
    consts = [r["flat_constant"] for r in rows if np.isfinite(r["flat_constant"])]
    ok_a = qa[-1] <= 0.05 * max(qa[0], 1e-9) + 1e-9
    ok_b = (not consts) or max(consts) <= 10 * min(consts) + 1e-8
    out_rows = []
    for r in rows:
        out_rows.append(["sharp", r["theta"], r["quotient_sharp"],
                         "0.05 x initial at smallest theta", ok_a])
        out_rows.append(["flat", r["theta"], r["flat_constant"],
                         "single constant across nested windows", ok_b])
    checks = [
        {"id": "characterization-sharp", "parameter": "smallest theta",
         "value": qa[-1],
         "bound": "(6a) quotient <= 0.05 x initial value", "pass": bool(ok_a)},
        {"id": "characterization-flat", "parameter": "constant spread",
         "value": max(consts) / max(min(consts), 1e-12) if consts else 0.0,
         "bound": "(6b) quotient / TV^2 bounded by one constant",
         "pass": bool(ok_b)},
    ]
    return CHECK_COLUMNS, out_rows, checks, {}


def diag_entropy(model, src, u0, sched, params, rng):
    if not model.is_scalar:
        raise ConfigError("entropy diagnostic is configured for scalar models")
    ks = params.get("ks", [-0.1, 0.0, 0.1])
    nt = int(params.get("nt", 2))
    nx = int(params.get("nx", 3))
    _, trace = run(model, src, u0, sched, record_states=True)
    states = trace.states
    t_end = states[-1][0]
    pairs = [kruzkov_pair(model.scalar_flux, float(k)) for k in ks]
    tg = np.linspace(0.0, t_end, nt + 2)
    hats_t = [HatFunction(tg[i], tg[i + 1], tg[i + 2]) for i in range(nt)]
    lo = u0.xs[0] - model.lambda_hat * t_end if u0.njumps else -1.0
    hi = u0.xs[-1] + model.lambda_hat * t_end if u0.njumps else 1.0
    xg = np.linspace(lo, hi, nx + 2)
    hats_x = [HatFunction(xg[i], xg[i + 1], xg[i + 2]) for i in range(nx)]
    rows = entropy_residual(model, src, states, pairs, hats_t, hats_x, sched)
    tol = float(params.get("tolerance", 1e-3))
    worst = max(r["positive_part"] for r in rows)
    ok = worst <= tol
    out_rows = [[r["pair"], r["phi"], r["residual"], tol,
                 r["positive_part"] <= tol] for r in rows]
    checks = [{"id": "entropy-positive-part", "parameter": "max over phi",
               "value": worst,
               "bound": "positive part of the Kruzkov residual <= %g" % tol,
               "pass": bool(ok)}]
    return CHECK_COLUMNS, out_rows, checks, {"worst_positive": worst}


def diag_rescaling(model, src, u0, sched, params, rng):
    lams = params.get("lambdas", [2.0, 3.7])
    t = float(params.get("t", sched.t_final))
    tol = float(params.get("tolerance", 1e-10))
    rows, worst = rescaling_check(model, u0, t, lams, sched)
    ok = worst <= tol if model.is_scalar else True
    out_rows = [[ "rescaling", r["lambda"], r["deviation"], tol,
                  r["deviation"] <= tol or not model.is_scalar] for r in rows]
    checks = [{"id": "rescaling-deviation", "parameter": "max over lambda",
               "value": worst,
               "bound": "lambda-scaled deviation of (S_t u)_lam vs "
                        "S_{t/lam} u_lam <= %g (scalar)" % tol,
               "pass": bool(ok)}]
    return CHECK_COLUMNS, out_rows, checks, {"worst": worst}


DIAGNOSTICS = {
    "trace": (diag_trace, "Glimm functional trace of one scheme run"),
    "limit": (diag_limit, "Cauchy-in-s splitting convergence table"),
    "commutation": (diag_commutation,
                    "||S_t P_t u - P_t S_t u|| order-2 defect"),
    "tangent": (diag_tangent, "tangent-vector quotient vs the surrogate F_t"),
    "sensitivity": (diag_sensitivity,
                    "distance under model-parameter perturbations"),
    "characterization": (diag_characterization,
                         "local Riemann-fan / frozen-coefficient quotients"),
    "entropy": (diag_entropy, "Kruzkov entropy residual positive part"),
    "rescaling": (diag_rescaling, "hyperbolic rescaling identity deviation"),
}


# ----------------------------------------------------------------------
# scenario plumbing
# ----------------------------------------------------------------------

def load_scenario(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("cannot read scenario: %s" % exc)
    except yaml.YAMLError as exc:
        raise ConfigError("scenario parse error in %s: %s" % (path, exc))
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a mapping")
    for key in ("model", "initial", "schedule"):
        if key not in cfg:
            raise ConfigError("scenario missing required section %r" % key)
    mid = cfg["model"].get("id")
    if mid not in model_registry.MODELS:
        raise ConfigError("unknown model id %r; known: %s"
                          % (mid, ", ".join(sorted(model_registry.MODELS))))
    preset = cfg["initial"].get("preset")
    if preset not in PRESETS:
        raise ConfigError("unknown initial preset %r; known: %s"
                          % (preset, ", ".join(sorted(PRESETS))))
    for d in cfg.get("diagnostics", []):
        if d.get("kind") not in DIAGNOSTICS:
            raise ConfigError("unknown diagnostic %r; known: %s"
                              % (d.get("kind"),
                                 ", ".join(sorted(DIAGNOSTICS))))
    return cfg


def _build_inputs(cfg):
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    mparams = dict(cfg["model"].get("params", {}))
    model, src = model_registry.build(cfg["model"]["id"], validate=False,
                                      **mparams)
    iparams = dict(cfg["initial"].get("params", {}))
    fn = PRESETS[cfg["initial"]["preset"]][0]
    if cfg["initial"]["preset"] == "multi_jump":
        u0 = fn(model.n, rng=rng, **iparams)
    else:
        u0 = fn(model.n, **iparams)
    sched = SplitSchedule(**cfg["schedule"])
    return model, src, u0, sched, rng, seed


def _run_diagnostic(cfg, index):
    """Worker entry: rebuilds everything from the config (picklable)."""
    model, src, u0, sched, rng, seed = _build_inputs(cfg)
    spec = cfg["diagnostics"][index]
    kind = spec["kind"]
    params = dict(spec.get("params", {}))
    params["_model_id"] = cfg["model"]["id"]
    params.setdefault("model_params", dict(cfg["model"].get("params", {})))
    fn = DIAGNOSTICS[kind][0]
    columns, rows, checks, extra = fn(model, src, u0, sched, params, rng)
    return kind, columns, rows, checks, extra


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [_fmt(v) for v in row]
            bad = [c for c in cells if "," in c or "\n" in c]
            if bad:
                raise ValueError("CSV cell would break the schema: %r" % bad[0])
            fh.write(",".join(cells) + "\n")


def run_scenario(path, out_dir=None, jobs=None):
    """Execute every diagnostic of the scenario; returns the exit status."""
    cfg = load_scenario(path)
    out_dir = out_dir or cfg.get("output", "artifacts")
    os.makedirs(out_dir, exist_ok=True)
    todo = list(range(len(cfg.get("diagnostics", []))))
    if jobs is None:
        jobs = cfg.get("jobs") or _physical_cores()
    results = {}
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            futs = {i: pool.submit(_run_diagnostic, cfg, i) for i in todo}
            for i in todo:
                results[i] = futs[i].result()
    else:
        for i in todo:
            results[i] = _run_diagnostic(cfg, i)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "scenario": os.path.basename(path),
        "seed": int(cfg.get("seed", 0)),
        "model": cfg["model"],
        "schedule": cfg["schedule"],
        "diagnostics": {},
        "pass": True,
    }
    counts = {}
    for i in todo:
        kind, columns, rows, checks, extra = results[i]
        counts[kind] = counts.get(kind, 0) + 1
        name = kind if counts[kind] == 1 else "%s_%d" % (kind, counts[kind])
        csv_name = name + ".csv"
        write_csv(os.path.join(out_dir, csv_name), columns, rows)
        ok = all(c["pass"] for c in checks)
        summary["pass"] = summary["pass"] and ok
        entry = {"csv": csv_name, "kind": kind, "pass": ok, "checks": checks}
        table = extra.pop("final_state_table", None)
        if table is not None:
            state_name = name + "_final_state.txt"
            with open(os.path.join(out_dir, state_name), "w") as fh:
                fh.write(table)
            entry["final_state"] = state_name
        entry.update(extra)
        summary["diagnostics"][name] = entry
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return 0 if summary["pass"] else 1


def _physical_cores():
    try:
        import psutil
        n = psutil.cpu_count(logical=False)
        if n:
            return n
    except ImportError:
        pass
    return os.cpu_count() or 1


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nlbalance",
        description="balance-law scheme runner and estimate verifier")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.add_argument("--jobs", type=int, default=None,
                       help="worker pool size (default: physical cores)")
    p_list = sub.add_parser("list", help="enumerate registered ids")
    p_list.add_argument("what", choices=["models", "diagnostics", "presets"])
    p_desc = sub.add_parser("describe", help="one-line docs for an id")
    p_desc.add_argument("id")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_scenario(args.scenario, args.out, args.jobs)
        if args.command == "list":
            if args.what == "models":
                for mid in sorted(model_registry.MODELS):
                    print(mid)
            elif args.what == "diagnostics":
                for k in sorted(DIAGNOSTICS):
                    print("%s: %s" % (k, DIAGNOSTICS[k][1]))
            else:
                for k in sorted(PRESETS):
                    print("%s: %s" % (k, PRESETS[k][1]))
            return 0
        if args.command == "describe":
            return describe_id(args.id)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (DomainError, SourceDomainError) as exc:
        print("domain failure: %s" % exc, file=sys.stderr)
        return 2
    return 0


def describe_id(ident):
    if ident in model_registry.MODELS:
        print(model_registry.describe(ident))
        return 0
    if ident in DIAGNOSTICS:
        print("%s: %s" % (ident, DIAGNOSTICS[ident][1]))
        return 0
    if ident in PRESETS:
        print("%s: %s" % (ident, PRESETS[ident][1]))
        return 0
    candidates = [k for k in list(model_registry.MODELS) + list(DIAGNOSTICS)
                  + list(PRESETS) if k.startswith(ident[:3])]
    hint = ("; did you mean %s?" % ", ".join(sorted(candidates))
            if candidates else "")
    print("unknown id %r%s" % (ident, hint), file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
