"""The fractional-step scheme F^s_t = S_{t-hs} (P_s o S_s)^h and its
diagnostics: Cauchy-in-s limit extraction, commutation and tangent
defects, uniform Lipschitz ratios, and sensitivity to model parameters.

Every run manages the domain inclusion Upsilon(u) < delta + C t and
records a trace of the Glimm functionals; admission failures carry the
offending value and time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .pcfn import PCFn, CombinedFn
from .source import apply_g, euler_step
from .fronttrack import evolve, init_fronts
from .system import glimm_functionals


class DomainError(RuntimeError):
    """Domain admission failed: Upsilon left the set D_t."""


@dataclass
class SplitSchedule:
    """Step size, horizon and domain bookkeeping of one scheme run.

    delta (initial Glimm bound) and C (growth constant) are calibrated
    from the data when omitted; delta_bar caps delta + C * t_final.
    """

    s: float
    t_final: float
    N: int = 8
    eps: float = 1e-4
    delta: float | None = None
    C: float | None = None
    delta_bar: float | None = None
    rho_thresh: float | None = None
    wave_drop: float = 1e-13
    domain_slack: float = 1e-9
    trace_every: int = 1
    enforce_domain: bool = True

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("step s must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")

    def admissible_bound(self, t):
        return self.delta + self.C * t + self.domain_slack

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return SplitSchedule(**d)


@dataclass
class TraceRow:
    time: float
    V: float
    Q: float
    upsilon: float
    tv: float
    l1: float
    fronts: int
    V_src: float
    Q_src: float
    ups_src: float
    bound: float
    admitted: bool


@dataclass
class RunTrace:
    meta: dict
    rows: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def add(self, **kw):
        row = TraceRow(**kw)
        if self.rows and row.time <= self.rows[-1].time:
            raise ValueError("trace times must be strictly increasing")
        self.rows.append(row)

    def columns(self):
        names = [f for f in TraceRow.__dataclass_fields__]
        data = {n: [getattr(r, n) for r in self.rows] for n in names}
        return names, data


def calibrate_growth_constant(model, src, u0, N, samples=3, s_probe=1e-3):
    """Domain growth constant from a warm-up sweep of the Euler-step
    functional growth: the measured constant of
    Upsilon(P_s u) <= Upsilon(u) + O s (L3' + V(u)) with L3' = 2 L3
    (the projected source), then C = 2 O (L3' + V-scale) so that the
    admissible tube delta + C t dominates the growth."""
    rng = np.random.default_rng(12345)
    worst = 0.0
    vmax = 0.0
    l3p = 2.0 * src.L3
    probes = [u0]
    for _ in range(samples - 1):
        xs = np.sort(rng.uniform(-1.0, 1.0, 4))
        amp = 0.2 * model.omega_radius
        probes.append(PCFn.from_steps(xs, rng.uniform(-amp, amp, (3, model.n))))
    for u in probes:
        V, Q, ups = glimm_functionals(model, u)
        up = euler_step(src, u, s_probe, N)
        V2, Q2, ups2 = glimm_functionals(model, up)
        denom = s_probe * (l3p + V)
        if denom > 1e-14:
            worst = max(worst, (ups2 - ups) / denom)
        vmax = max(vmax, V)
    scale = l3p + max(1.0, 2.0 * vmax)
    return 2.0 * max(worst, 1e-3) * scale


def prepare_schedule(model, src, u0, sched: SplitSchedule) -> SplitSchedule:
    """Fill calibrated delta / C / delta_bar and check admissibility."""
    out = dict(asdict(sched))
    if sched.delta is None:
        ups0 = glimm_functionals(model, u0)[2]
        out["delta"] = ups0 * (1 + 1e-9) + 1e-12
    if sched.C is None:
        if src.kind == "zero":
            out["C"] = 0.0
        else:
            out["C"] = calibrate_growth_constant(model, src, u0, sched.N)
    if sched.delta_bar is None:
        out["delta_bar"] = out["delta"] + out["C"] * sched.t_final + 1.0
    final = SplitSchedule(**out)
    if final.delta + final.C * final.t_final > final.delta_bar + 1e-12:
        raise DomainError(
            "schedule inadmissible: delta + C T = %.6g > delta_bar = %.6g"
            % (final.delta + final.C * final.t_final, final.delta_bar))
    return final


def run(model, src, u0: PCFn, sched: SplitSchedule, record_states=False):
    """F^s_{t_final} u0 with a functional trace.

    Applies S_s then P_s = 1 + s Pi_N G on each macro interval, then the
    trailing S_{t - hs}; checks Upsilon(u) < delta + C t at every source
    application (DomainError carries the offending value and time).
    """
    sched = prepare_schedule(model, src, u0, sched)
    s, t_final = sched.s, sched.t_final
    h = int(np.floor(t_final / s + 1e-9))
    tail = max(t_final - h * s, 0.0)
    if tail < 1e-12 * max(1.0, t_final):
        tail = 0.0
    trace = RunTrace(meta={
        "model": model.name, "source": src.name, "schedule": asdict(sched)})
    zero_src = src.kind == "zero"

    def admit(ups, t):
        bound = sched.admissible_bound(t)
        ok = ups <= bound
        if sched.enforce_domain and not ok:
            raise DomainError(
                "domain admission failed: Upsilon=%.6g > %.6g at t=%.6g"
                % (ups, bound, t))
        return bound, ok

    state = init_fronts(model, u0, sched.eps, sched.rho_thresh,
                        sched.wave_drop)
    V0, Q0, ups0 = state.glimm()
    admit(ups0, 0.0)
    if record_states:
        trace.states.append((0.0, u0))
    t = 0.0
    u = u0
    for k in range(h):
        evolve(state, s)
        V, Q, ups = state.glimm()
        u = state.snapshot()
        t = (k + 1) * s
        if zero_src:
            V_src, Q_src, ups_src = V, Q, ups
        else:
            u = euler_step(src, u, s, sched.N)
            state = init_fronts(model, u, sched.eps, sched.rho_thresh,
                                sched.wave_drop)
            V_src, Q_src, ups_src = state.glimm()
        bound, ok = admit(ups_src, t)
        if k % sched.trace_every == 0 or k == h - 1:
            trace.add(time=t, V=V, Q=Q, upsilon=ups, tv=u.tv(),
                      l1=u.l1_norm(), fronts=state.front_count,
                      V_src=V_src, Q_src=Q_src, ups_src=ups_src,
                      bound=bound, admitted=ok)
        if record_states:
            trace.states.append((t, u))
    if tail > 0.0:
        evolve(state, tail)
        V, Q, ups = state.glimm()
        u = state.snapshot()
        t = t_final
        bound, ok = admit(ups, t)
        trace.add(time=t, V=V, Q=Q, upsilon=ups, tv=u.tv(), l1=u.l1_norm(),
                  fronts=state.front_count, V_src=V, Q_src=Q, ups_src=ups,
                  bound=bound, admitted=ok)
        if record_states:
            trace.states.append((t, u))
    elif zero_src:
        u = state.snapshot()
    return u, trace


def convective(model, u: PCFn, t, sched: SplitSchedule) -> PCFn:
    """S_t u under the schedule's front-tracking parameters."""
    if t == 0.0:
        return u
    state = init_fronts(model, u, sched.eps, sched.rho_thresh, sched.wave_drop)
    evolve(state, t)
    return state.snapshot()


def source_step(src, u: PCFn, t, sched: SplitSchedule) -> PCFn:
    """P_t u = u + t Pi_N G(u) under the schedule's resolution."""
    return euler_step(src, u, t, sched.N)


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------

def fit_slope(params, values, discard_coarsest=True):
    """Least-squares slope of log(values) vs log(params); drops the
    coarsest (largest-parameter) point and nonpositive values."""
    p = np.asarray(params, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    p, v = p[keep], v[keep]
    if discard_coarsest and len(p) > 2:
        drop = np.argmax(p)
        sel = np.ones(len(p), dtype=bool)
        sel[drop] = False
        p, v = p[sel], v[sel]
    if len(p) < 2:
        return float("nan")
    x = np.log(p)
    y = np.log(v)
    xm = x - x.mean()
    return float((xm * (y - y.mean())).sum() / (xm * xm).sum())


def limit_run(model, src, u0, t, s_sequence=None, sched=None, levels=5):
    """Runs F^{s_k}_t for decreasing s_k, reporting pairwise distances.

    Returns (finest PCFn, rows, info): rows carry (s, t, distance to the
    next finer run, distance/t^2); info holds the max pairwise/t^2 bound
    constant and the Richardson error bar of the finest run.
    """
    if sched is None:
        sched = SplitSchedule(s=t, t_final=t)
    if s_sequence is None:
        s_sequence = [t * 0.5 ** k for k in range(levels)]
    s_sequence = sorted(set(float(s) for s in s_sequence), reverse=True)
    outs = []
    for s in s_sequence:
        u, _ = run(model, src, u0, sched.replace(s=s, t_final=t))
        outs.append(u)
    rows = []
    for k in range(len(outs) - 1):
        d = outs[k].l1_dist(outs[k + 1])
        rows.append({"s": s_sequence[k], "t": t, "distance": d,
                     "distance_over_t2": d / t ** 2 if t > 0 else np.nan})
    pair_max = 0.0
    for a in range(len(outs)):
        for b in range(a + 1, len(outs)):
            pair_max = max(pair_max, outs[a].l1_dist(outs[b]))
    norm_fac = (1.0 + u0.l1_norm())
    info = {
        "pair_max": pair_max,
        "pair_max_over_t2": pair_max / t ** 2 if t > 0 else np.nan,
        "uniform_bound_constant": pair_max / (norm_fac * t ** 2) if t > 0 else np.nan,
        "richardson_error": rows[-1]["distance"] if rows else 0.0,
        "monotone": all(rows[k + 1]["distance"] <= rows[k]["distance"] * 1.05
                        for k in range(len(rows) - 1)),
    }
    return outs[-1], rows, info


def commutation_defect(model, src, u, t_list, sched):
    """Rows of (t, ||S_t P_t u - P_t S_t u||_L1) plus log-log slope."""
    rows = []
    for t in sorted(t_list, reverse=True):
        a = convective(model, source_step(src, u, t, sched), t, sched)
        b = source_step(src, convective(model, u, t, sched), t, sched)
        rows.append({"t": t, "defect": a.l1_dist(b)})
    slope = fit_slope([r["t"] for r in rows], [r["defect"] for r in rows])
    return rows, slope


def tangent_defect(model, src, u, t_list, sched, levels=5):
    """Quotients ||F_t u - S_t u - t G(u)|| / t with F_t the finest-s
    surrogate, measured against both operator orderings."""
    rows = []
    for t in sorted(t_list, reverse=True):
        ft, _, info = limit_run(model, src, u, t, sched=sched, levels=levels)
        st = convective(model, u, t, sched)
        gu = apply_g(src, u, sched.N)
        q1 = (ft - st - t * gu).l1_norm() / t
        # second ordering: distance to P_t S_t u, also O(t^2)
        q2 = ft.l1_dist(source_step(src, st, t, sched)) / t
        rows.append({"t": t, "quotient": q1, "quotient_pst": q2,
                     "surrogate_error": info["richardson_error"]})
    slope = fit_slope([r["t"] for r in rows], [r["quotient"] for r in rows])
    return rows, slope


def lipschitz_ratios(model, src, u, w, t, s_list, sched):
    """||F^s_t u - F^s_t w|| / ||u - w|| across source steps s."""
    d0 = u.l1_dist(w)
    rows = []
    for s in s_list:
        fu, _ = run(model, src, u, sched.replace(s=s, t_final=t))
        fw, _ = run(model, src, w, sched.replace(s=s, t_final=t))
        rows.append({"s": s, "t": t, "ratio": fu.l1_dist(fw) / d0})
    return rows


def source_sup_distance(src1, src2, rng, omega_radius, probes=5, span=1.5,
                        njumps=5):
    """Sampled sup_u ||G1(u) - G2(u)||_L1 over random admissible data."""
    worst = 0.0
    amp = 0.4 * omega_radius
    for _ in range(probes):
        xs = np.sort(rng.uniform(-span, span, njumps))
        u = PCFn.from_steps(xs, rng.uniform(-amp, amp, (njumps - 1, src1.dim)))
        g1 = src1.apply(u)
        g2 = src2.apply(u)
        g1 = g1 if isinstance(g1, CombinedFn) else CombinedFn(g1)
        worst = max(worst, g1.l1_dist(g2))
    return worst


def jacobian_sup_distance(model1, model2, grid=5):
    """Sampled sup over the common box of ||Df1 - Df2|| (operator norm)."""
    r = min(model1.omega_radius, model2.omega_radius)
    axes = [np.linspace(-r, r, grid)] * model1.n
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model1.n)
    d = model1.jac(pts) - model2.jac(pts)
    return float(np.linalg.norm(d, ord=2, axis=(1, 2)).max())


def sensitivity(model1, src1, model2, src2, u0, t, sched, rng=None):
    """||F1_t u - F2_t u|| against the flux/source perturbation bound."""
    if model1.n != model2.n or src1.dim != src2.dim:
        raise ValueError("incompatible dimensions")
    rng = np.random.default_rng(7) if rng is None else rng
    f1, _ = run(model1, src1, u0, sched.replace(t_final=t))
    f2, _ = run(model2, src2, u0, sched.replace(t_final=t))
    dist = f1.l1_dist(f2)
    df_gap = jacobian_sup_distance(model1, model2)
    g_gap = source_sup_distance(src1, src2, rng, model1.omega_radius)
    gap = df_gap + g_gap
    L = dist / (gap * t) if gap * t > 0 else np.nan
    return {"t": t, "distance": dist, "df_gap": df_gap, "g_gap": g_gap,
            "L_measured": L, "bound": L * gap * t if np.isfinite(L) else np.nan}
