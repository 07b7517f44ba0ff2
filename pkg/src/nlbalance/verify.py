"""Solution-quality oracles: the local Riemann-fan / frozen-coefficient
integral characterization, weak-entropy residuals against nonnegative
test functions, and the hyperbolic rescaling identity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .pcfn import PCFn, CombinedFn, dilate
from .source import apply_g
from .system import rarefaction_curve, riemann_strengths, psi_glue
from .splitting import SplitSchedule, run, convective


@dataclass
class LocalWindow:
    """Integral window around xi shrinking at the characteristic rate."""
    xi: float
    a: float
    b: float
    thetas: tuple

    def __post_init__(self):
        if not (self.a < self.xi < self.b):
            raise ValueError("need a < xi < b")
        if any(t <= 0 for t in self.thetas):
            raise ValueError("window durations must be positive")


class RiemannFan:
    """Self-similar solution (theta, x) -> U of the homogeneous Riemann
    problem at (v(xi-), v(xi+)); rarefaction interiors are evaluated
    exactly through the k_j-normalized curve parametrization."""

    def __init__(self, model, ul, ur, xi=0.0):
        self.model = model
        self.xi = float(xi)
        ul = np.asarray(ul, dtype=float)
        ur = np.asarray(ur, dtype=float)
        sig = riemann_strengths(model, ul[None, :], ur[None, :])[0]
        chain = psi_glue(model, sig[None, :], ul[None, :], chain=True)[0]
        chain[-1] = ur
        waves = []  # (lo_speed, hi_speed, family, left_state, sigma)
        for j in range(model.n):
            s = sig[j]
            if abs(s) < 1e-14:
                continue
            wl = chain[j]
            wr = chain[j + 1]
            if model.field_kinds[j] == "ld":
                lam = float(model.eig(wl[None, :])[0][0, j])
                waves.append((lam, lam, j, wl, s))
            elif s < 0:
                d = wr - wl
                df = model.flux(wr[None, :])[0] - model.flux(wl[None, :])[0]
                lam = float(d @ df / (d @ d))
                waves.append((lam, lam, j, wl, s))
            else:
                lo = float(model.eig(wl[None, :])[0][0, j])
                waves.append((lo, lo + model.k[j] * s, j, wl, s))
        self.chain = chain
        self.waves = waves
        bounds = []
        for lo, hi, *_ in waves:
            bounds.extend([lo, hi])
        self.bounds = np.asarray(bounds)

    def __call__(self, theta, x):
        """States at time theta and positions x; (P, n)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if theta <= 0:
            raise ValueError("theta must be positive")
        speeds = (x - self.xi) / theta
        out = np.empty((len(x), self.model.n))
        region = np.searchsorted(self.bounds, speeds, side="right")
        for r in np.unique(region):
            mask = region == r
            if r % 2 == 0:
                out[mask] = self.chain[self._state_index(r // 2)]
            else:
                lo, hi, j, wl, s = self.waves[r // 2]
                loc = (speeds[mask] - lo) / self.model.k[j]
                out[mask] = rarefaction_curve(self.model, j, loc,
                                              np.tile(wl, (mask.sum(), 1)))
        return out

    def _state_index(self, wave_pos):
        # state between wave (wave_pos-1) and wave wave_pos
        if wave_pos == 0:
            return 0
        j_prev = self.waves[wave_pos - 1][2]
        return j_prev + 1

    def boundary_positions(self, theta):
        return self.xi + theta * self.bounds


def u_sharp(model, v: PCFn, xi):
    """Riemann fan evaluator at the one-sided limits of v at xi."""
    ul = v(np.array([xi]))[0]
    idx = np.searchsorted(v.xs, xi, side="right")
    ur = v.vals[idx] if idx < len(v.vals) else v.vals[-1]
    return RiemannFan(model, ul, ur, xi)


class FrozenFlow:
    """Frozen-coefficient evolution at v(xi): transported eigencomponents
    of v plus characteristic integrals of G(v); exact for PCFn v and
    exponential-kernel sources."""

    def __init__(self, model, src, v: PCFn, xi, exact_source=True, N=None):
        self.model = model
        self.v = v
        vxi = v(np.array([xi]))[0]
        lam, R, L = model.eig(vxi[None, :])
        self.lam = lam[0]
        self.R = R[0]
        self.L = L[0]
        if src is None:
            self.gv = None
        elif exact_source:
            gval = src.apply(v)
            self.gv = gval if isinstance(gval, CombinedFn) else CombinedFn(gval)
        else:
            self.gv = CombinedFn(apply_g(src, v, N))

    def transport(self, theta, x):
        """U^{b,1}: sum_i (l_i . v(x - lam_i theta)) r_i."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), self.model.n))
        for i in range(self.model.n):
            comp = self.v(x - self.lam[i] * theta) @ self.L[i]
            out += np.outer(comp, self.R[:, i])
        return out

    def source_part(self, theta, x):
        """U^{b,2}: sum_i (int_0^theta (l_i . G(v))(x - lam_i s) ds) r_i."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), self.model.n))
        if self.gv is None:
            return out
        for i in range(self.model.n):
            li = self.L[i]
            lam = self.lam[i]
            if abs(lam) < 1e-14:
                vals = self.gv(x) @ li * theta
            else:
                upper = self.gv.integral_to(x) @ li
                lower = self.gv.integral_to(x - lam * theta) @ li
                vals = (upper - lower) / lam
            out += np.outer(vals, self.R[:, i])
        return out

    def __call__(self, theta, x):
        return self.transport(theta, x) + self.source_part(theta, x)


def u_flat(model, src, v: PCFn, xi, **kw):
    """Frozen-coefficient comparison evolution at xi (broad solution)."""
    return FrozenFlow(model, src, v, xi, **kw)


def _window_integral(fn, lo, hi, nodes, tol=1e-10):
    """int_lo^hi ||fn(x)|| dx with quadrature split at the given nodes."""
    if hi <= lo:
        return 0.0
    pts = np.unique(np.clip(np.asarray(nodes, dtype=float), lo, hi))
    pts = np.concatenate([[lo], pts, [hi]])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a < 1e-14:
            continue
        val, _ = quad(lambda x: float(np.linalg.norm(fn(np.array([x]))[0])),
                      a, b, epsabs=tol, epsrel=1e-9, limit=100)
        total += val
    return total


def check_characterization(model, src, u: PCFn, window: LocalWindow,
                           sched: SplitSchedule, levels=4):
    """Both local integral quotients of the trajectory through u.

    For each theta: (6a) averages |F_theta u - U_sharp(theta)| over
    [xi -/+ theta lambda_hat]; (6b) averages |F_theta u - U_flat(theta)|
    over [a + theta lambda_hat, b - theta lambda_hat], reported against
    the squared total variation of u on ]a, b[.
    """
    lam_hat = model.lambda_hat
    sharp = u_sharp(model, u, window.xi)
    flat = u_flat(model, src, u, window.xi)
    inner = (u.xs > window.a) & (u.xs < window.b)
    tv_window = float(np.linalg.norm(u.jumps()[inner], axis=1).sum()) \
        if u.njumps else 0.0
    rows = []
    for theta in sorted(window.thetas, reverse=True):
        if src.kind == "zero":
            ftheta = convective(model, u, theta, sched)
        else:
            ftheta, _ = run(model, src, u,
                            sched.replace(s=theta / 2 ** levels, t_final=theta))
        nodes = np.concatenate([ftheta.xs, sharp.boundary_positions(theta)])
        qa = _window_integral(
            lambda x: ftheta(x) - sharp(theta, x),
            window.xi - theta * lam_hat, window.xi + theta * lam_hat,
            nodes) / theta
        shift_nodes = [ftheta.xs]
        for i in range(model.n):
            shift_nodes.append(u.xs + flat.lam[i] * theta)
        qb = _window_integral(
            lambda x: ftheta(x) - flat(theta, x),
            window.a + theta * lam_hat, window.b - theta * lam_hat,
            np.concatenate(shift_nodes)) / theta
        rows.append({
            "theta": theta, "quotient_sharp": qa, "quotient_flat": qb,
            "tv_window": tv_window,
            "flat_constant": qb / tv_window ** 2 if tv_window > 0 else np.nan,
        })
    return rows


# ----------------------------------------------------------------------
# weak entropy residuals
# ----------------------------------------------------------------------

@dataclass
class EntropyPair:
    """Convex entropy eta with flux q; deta is the state gradient."""
    eta: callable
    q: callable
    deta: callable
    name: str = "entropy"

    def check_convex(self, probe, tol=1e-10):
        """Sampled midpoint convexity along random segments."""
        a, b = probe
        mid = 0.5 * (a + b)
        gap = 0.5 * (self.eta(a) + self.eta(b)) - self.eta(mid)
        if np.any(gap < -tol):
            raise ValueError("entropy %s is not convex on the probe set"
                             % self.name)


def kruzkov_pair(flux, k):
    """Kruzkov entropy |u - k| for a scalar flux."""
    def eta(vals):
        return np.abs(vals[:, 0] - k)

    def q(vals):
        u = vals[:, 0]
        return np.sign(u - k) * (flux.f(u) - flux.f(k))

    def deta(vals):
        return np.sign(vals[:, 0] - k)[:, None]

    return EntropyPair(eta, q, deta, name="kruzkov(k=%.3g)" % k)


def euler_entropy_pair(model):
    """Physical entropy -rho s / (gamma - 1) with flux v eta."""
    gas = model.gas

    def prim(vals):
        return model.physical(vals)

    def eta(vals):
        p = prim(vals)
        rho, pres = p[:, 0], p[:, 3]
        s = np.log(pres) - gas.gamma * np.log(rho)
        return -rho * s / (gas.gamma - 1.0)

    def q(vals):
        return prim(vals)[:, 1] * eta(vals)

    def deta(vals, h=1e-7):
        out = np.empty((len(vals), 3))
        for i in range(3):
            dp = vals.copy(); dp[:, i] += h
            dm = vals.copy(); dm[:, i] -= h
            out[:, i] = (eta(dp) - eta(dm)) / (2 * h)
        return out

    return EntropyPair(eta, q, deta, name="euler-physical")


@dataclass
class HatFunction:
    """Piecewise-linear hat on [lo, peak, hi]."""
    lo: float
    peak: float
    hi: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        up = (x - self.lo) / (self.peak - self.lo)
        dn = (self.hi - x) / (self.hi - self.peak)
        return np.clip(np.minimum(up, dn), 0.0, None)

    def integral_to(self, x):
        """Primitive of the hat, exact."""
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        left = 0.5 * (x - self.lo) ** 2 / (self.peak - self.lo)
        peak_area = 0.5 * (self.peak - self.lo)
        right = peak_area + (self.hi - self.peak) * 0.5 \
            - 0.5 * (self.hi - x) ** 2 / (self.hi - self.peak)
        return np.where(x <= self.peak, left, right)

    def slope_breaks(self):
        return np.array([self.lo, self.peak, self.hi])

    def slopes(self):
        return np.array([1.0 / (self.peak - self.lo),
                         -1.0 / (self.hi - self.peak)])


def _interval_vals(u_xs, u_vals, grid):
    """Values of a PC function (breaks u_xs, one-more-row u_vals) on the
    bounded intervals of `grid`."""
    mids = 0.5 * (grid[:-1] + grid[1:])
    idx = np.searchsorted(u_xs, mids, side="left")
    return u_vals[idx]


def _pc_against_hat(u_xs, u_vals, hat):
    """Exact integral of a scalar PC function against the hat."""
    grid = np.unique(np.concatenate([np.clip(u_xs, hat.lo, hat.hi),
                                     hat.slope_breaks()]))
    vals = _interval_vals(u_xs, u_vals, grid)
    segs = np.diff(hat.integral_to(grid))
    return float(vals @ segs)


def _pc_against_hat_slope(u_xs, u_vals, hat):
    """Exact integral of a scalar PC function against the hat derivative."""
    total = 0.0
    breaks = hat.slope_breaks()
    for (a, b), sl in zip(zip(breaks[:-1], breaks[1:]), hat.slopes()):
        grid = np.unique(np.clip(np.concatenate([[a, b], u_xs]), a, b))
        vals = _interval_vals(u_xs, u_vals, grid)
        total += sl * float(vals @ np.diff(grid))
    return total


def entropy_residual(model, src, states, pairs, hats_t, hats_x,
                     sched: SplitSchedule):
    """Distributional entropy residual of a sampled trajectory.

    states: list of (t_j, PCFn).  For each convex pair (eta, q) and tensor
    hat phi = T(t) X(x), reports

        R(phi) = -int int [eta(u) T'(t) X + q(u) T X'
                           + (deta(u) . G~(u)) T X] dx dt

    which must stay below tolerance (one-sided: arbitrarily negative
    values pass); G~ is the projected source the scheme actually applied.
    Space integrals are exact (PC against PL); time integration is
    trapezoidal on the sample times, split at the temporal hat peak.
    """
    times = np.array([t for t, _ in states])
    rows = []
    allvals = np.concatenate([uj.vals for _, uj in states])
    rng = np.random.default_rng(0)
    probe = (allvals[rng.integers(0, len(allvals), 64)],
             allvals[rng.integers(0, len(allvals), 64)])
    source_profiles = []
    for tj, uj in states:
        if src.kind == "zero":
            source_profiles.append(None)
        else:
            gu = apply_g(src, uj, sched.N)
            xs = np.union1d(uj.xs, gu.xs)
            source_profiles.append((xs, uj._values_on(xs), gu._values_on(xs)))
    for pair in pairs:
        pair.check_convex(probe)
        eta_series = [pair.eta(uj.vals) for _, uj in states]
        q_series = [pair.q(uj.vals) for _, uj in states]
        w_series = []
        for prof in source_profiles:
            if prof is None:
                w_series.append(None)
            else:
                xs, uv, gv = prof
                w_series.append((xs, np.einsum("bi,bi->b", pair.deta(uv), gv)))
        for ht in hats_t:
            if ht.lo < times[0] - 1e-12 or ht.hi > times[-1] + 1e-12:
                raise ValueError("temporal hat [%g, %g] is not covered by "
                                 "the sampled trajectory" % (ht.lo, ht.hi))
            for hx in hats_x:
                term_t = np.array([
                    _pc_against_hat(uj.xs, eta_series[j], hx)
                    for j, (_, uj) in enumerate(states)])
                term_x = np.array([
                    _pc_against_hat_slope(uj.xs, q_series[j], hx)
                    for j, (_, uj) in enumerate(states)])
                term_s = np.zeros(len(states))
                for j, w in enumerate(w_series):
                    if w is not None:
                        term_s[j] = _pc_against_hat(w[0], w[1], hx)
                r_t = _time_integral(ht, times, term_t, derivative=True)
                r_x = _time_integral(ht, times, term_x)
                r_s = _time_integral(ht, times, term_s)
                residual = -(r_t + r_x + r_s)
                rows.append({"pair": pair.name,
                             "phi": "T[%.3g|%.3g|%.3g]X[%.3g|%.3g|%.3g]" % (
                                 ht.lo, ht.peak, ht.hi, hx.lo, hx.peak, hx.hi),
                             "residual": residual,
                             "positive_part": max(residual, 0.0)})
    return rows


def _time_integral(ht, times, series, derivative=False):
    """int w(t) B(t) dt with B the piecewise-linear interpolant of the
    samples and w either the hat T (continuous PL) or its derivative T'
    (piecewise constant); exact on the merged grid (Simpson per cell)."""
    lo, hi = times[0], times[-1]
    grid = np.unique(np.clip(np.concatenate([times, ht.slope_breaks()]),
                             lo, hi))
    total = 0.0
    for a, b in zip(grid[:-1], grid[1:]):
        if b - a < 1e-15:
            continue
        m = 0.5 * (a + b)
        Ba = np.interp(a, times, series)
        Bm = np.interp(m, times, series)
        Bb = np.interp(b, times, series)
        if derivative:
            if m <= ht.lo or m >= ht.hi:
                continue
            sl = ht.slopes()[0] if m < ht.peak else ht.slopes()[1]
            total += sl * (b - a) * 0.5 * (Ba + Bb)
        else:
            total += (b - a) / 6.0 * (ht(a) * Ba + 4 * ht(m) * Bm + ht(b) * Bb)
    return total


def rescaling_check(model, u: PCFn, t, lam_list, sched: SplitSchedule):
    """max over lambda of lambda * || (S_t u)_lam - S_{t/lam} u_lam ||."""
    base = convective(model, u, t, sched)
    rows = []
    for lam in lam_list:
        a = dilate(base, lam)
        b = convective(model, dilate(u, lam), t / lam, sched)
        rows.append({"lambda": lam, "deviation": lam * a.l1_dist(b)})
    return rows, max(r["deviation"] for r in rows)
