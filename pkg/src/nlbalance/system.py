"""Hyperbolic system models: eigenstructure, normalized wave curves,
Riemann strength coordinates and Glimm functionals.

Conventions.  States are deviations from a model base state, so the zero
vector is the reference point of the state space.  Characteristic families
are 0-based.  Genuinely nonlinear curves are parametrized so that the
characteristic speed grows at the constant rate k_j along both the
rarefaction and the shock branch; linearly degenerate curves use
arc-length.  Every state-valued function is vectorized over a leading
batch axis.
"""

from __future__ import annotations

import numpy as np

from .pcfn import PCFn

GNL = "gnl"
LD = "ld"


class HyperbolicityError(ValueError):
    """A sampled state violates strict hyperbolicity or the GNL/LD tags."""


class RiemannFailure(RuntimeError):
    """Newton inversion of the wave-curve gluing did not converge."""


class SystemModel:
    """Flux, eigenstructure and curve normalizations of a 1D system.

    Parameters
    ----------
    flux, jac : batched callables on (B, n) states.
    field_kinds : per-family "gnl" or "ld".
    omega_radius : half-width of the box domain around the origin.
    k : positive speed-rate normalizations of the GNL curves (default 1).
    lambda_hat : strict upper bound for all characteristic speeds; computed
        from a sampled sweep of the box when omitted.
    eig_fn : optional analytic (lam, R, L) hook, raw (unnormalized) output.
    grad_lambda_fn : optional analytic gradient hook, (U, j) -> (B, n).
    scalar_flux : for n == 1, a ScalarFlux giving closed-form curves.
    """

    def __init__(self, n, flux, jac, field_kinds, omega_radius,
                 k=None, lambda_hat=None, eig_fn=None, grad_lambda_fn=None,
                 scalar_flux=None, c0=None, name="system",
                 curve_h=0.005, cert_samples=5):
        self.n = int(n)
        self.flux = flux
        self.jac = jac
        self.field_kinds = tuple(field_kinds)
        if len(self.field_kinds) != self.n:
            raise ValueError("need one field kind per family")
        self.omega_radius = float(omega_radius)
        self.k = np.ones(self.n) if k is None else np.asarray(k, dtype=float)
        if np.any(self.k <= 0):
            raise ValueError("curve normalizations k_j must be positive")
        self._eig_fn = eig_fn
        self._grad_lambda_fn = grad_lambda_fn
        self.scalar_flux = scalar_flux
        self.name = name
        self.curve_h = float(curve_h)
        self._ref_R = None
        self._ref_R = self._reference_frame()
        lam_max = self._certify(cert_samples)
        if lambda_hat is None:
            lambda_hat = 1.05 * lam_max
        elif lambda_hat <= lam_max:
            raise HyperbolicityError(
                "lambda_hat=%g is not above the sampled speed %g"
                % (lambda_hat, lam_max))
        self.lambda_hat = float(lambda_hat)
        self.c0 = c0  # calibrated lazily by glimm_c0()

    # -- eigenstructure ------------------------------------------------

    def _reference_frame(self):
        _, R, _ = self._eig_raw(np.zeros((1, self.n)))
        R = R[0]
        R = R / np.linalg.norm(R, axis=0, keepdims=True)
        # canonical signs at the origin: largest-magnitude component > 0
        for j in range(self.n):
            lead = np.argmax(np.abs(R[:, j]))
            if R[lead, j] < 0:
                R[:, j] = -R[:, j]
        return R

    def _eig_raw(self, U):
        if self._eig_fn is not None:
            return self._eig_fn(U)
        A = self.jac(U)
        B = A.shape[0]
        lam = np.empty((B, self.n))
        R = np.empty((B, self.n, self.n))
        for b in range(B):
            w, v = np.linalg.eig(A[b])
            if np.any(np.abs(w.imag) > 1e-9):
                raise HyperbolicityError("complex characteristic speeds at %r"
                                         % (U[b],))
            order = np.argsort(w.real)
            lam[b] = w.real[order]
            R[b] = v.real[:, order]
        return lam, R, None

    def eig(self, U):
        """Sorted eigenvalues and biorthonormal frames at states U.

        Returns (lam, R, L) with R unit columns whose sign is fixed by
        continuity against the frame at the origin, and L = R^{-1} rows,
        so l_i . r_j = delta_ij.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        lam, R, _ = self._eig_raw(U)
        if np.any(np.diff(lam, axis=1) <= 0):
            raise HyperbolicityError("eigenvalues not strictly increasing")
        R = R / np.linalg.norm(R, axis=1, keepdims=True)
        sign = np.sign(np.einsum("bij,ij->bj", R, self._ref_R))
        sign[sign == 0] = 1.0
        R = R * sign[:, None, :]
        L = np.linalg.inv(R)
        return lam, R, L

    def grad_lambda(self, U, j):
        """Gradient of the j-th eigenvalue, (B, n)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self._grad_lambda_fn is not None:
            return self._grad_lambda_fn(U, j)
        h = 1e-6
        g = np.empty_like(U)
        for i in range(self.n):
            dp = U.copy(); dp[:, i] += h
            dm = U.copy(); dm[:, i] -= h
            g[:, i] = (self.eig(dp)[0][:, j] - self.eig(dm)[0][:, j]) / (2 * h)
        return g

    def tau(self, U, j):
        """Curve direction: k_j r_j / (grad lam_j . r_j) for GNL fields,
        the unit eigenvector for LD fields."""
        _, R, _ = self.eig(U)
        r = R[:, :, j]
        if self.field_kinds[j] == LD:
            return r
        g = np.einsum("bi,bi->b", self.grad_lambda(U, j), r)
        return self.k[j] * r / g[:, None]

    # -- certification of hypothesis (F) --------------------------------

    def _certify(self, samples):
        if samples < 1:
            return abs(self.eig(np.zeros((1, self.n)))[0]).max()
        axes = [np.linspace(-self.omega_radius, self.omega_radius, samples)] * self.n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        lam, R, _ = self.eig(grid)
        if self.n > 1:
            gaps = np.diff(lam, axis=1)
            if gaps.min() <= 1e-10:
                raise HyperbolicityError(
                    "eigenvalue gap %.3g too small inside the domain box"
                    % gaps.min())
        for j in range(self.n):
            g = np.einsum("bi,bi->b", self.grad_lambda(grid, j), R[:, :, j])
            if self.field_kinds[j] == GNL and np.any(np.abs(g) < 1e-8):
                raise HyperbolicityError("field %d tagged GNL but grad"
                                         " lam . r vanishes on the box" % j)
            if self.field_kinds[j] == LD and np.any(np.abs(g) > 1e-7):
                raise HyperbolicityError("field %d tagged LD but grad"
                                         " lam . r = %.3g on the box" % (j, np.abs(g).max()))
        return float(np.abs(lam).max())

    def check_domain(self, U):
        U = np.atleast_2d(U)
        return bool(np.all(np.abs(U) <= self.omega_radius + 1e-12))

    @property
    def is_scalar(self):
        return self.n == 1 and self.scalar_flux is not None

    def glimm_c0(self, rng=None, samples=40):
        """Interaction-functional constant: 4x the sampled strength
        amplification of pairwise interactions (floored at 1)."""
        if self.c0 is None:
            rng = np.random.default_rng(0) if rng is None else rng
            self.c0 = calibrate_c0(self, rng, samples)
        return self.c0


class ScalarFlux:
    """Convex scalar flux with the closed-form wave-curve parametrization
    psi(sigma)(u) = (f')^{-1}(f'(u) + k sigma)."""

    def __init__(self, f, df, inv_df, d2f=None, name="scalar"):
        self.f = f
        self.df = df
        self.inv_df = inv_df
        self.d2f = d2f
        self.name = name

    def rh_speed(self, a, b):
        """Exact Rankine-Hugoniot speed (f(b)-f(a))/(b-a), with the
        characteristic limit on coincident states."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        gap = b - a
        small = np.abs(gap) < 1e-13
        safe = np.where(small, 1.0, gap)
        out = (self.f(b) - self.f(a)) / safe
        return np.where(small, self.df(0.5 * (a + b)), out)


def burgers_flux():
    return ScalarFlux(f=lambda u: 0.5 * u * u, df=lambda u: np.asarray(u, dtype=float),
                      inv_df=lambda p: np.asarray(p, dtype=float),
                      d2f=lambda u: np.ones_like(np.asarray(u, dtype=float)),
                      name="burgers")


# ----------------------------------------------------------------------
# wave curves
# ----------------------------------------------------------------------

def rarefaction_curve(model, j, sigma, U):
    """State reached from U along the j-th (k_j-normalized) integral
    curve after parameter sigma; RK4 with per-element substeps."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), U.shape[:1]).copy()
    if model.is_scalar:
        k = model.k[0]
        p = model.scalar_flux.df(U[:, 0]) + k * sigma
        return model.scalar_flux.inv_df(p)[:, None]
    span = float(np.abs(sigma).max())
    if not np.isfinite(span):
        raise RiemannFailure("non-finite curve parameter")
    m = min(400, max(2, int(np.ceil(span / model.curve_h))))
    h = (sigma / m)[:, None]
    W = U.copy()
    for _ in range(m):
        k1 = model.tau(W, j)
        k2 = model.tau(W + 0.5 * h * k1, j)
        k3 = model.tau(W + 0.5 * h * k2, j)
        k4 = model.tau(W + h * k3, j)
        W = W + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return W


def shock_curve(model, j, sigma, U, return_speed=False):
    """Rankine-Hugoniot branch through U with d lam_j/d sigma = k_j.

    Solves f(W) - f(U) = Lam (W - U), lam_j(W) = lam_j(U) + k_j sigma by
    a bordered Newton iteration seeded with the rarefaction curve (the
    branches have second-order contact).  Linearly degenerate families
    return the contact curve, whose speed is the constant lam_j.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), U.shape[:1]).copy()
    if model.is_scalar:
        W = rarefaction_curve(model, j, sigma, U)
        if not return_speed:
            return W
        return W, model.scalar_flux.rh_speed(U[:, 0], W[:, 0])
    lam_U = model.eig(U)[0][:, j]
    if model.field_kinds[j] == LD:
        W = rarefaction_curve(model, j, sigma, U)
        if not return_speed:
            return W
        return W, model.eig(W)[0][:, j]
    W = rarefaction_curve(model, j, sigma, U)
    speed = lam_U + 0.5 * model.k[j] * sigma
    active = np.abs(sigma) >= 1e-7
    if np.any(active):
        n = model.n
        Wa = W[active]
        Ua = U[active]
        La = speed[active]
        target = lam_U[active] + model.k[j] * sigma[active]
        with np.errstate(invalid="ignore", divide="ignore"):
            fU = model.flux(Ua)
            for _ in range(40):
                res = np.empty((len(Wa), n + 1))
                res[:, :n] = model.flux(Wa) - fU - La[:, None] * (Wa - Ua)
                res[:, n] = model.eig(Wa)[0][:, j] - target
                ok = np.isfinite(res).all(axis=1)
                res[~ok] = 0.0  # freeze non-finite elements; caller sees NaN W
                if np.abs(res).max() < 1e-13:
                    break
                J = np.zeros((len(Wa), n + 1, n + 1))
                J[ok, :n, :n] = model.jac(Wa[ok])
                J[:, :n, :n] -= La[:, None, None] * np.eye(n)
                J[:, :n, n] = -(Wa - Ua)
                J[ok, n, :n] = model.grad_lambda(Wa[ok], j)
                J[~ok] = np.eye(n + 1)
                try:
                    dX = np.linalg.solve(J, -res[:, :, None])[:, :, 0]
                except np.linalg.LinAlgError:
                    dX = np.stack([np.linalg.lstsq(J[b], -res[b], rcond=None)[0]
                                   for b in range(len(Wa))])
                Wa = Wa + dX[:, :n]
                La = La + dX[:, n]
        W[active] = Wa
        speed[active] = La
    if not return_speed:
        return W
    return W, speed


def lax_curve(model, j, sigma, U):
    """psi_j: rarefaction branch for sigma >= 0, shock branch for sigma < 0."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), U.shape[:1]).copy()
    if model.is_scalar or model.field_kinds[j] == LD:
        return rarefaction_curve(model, j, sigma, U)
    W = np.empty_like(U)
    pos = sigma >= 0
    if np.any(pos):
        W[pos] = rarefaction_curve(model, j, sigma[pos], U[pos])
    if np.any(~pos):
        W[~pos] = shock_curve(model, j, sigma[~pos], U[~pos])
    return W


def psi_glue(model, sigma, U, chain=False, curve=lax_curve):
    """Psi(sigma)(U) = psi_n(sigma_n) o ... o psi_1(sigma_1)(U).

    With chain=True returns the (B, n+1, n) array of intermediate states.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    states = np.empty((U.shape[0], model.n + 1, model.n))
    states[:, 0] = U
    W = U
    for j in range(model.n):
        W = curve(model, j, sigma[:, j], W)
        states[:, j + 1] = W
    return states if chain else W


def rh_glue(model, sigma, U, chain=False):
    """S(sigma)(U): gluing of the Rankine-Hugoniot curves (all signs)."""
    return psi_glue(model, sigma, U, chain=chain,
                    curve=lambda m, j, s, u: shock_curve(m, j, s, u))


def _strength_frame(model, U):
    """Matrix of curve tangents at U: initial Newton preconditioner."""
    T = np.empty((U.shape[0], model.n, model.n))
    for j in range(model.n):
        T[:, :, j] = model.tau(U, j)
    return T


def riemann_strengths(model, ul, ur, tol=1e-10, max_iter=50, glue=psi_glue):
    """The map E: strength vector sigma with Psi(sigma)(ul) = ur.

    Damped (factor 1/2) Newton iteration with a chord Jacobian, refreshed
    by finite differences every tenth step; RiemannFailure with the worst
    residual if any batch element fails to reach `tol` in `max_iter`.
    """
    ul = np.atleast_2d(np.asarray(ul, dtype=float))
    ur = np.atleast_2d(np.asarray(ur, dtype=float))
    if model.is_scalar:
        k = model.k[0]
        sf = model.scalar_flux
        return ((sf.df(ur[:, 0]) - sf.df(ul[:, 0])) / k)[:, None]
    cap = 25.0 * model.omega_radius  # strengths beyond this are divergence
    with np.errstate(invalid="ignore", divide="ignore"):
        T = _strength_frame(model, ul)
        sigma = np.linalg.solve(T, (ur - ul)[:, :, None])[:, :, 0]
        sigma = np.clip(np.nan_to_num(sigma), -cap, cap)
        res = glue(model, sigma, ul) - ur
        rnorm = np.linalg.norm(res, axis=1)
        thresh = tol * np.minimum(1.0, np.maximum(
            1.0, np.linalg.norm(ur - ul, axis=1)))
        for it in range(max_iter):
            todo = ~(rnorm <= thresh)  # NaN-safe
            if not np.any(todo):
                break
            if it and it % 10 == 0:
                T[todo] = _fd_glue_jacobian(model, sigma[todo], ul[todo], glue)
            step = np.linalg.solve(T[todo], res[todo][:, :, None])[:, :, 0]
            step = np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0)
            idx = np.flatnonzero(todo)
            best_s = sigma[idx].copy()
            best_r = res[idx].copy()
            best_n = rnorm[idx].copy()
            damp = np.ones(len(idx))
            searching = np.ones(len(idx), dtype=bool)
            for _ in range(6):
                cand = np.clip(sigma[idx] - damp[:, None] * step, -cap, cap)
                sub = np.flatnonzero(searching)
                cres = glue(model, cand[sub], ul[idx[sub]]) - ur[idx[sub]]
                cnorm = np.linalg.norm(cres, axis=1)
                better = cnorm < best_n[sub]
                acc = sub[better]
                best_s[acc] = cand[acc]
                best_r[acc] = cres[better]
                best_n[acc] = cnorm[better]
                searching[acc] = False
                if not np.any(searching):
                    break
                damp[searching] *= 0.5
            sigma[idx] = best_s
            res[idx] = best_r
            rnorm[idx] = best_n
        if not np.all(rnorm <= np.maximum(thresh, tol)):
            worst = float(np.nanmax(rnorm)) if np.any(np.isfinite(rnorm)) \
                else float("nan")
            raise RiemannFailure(
                "strength inversion stalled: residual %.3e > %.0e "
                "(states too far apart?)" % (worst, tol))
    return sigma


def _fd_glue_jacobian(model, sigma, ul, glue, h=1e-8):
    B, n = sigma.shape
    J = np.empty((B, n, n))
    base = glue(model, sigma, ul)
    for j in range(n):
        d = sigma.copy()
        d[:, j] += h
        J[:, :, j] = (glue(model, d, ul) - base) / h
    return J


def rh_strengths(model, ul, ur, **kw):
    """Strength coordinates along the all-shock gluing S (Lemma 3.5 variant)."""
    return riemann_strengths(model, ul, ur, glue=rh_glue, **kw)


# ----------------------------------------------------------------------
# Glimm functionals
# ----------------------------------------------------------------------

def interaction_potential(families, strengths, kinds_gnl, n):
    """Q over approaching pairs, O(F) via prefix sums.

    Approaching: positions x < y with families i > j, or equal GNL family
    with min(sigma_x, sigma_y) < 0.  `families` may contain the value n
    for non-physical fronts (they approach every physical wave ahead).
    """
    families = np.asarray(families)
    strengths = np.asarray(strengths, dtype=float)
    abss = np.abs(strengths)
    nfam = n + 1
    prefix = np.zeros(nfam)
    q = 0.0
    for fam, s in zip(families, abss):
        q += prefix[fam + 1:].sum() * s
        prefix[fam] += s
    for j in range(n):
        if not kinds_gnl[j]:
            continue
        s = strengths[families == j]
        if len(s) < 2:
            continue
        tot = np.abs(s).sum() ** 2 - (s ** 2).sum()
        pos = s[s >= 0]
        tot_pos = pos.sum() ** 2 - (pos ** 2).sum()
        q += 0.5 * (tot - tot_pos)
    return float(q)


def glimm_functionals(model, u, c0=None):
    """(V, Q, Upsilon) of a piecewise-constant state.

    Accepts a PCFn (jumps are resolved through riemann_strengths) or a
    pair (families, strengths) of already-resolved waves in position order.
    """
    if isinstance(u, PCFn):
        if u.njumps == 0:
            return 0.0, 0.0, 0.0
        sig = riemann_strengths(model, u.vals[:-1], u.vals[1:])
        families = np.repeat(np.arange(model.n)[None, :], u.njumps, axis=0).ravel()
        strengths = sig.ravel()
    else:
        families, strengths = u
        families = np.asarray(families)
        strengths = np.asarray(strengths, dtype=float)
    keep = np.abs(strengths) > 0
    families = families[keep]
    strengths = strengths[keep]
    V = float(np.abs(strengths).sum())
    kinds_gnl = [kind == GNL for kind in model.field_kinds]
    Q = interaction_potential(families, strengths, kinds_gnl, model.n)
    if c0 is None:
        c0 = model.glimm_c0()
    return V, Q, V + c0 * Q


def calibrate_c0(model, rng, samples=40):
    """Sampled amplification constant of pairwise interactions."""
    worst = 0.0
    scale = 0.25 * model.omega_radius
    for _ in range(samples):
        ul = rng.uniform(-0.3, 0.3, model.n) * model.omega_radius
        d1, d2 = sorted(rng.integers(0, model.n, 2))[::-1]  # d1 >= d2
        s1, s2 = rng.uniform(-scale, scale, 2)
        if d1 == d2:
            if model.field_kinds[d1] == LD:
                continue
            s1 = -abs(s1)  # same GNL family approaches only with a shock
        um = lax_curve(model, d1, np.array([s1]), ul[None, :])
        ur = lax_curve(model, d2, np.array([s2]), um)
        try:
            out = riemann_strengths(model, ul[None, :], ur)
        except RiemannFailure:
            continue
        v_in = abs(s1) + abs(s2)
        v_out = np.abs(out).sum()
        if v_out > v_in and abs(s1 * s2) > 1e-14:
            worst = max(worst, (v_out - v_in) / abs(s1 * s2))
    return max(1.0, 4.0 * worst)
