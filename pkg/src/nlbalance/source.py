"""Source operators G with declared (G)-constants, the Euler step
P_t u = u + t G(u), the exact flow Sigma_t of du/dt = G(u), and the
piecewise-constant composition Pi_N o G."""

from __future__ import annotations

import numpy as np

from .pcfn import PCFn, ExpConvolution, CombinedFn, convolve, project


class SourceDomainError(RuntimeError):
    """State or horizon outside the operator's validity domain."""


class SourceOp:
    """Operator u -> G(u) on L1 with declared constants of hypothesis (G):

        ||G(u) - G(w)||_L1 <= L1 ||u - w||_L1
        TV(G(u)) <= L2 TV(u) + L3

    ``apply`` returns the exact value (a PCFn or CombinedFn closed form);
    ``apply_g`` composes with the projection Pi_N to return to the
    piecewise-constant class.
    """

    kind = "zero"

    def __init__(self, dim, L1, L2, L3, delta0=np.inf, name="source"):
        self.dim = int(dim)
        self.L1 = float(L1)
        self.L2 = float(L2)
        self.L3 = float(L3)
        self.delta0 = float(delta0)
        self.name = name

    def apply(self, u: PCFn):
        raise NotImplementedError

    def check_domain(self, u: PCFn):
        if u.tv() > self.delta0 + 1e-12:
            raise SourceDomainError(
                "TV(u)=%.4g exceeds the source domain bound delta0=%.4g"
                % (u.tv(), self.delta0))

    def describe(self) -> str:
        return "%s (kind=%s): L1=%.6g, L2=%.6g, L3=%.6g" % (
            self.name, self.kind, self.L1, self.L2, self.L3)


class ZeroSource(SourceOp):
    """G = 0; every downstream construct degenerates to the pure
    convective semigroup."""

    kind = "zero"

    def __init__(self, dim):
        super().__init__(dim, 0.0, 0.0, 0.0, name="zero")

    def apply(self, u: PCFn):
        return PCFn.zero(self.dim)


class ConvolutionSource(SourceOp):
    """G(u) = g(u) + sum_c K_c * h_c(u) with pointwise locally Lipschitz
    g, h_c (g(0) = h_c(0) = 0) and exponential kernels K_c.

    Satisfies (G) with L1 = L2 = Lip(g) + sum_c ||K_c|| Lip(h_c), L3 = 0.
    """

    kind = "convolution"

    def __init__(self, dim, g, lip_g, terms, delta0=np.inf, name="convolution"):
        # terms: list of (ExpKernel, h, lip_h)
        lip_total = lip_g + sum(K.l1_norm() * lip_h for K, _, lip_h in terms)
        super().__init__(dim, lip_total, lip_total, 0.0, delta0, name)
        self.g = g
        self.lip_g = float(lip_g)
        self.terms = [(K, h, float(lip_h)) for K, h, lip_h in terms]

    def apply(self, u: PCFn) -> CombinedFn:
        pc = PCFn(u.xs, self.g(u.vals)) if self.lip_g or True else PCFn.zero(self.dim)
        convs = [convolve(K, PCFn(u.xs, h(u.vals))) for K, h, _ in self.terms]
        return CombinedFn(pc, convs)

    def conv_part(self, u: PCFn) -> CombinedFn:
        """The nonlocal part sum_c K_c*h_c(u) alone (Proposition-style
        TV bound: TV <= sum_c Lip(h_c) ||K_c|| TV(u))."""
        return CombinedFn(PCFn.zero(self.dim),
                          [convolve(K, PCFn(u.xs, h(u.vals))) for K, h, _ in self.terms])

    def conv_tv_coefficient(self) -> float:
        return sum(K.l1_norm() * lip_h for K, _, lip_h in self.terms)


class LocalSource(SourceOp):
    """Local source (G(u))(x) = g(x, u(x)) with g piecewise constant in x.

    (g1) gives the L1-Lipschitz constant; (g2)'s finite measure is the
    atom masses at the x-breakpoints, bounded over the state box.
    """

    kind = "local"

    def __init__(self, dim, g, x_breaks, lip_u, omega_radius,
                 delta0=np.inf, name="local", probe=17):
        x_breaks = np.sort(np.asarray(x_breaks, dtype=float))
        mu_mass = _local_mu_mass(g, x_breaks, dim, omega_radius, probe)
        super().__init__(dim, lip_u, lip_u, mu_mass, delta0, name)
        self.g = g
        self.x_breaks = x_breaks
        self.omega_radius = float(omega_radius)
        self.mu_mass = mu_mass
        # L1-valued: g(x, 0) must vanish on both unbounded tails
        far = np.array([x_breaks[0] - 1.0, x_breaks[-1] + 1.0]) if len(x_breaks) \
            else np.array([-1.0, 1.0])
        tails = g(far, np.zeros((2, dim)))
        if np.any(np.abs(tails) > 0):
            raise ValueError("g(x, 0) must vanish for x outside the breakpoints")

    def apply(self, u: PCFn) -> PCFn:
        xs = np.union1d(u.xs, self.x_breaks)
        if len(xs) == 0:
            return PCFn.zero(self.dim)
        uv = u._values_on(xs)
        # interior representative x per cell (cells left-open right-closed)
        rep = np.empty(len(xs) + 1)
        rep[0] = xs[0] - 1.0
        rep[-1] = xs[-1] + 1.0
        rep[1:-1] = 0.5 * (xs[:-1] + xs[1:])
        return PCFn(xs, self.g(rep, uv))


def _local_mu_mass(g, x_breaks, dim, omega_radius, probe):
    if len(x_breaks) == 0:
        return 0.0
    us = np.linspace(-omega_radius, omega_radius, probe)
    states = np.stack(np.meshgrid(*([us] * dim), indexing="ij"),
                      axis=-1).reshape(-1, dim) if dim > 1 else us[:, None]
    mass = 0.0
    for xb in x_breaks:
        xl = np.full(len(states), xb - 1e-9)
        xr = np.full(len(states), xb + 1e-9)
        jump = np.linalg.norm(g(xr, states) - g(xl, states), axis=1)
        mass += float(jump.max())
    return mass


class TimeDependentSource(SourceOp):
    """Wrapper G(t, u) satisfying (G'): used through the non-autonomous
    augmentation, which turns it back into an autonomous source."""

    kind = "nonautonomous"

    def __init__(self, dim, factory, L1, L2, L3, delta0=np.inf,
                 name="time-dependent"):
        super().__init__(dim, L1, L2, L3, delta0, name)
        self.factory = factory  # t -> SourceOp of matching constants

    def at(self, t: float) -> SourceOp:
        return self.factory(float(t))


class AugmentedSource(SourceOp):
    """Autonomous source of the (n+1)-dimensional clock augmentation:

        G~(u, w) = ( G(int w, u), chi_[0,1] )

    The last component is forced by the indicator of [0,1], whose
    transport at speed lambda_hat integrates to exactly t.
    """

    kind = "nonautonomous-augmented"

    def __init__(self, inner: TimeDependentSource):
        super().__init__(inner.dim + 1, inner.L1, inner.L2, inner.L3 + 2.0,
                         inner.delta0, name=inner.name + "+clock")
        self.inner = inner

    def apply(self, u: PCFn):
        n = self.dim - 1
        clock = float(u.integral()[n])
        base = PCFn(u.xs, u.vals[:, :n]) if u.njumps else PCFn.zero(n)
        inner_val = self.inner.at(clock).apply(base)
        if isinstance(inner_val, PCFn):
            inner_val = CombinedFn(inner_val)
        pc = _embed_pcfn(inner_val.pc, self.dim, 0)
        forcing = PCFn.indicator(0.0, 1.0,
                                 np.eye(self.dim)[n])
        pc = pc + forcing
        convs = [_embed_conv(c, self.dim, 0) for c in inner_val.convs]
        return CombinedFn(pc, convs)


def _embed_pcfn(u: PCFn, dim, offset) -> PCFn:
    vals = np.zeros((u.njumps + 1, dim))
    vals[:, offset:offset + u.dim] = u.vals
    return PCFn(u.xs, vals, normalize=False)


def _embed_conv(c: ExpConvolution, dim, offset) -> ExpConvolution:
    out = object.__new__(ExpConvolution)
    out.kernel = c.kernel
    out.xs = c.xs
    dj = np.zeros((len(c.xs), dim))
    dj[:, offset:offset + c.dim] = c.djumps
    out.djumps = dj
    out.dim = dim
    return out


# ----------------------------------------------------------------------
# the operators built from a source
# ----------------------------------------------------------------------

def apply_g(src: SourceOp, u: PCFn, N: int) -> PCFn:
    """Pi_N(G(u)): the piecewise-constant source value actually used by
    the scheme; exact closed-form convolution before projection."""
    src.check_domain(u)
    val = src.apply(u)
    if isinstance(val, PCFn):
        return project(val, N)
    return val.project(N)


def euler_step(src: SourceOp, u: PCFn, s: float, N: int) -> PCFn:
    """P_s u = u + s Pi_N(G(u)); L1-Lipschitz with constant 1 + s L1."""
    if s < 0:
        raise ValueError("step s must be nonnegative")
    if s == 0.0:
        return u
    return u + s * apply_g(src, u, N)


def horizon(src: SourceOp, delta: float) -> float:
    """Admissible ODE horizon T~ = min{(d0-d)/(d0 L2 + L3), 1/(L1+1)}."""
    d0 = src.delta0
    if np.isinf(d0):
        grow = 1.0 / src.L2 if src.L2 > 0 else np.inf
    else:
        denom = d0 * src.L2 + src.L3
        grow = np.inf if denom == 0 else (d0 - delta) / denom
    return float(min(grow, 1.0 / (src.L1 + 1.0)))


def ode_flow(src: SourceOp, u: PCFn, t: float, substeps: int = 64,
             N: int = 32, delta: float | None = None) -> PCFn:
    """Sigma_t u: flow of du/dt = G(u), by RK4 over Pi_N o G substeps.

    Refuses horizons beyond T~ (reported in the error).  Contraction
    e^{L1 t} and the TV growth bound delta + (delta0 L2 + L3) t are
    measured properties, not enforced.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    delta = u.tv() if delta is None else float(delta)
    T = horizon(src, delta)
    if t > T + 1e-12:
        raise SourceDomainError(
            "t=%.4g beyond the admissible horizon T~=%.4g "
            "(delta=%.4g, delta0=%.4g)" % (t, T, delta, src.delta0))
    if t == 0.0 or isinstance(src, ZeroSource):
        return u
    h = t / substeps
    rhs = lambda w: apply_g(src, w, N)
    w = u
    for _ in range(substeps):
        k1 = rhs(w)
        k2 = rhs(w + (0.5 * h) * k1)
        k3 = rhs(w + (0.5 * h) * k2)
        k4 = rhs(w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return w


def probe_constants(src: SourceOp, rng, omega_radius, njumps=5, probes=6,
                    span=1.5, slack=1e-8):
    """Randomized check that the declared (G) constants hold; returns the
    measured (lipschitz quotient, tv quotient) maxima."""
    lip_q = tv_q = 0.0
    amp = 0.45 * omega_radius
    for _ in range(probes):
        u = _random_pcfn(rng, src.dim, njumps, span, amp)
        w = _random_pcfn(rng, src.dim, njumps, span, amp)
        gu, gw = src.apply(u), src.apply(w)
        gu = gu if isinstance(gu, CombinedFn) else CombinedFn(gu)
        gw = gw if isinstance(gw, CombinedFn) else CombinedFn(gw)
        dist = gu.l1_dist(gw)
        ref = u.l1_dist(w)
        if ref > 1e-12:
            lip_q = max(lip_q, dist / ref)
        tvg = gu.tv()
        denom = src.L2 * u.tv() + src.L3
        if denom > 1e-12:
            tv_q = max(tv_q, tvg / denom)
    if lip_q > src.L1 * (1 + slack) + slack:
        raise ValueError("measured Lipschitz quotient %.6g exceeds declared "
                         "L1=%.6g" % (lip_q, src.L1))
    if tv_q > 1 + 1e-6:
        raise ValueError("measured TV growth exceeds declared L2,L3 "
                         "(quotient %.6g)" % tv_q)
    return lip_q, tv_q


def _random_pcfn(rng, dim, njumps, span, amp):
    xs = np.sort(rng.uniform(-span, span, njumps))
    inner = rng.uniform(-amp, amp, (max(njumps - 1, 1), dim))
    return PCFn.from_steps(xs, inner)
