"""Concrete model instantiations: scalar nonlocal Burgers, radiating-gas
Euler, Rosenau-regularized Euler, local inhomogeneous sources and the
non-autonomous clock augmentation.

All models work in deviation variables: the stored state is u - u_base,
so compactly supported PCFn data are admissible and sources vanish on
the base state through exact kernel-mass identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pcfn import ExpKernel
from .system import GNL, LD, SystemModel, burgers_flux
from .source import (
    ZeroSource, ConvolutionSource, LocalSource,
    TimeDependentSource, AugmentedSource, probe_constants,
)


# ----------------------------------------------------------------------
# scalar nonlocal Burgers
# ----------------------------------------------------------------------

def burgers_system(omega_radius=0.6, lambda_hat=None, name="burgers"):
    """Plain Burgers flux u^2/2 as a 1x1 system (no source)."""
    sf = burgers_flux()
    return SystemModel(
        n=1,
        flux=lambda U: 0.5 * U * U,
        jac=lambda U: U[:, :, None].copy(),
        field_kinds=(GNL,),
        omega_radius=omega_radius,
        lambda_hat=lambda_hat,
        scalar_flux=sf,
        name=name,
        eig_fn=lambda U: (U.copy(), np.ones((len(U), 1, 1)), None),
        grad_lambda_fn=lambda U, j: np.ones_like(U),
    )


def scalar_rosenau(omega_radius=0.6, validate=True, seed=0):
    """Burgers with the Rosenau source G(u) = -u + Q*u, Q = exp(-|x|)/2.

    Constant states are equilibria (the kernel has unit mass) and the
    declared constants are L1 = L2 = 2, L3 = 0.
    """
    model = burgers_system(omega_radius=omega_radius, name="scalar_rosenau")
    K = ExpKernel([(0.5, 1.0)])
    src = ConvolutionSource(
        dim=1,
        g=lambda v: -v,
        lip_g=1.0,
        terms=[(K, lambda v: v.copy(), 1.0)],
        name="rosenau-scalar",
    )
    if validate:
        probe_constants(src, np.random.default_rng(seed), omega_radius)
    return model, src


# ----------------------------------------------------------------------
# gamma-law Euler in conserved variables
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GasState:
    gamma: float = 5.0 / 3.0
    c_v: float = 1.0
    rho: float = 1.0
    v: float = 0.0
    e: float = 1.0

    @property
    def pressure(self):
        return (self.gamma - 1.0) * self.rho * self.e

    @property
    def conserved(self):
        return np.array([self.rho, self.rho * self.v,
                         self.rho * self.e + 0.5 * self.rho * self.v ** 2])

    @property
    def theta(self):
        return self.e / self.c_v


class EulerModel(SystemModel):
    """gamma-law Euler in conserved deviation variables, with analytic
    eigenstructure and eigenvalue gradients."""

    def __init__(self, gas: GasState, omega_radius=0.05, lambda_hat=None,
                 name="euler", **kw):
        self.gas = gas
        self.base = gas.conserved
        gamma = gas.gamma
        lo = self.base - omega_radius
        if lo[0] <= 0:
            raise ValueError("base state too close to vacuum: rho box hits 0")
        # pressure positivity over the box corners
        corners = self.base + omega_radius * np.array(
            np.meshgrid(*([[-1, 1]] * 3), indexing="ij")).reshape(3, -1).T
        p = (gamma - 1) * (corners[:, 2] - corners[:, 1] ** 2 / (2 * corners[:, 0]))
        if np.any(p <= 0):
            raise ValueError("base state too close to vacuum: pressure box hits 0")
        super().__init__(
            n=3,
            flux=self._flux_dev,
            jac=self._jac_dev,
            field_kinds=(GNL, LD, GNL),
            omega_radius=omega_radius,
            lambda_hat=lambda_hat,
            eig_fn=self._eig_dev,
            grad_lambda_fn=self._grad_lambda_dev,
            name=name,
            **kw,
        )

    # primitive quantities from deviation states
    def _prim(self, W):
        U = W + self.base
        rho, m, E = U[:, 0], U[:, 1], U[:, 2]
        v = m / rho
        e = E / rho - 0.5 * v * v
        p = (self.gas.gamma - 1.0) * rho * e
        return rho, v, e, p, E

    def physical(self, W):
        """(rho, v, e, p) at deviation states W: (B, 4)."""
        rho, v, e, p, _ = self._prim(np.atleast_2d(W))
        return np.stack([rho, v, e, p], axis=1)

    def theta(self, W):
        rho, v, e, p, _ = self._prim(np.atleast_2d(W))
        return e / self.gas.c_v

    def _flux_phys(self, U):
        rho, m, E = U[:, 0], U[:, 1], U[:, 2]
        v = m / rho
        p = (self.gas.gamma - 1.0) * (E - 0.5 * m * v)
        return np.stack([m, m * v + p, v * (E + p)], axis=1)

    def _flux_dev(self, W):
        W = np.atleast_2d(W)
        return self._flux_phys(W + self.base) - self._flux_phys(self.base[None, :])

    def _jac_dev(self, W):
        W = np.atleast_2d(W)
        gamma = self.gas.gamma
        rho, v, e, p, E = self._prim(W)
        H = (E + p) / rho
        B = len(W)
        A = np.empty((B, 3, 3))
        A[:, 0, 0] = 0.0
        A[:, 0, 1] = 1.0
        A[:, 0, 2] = 0.0
        A[:, 1, 0] = 0.5 * (gamma - 3.0) * v * v
        A[:, 1, 1] = (3.0 - gamma) * v
        A[:, 1, 2] = gamma - 1.0
        A[:, 2, 0] = v * (0.5 * (gamma - 1.0) * v * v - H)
        A[:, 2, 1] = H - (gamma - 1.0) * v * v
        A[:, 2, 2] = gamma * v
        return A

    def _eig_dev(self, W):
        gamma = self.gas.gamma
        rho, v, e, p, E = self._prim(np.atleast_2d(W))
        c = np.sqrt(gamma * p / rho)
        H = (E + p) / rho
        lam = np.stack([v - c, v, v + c], axis=1)
        B = len(rho)
        R = np.empty((B, 3, 3))
        R[:, 0, 0] = 1.0;      R[:, 1, 0] = v - c;  R[:, 2, 0] = H - v * c
        R[:, 0, 1] = 1.0;      R[:, 1, 1] = v;      R[:, 2, 1] = 0.5 * v * v
        R[:, 0, 2] = 1.0;      R[:, 1, 2] = v + c;  R[:, 2, 2] = H + v * c
        return lam, R, None

    def _grad_lambda_dev(self, W, j):
        gamma = self.gas.gamma
        rho, v, e, p, E = self._prim(np.atleast_2d(W))
        c = np.sqrt(gamma * p / rho)
        grad_v = np.stack([-v / rho, 1.0 / rho, np.zeros_like(rho)], axis=1)
        grad_e = np.stack([(0.5 * v * v - e) / rho, -v / rho, 1.0 / rho], axis=1)
        grad_c = (gamma * (gamma - 1.0) / (2.0 * c))[:, None] * grad_e
        if j == 0:
            return grad_v - grad_c
        if j == 1:
            return grad_v
        return grad_v + grad_c

    def theta4_deviation(self, W):
        """theta(base + W)^4 - theta(base)^4, pointwise; vanishes at 0."""
        th = self.theta(W)
        return th ** 4 - self.gas.theta ** 4

    def theta4_lipschitz(self, grid=13, pad=1.02):
        """Sampled sup of ||grad_U theta^4|| over the box (2% pad)."""
        ax = np.linspace(-self.omega_radius, self.omega_radius, grid)
        W = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        rho, v, e, p, E = self._prim(W)
        th = e / self.gas.c_v
        grad_e = np.stack([(0.5 * v * v - e) / rho, -v / rho, 1.0 / rho], axis=1)
        grads = (4.0 * th ** 3 / self.gas.c_v)[:, None] * grad_e
        return pad * float(np.linalg.norm(grads, axis=1).max())

    def velocity_lipschitz(self, grid=13, pad=1.02):
        ax = np.linspace(-self.omega_radius, self.omega_radius, grid)
        W = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        rho, v, e, p, E = self._prim(W)
        grads = np.stack([-v / rho, 1.0 / rho, np.zeros_like(rho)], axis=1)
        return pad * float(np.linalg.norm(grads, axis=1).max())

    def theta_lipschitz(self, grid=13, pad=1.02):
        ax = np.linspace(-self.omega_radius, self.omega_radius, grid)
        W = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        rho, v, e, p, E = self._prim(W)
        grad_e = np.stack([(0.5 * v * v - e) / rho, -v / rho, 1.0 / rho], axis=1)
        return pad * float(np.linalg.norm(grad_e / self.gas.c_v, axis=1).max())


# ----------------------------------------------------------------------
# radiating gas
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadiatingGasParams:
    a: float = 1.0
    b: float = 1.0
    gas: GasState = field(default_factory=GasState)
    omega_radius: float = 0.05

    def __post_init__(self):
        if self.a <= 0 or self.b < 0:
            raise ValueError("need a > 0 and b >= 0")
        if self.gas.gamma <= 1 or self.gas.c_v <= 0 or self.gas.rho <= 0 \
                or self.gas.e <= 0:
            raise ValueError("gas constants must be positive with gamma > 1")


def radiating_gas(params: RadiatingGasParams | None = None, validate=True,
                  seed=0, **kw):
    """Euler with the radiative energy source b(-theta^4 + sqrt(a) Q_a * theta^4).

    Q_a(x) = exp(-sqrt(a)|x|)/2, so ||sqrt(a) Q_a||_L1 = 1 exactly and
    constant-temperature states give zero source.
    """
    if params is None:
        params = RadiatingGasParams(**kw)
    model = EulerModel(params.gas, omega_radius=params.omega_radius,
                       name="radiating_gas")
    if params.b == 0.0:
        return model, ZeroSource(3)
    sq = np.sqrt(params.a)
    kernel = ExpKernel([(0.5 * sq, sq)])  # sqrt(a) * Q_a; unit mass
    b = params.b
    lip_t4 = b * model.theta4_lipschitz()

    def g(vals):
        out = np.zeros_like(vals)
        out[:, 2] = -b * model.theta4_deviation(vals)
        return out

    def h(vals):
        out = np.zeros_like(vals)
        out[:, 2] = b * model.theta4_deviation(vals)
        return out

    src = ConvolutionSource(dim=3, g=g, lip_g=lip_t4,
                            terms=[(kernel, h, lip_t4)],
                            name="radiating-gas")
    if validate:
        probe_constants(src, np.random.default_rng(seed),
                        0.5 * params.omega_radius, span=1.0)
    return model, src


# ----------------------------------------------------------------------
# Rosenau-regularized Euler
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RosenauParams:
    mu: float = 1.0
    lam: float = 1.0
    m: float = 1.0
    s: float = 1.0
    eps: float = 1.0
    gas: GasState = field(default_factory=GasState)
    omega_radius: float = 0.05

    def __post_init__(self):
        for nm in ("m", "s", "eps"):
            if getattr(self, nm) <= 0:
                raise ValueError("%s must be positive" % nm)
        if self.mu < 0 or self.lam < 0:
            raise ValueError("mu and lam must be nonnegative")


def rosenau(params: RosenauParams | None = None, validate=True, seed=0, **kw):
    """Euler with momentum source (1/eps^2)(-(mu/m) v + mu_* * v) and
    energy source (1/eps^2)(-(lam/s) theta + lam_* * theta)."""
    if params is None:
        params = RosenauParams(**kw)
    model = EulerModel(params.gas, omega_radius=params.omega_radius,
                       name="rosenau")
    if params.mu == 0.0 and params.lam == 0.0:
        return model, ZeroSource(3)
    e2 = params.eps ** 2
    mu_star = ExpKernel([(params.mu / (2 * params.m * params.eps), 1.0 / params.eps)])
    lam_star = ExpKernel([(params.lam / (2 * params.s * params.eps), 1.0 / params.eps)])
    assert abs(mu_star.l1_norm() - params.mu / params.m) < 1e-12
    assert abs(lam_star.l1_norm() - params.lam / params.s) < 1e-12
    mu_scaled = ExpKernel([(params.mu / (2 * params.m * params.eps ** 3),
                            1.0 / params.eps)])
    lam_scaled = ExpKernel([(params.lam / (2 * params.s * params.eps ** 3),
                             1.0 / params.eps)])
    lip_v = model.velocity_lipschitz()
    lip_t = model.theta_lipschitz()
    cm = params.mu / (params.m * e2)
    ce = params.lam / (params.s * e2)
    th_base = params.gas.theta

    def g(vals):
        out = np.zeros_like(vals)
        phys = model.physical(vals)
        out[:, 1] = -cm * phys[:, 1]
        out[:, 2] = -ce * (phys[:, 2] / params.gas.c_v - th_base)
        return out

    def h_v(vals):
        out = np.zeros_like(vals)
        out[:, 1] = model.physical(vals)[:, 1]
        return out

    def h_t(vals):
        out = np.zeros_like(vals)
        out[:, 2] = model.physical(vals)[:, 2] / params.gas.c_v - th_base
        return out

    src = ConvolutionSource(
        dim=3,
        g=g,
        lip_g=cm * lip_v + ce * lip_t,
        terms=[(mu_scaled, h_v, lip_v), (lam_scaled, h_t, lip_t)],
        name="rosenau-euler",
    )
    src.kernels = {"mu_star": mu_star, "lam_star": lam_star}
    if validate:
        probe_constants(src, np.random.default_rng(seed),
                        0.5 * params.omega_radius, span=1.0)
    return model, src


# ----------------------------------------------------------------------
# local and non-autonomous sources on scalar Burgers
# ----------------------------------------------------------------------

def local_source(g=None, x_breaks=(0.0,), lip_u=1.0, omega_radius=0.6,
                 validate=True, seed=0):
    """Burgers with a local inhomogeneous source g(x, u).

    Default g(x, u) = u * chi_{x > 0}: the (g2) measure is the single
    atom at 0 with mass sup_box |u| = omega_radius.
    """
    model = burgers_system(omega_radius=omega_radius, name="local")
    if g is None:
        def g(x, vals):
            return vals * (np.asarray(x) > 0)[:, None]
    src = LocalSource(dim=1, g=g, x_breaks=x_breaks, lip_u=lip_u,
                      omega_radius=omega_radius, name="local")
    if validate:
        probe_constants(src, np.random.default_rng(seed), omega_radius)
    return model, src


def nonautonomous(factory=None, L1=None, omega_radius=0.6, validate=True,
                  seed=0):
    """Clock augmentation of a time-dependent scalar source.

    Returns the (n+1)-dimensional model with the extra linear field at
    speed lambda_hat and the augmented source feeding int w as the clock.
    Default inner source: G(t, u) = -t * u (decay ramping up in time).
    """
    inner_model = burgers_system(omega_radius=omega_radius)
    if factory is None:
        horizon = 1.0

        def factory(t):
            c = min(max(t, 0.0), horizon)
            return ConvolutionSource(
                dim=1, g=lambda v, c=c: -c * v, lip_g=c, terms=[],
                name="decay(t=%.3g)" % t)
        L1 = max(L1 or 0.0, 1.0 + omega_radius)
    tsrc = TimeDependentSource(dim=1, factory=factory,
                               L1=L1 if L1 is not None else 1.0,
                               L2=L1 if L1 is not None else 1.0,
                               L3=0.0, name="nonautonomous")
    lam_hat = inner_model.lambda_hat

    def flux(U):
        out = np.empty_like(U)
        out[:, 0] = 0.5 * U[:, 0] ** 2
        out[:, 1] = lam_hat * U[:, 1]
        return out

    def jac(U):
        B = len(U)
        A = np.zeros((B, 2, 2))
        A[:, 0, 0] = U[:, 0]
        A[:, 1, 1] = lam_hat
        return A

    def eig_fn(U):
        B = len(U)
        lam = np.empty((B, 2))
        lam[:, 0] = U[:, 0]
        lam[:, 1] = lam_hat
        R = np.tile(np.eye(2), (B, 1, 1))
        return lam, R, None

    def grad_lambda_fn(U, j):
        g = np.zeros_like(U)
        if j == 0:
            g[:, 0] = 1.0
        return g

    model = SystemModel(
        n=2, flux=flux, jac=jac, field_kinds=(GNL, LD),
        omega_radius=omega_radius, lambda_hat=1.05 * lam_hat,
        eig_fn=eig_fn, grad_lambda_fn=grad_lambda_fn,
        name="nonautonomous",
    )
    src = AugmentedSource(tsrc)
    return model, src


# ----------------------------------------------------------------------
# registry
# ----------------------------------------------------------------------

MODELS = {
    "scalar_rosenau": scalar_rosenau,
    "radiating_gas": radiating_gas,
    "rosenau": rosenau,
    "local": local_source,
    "nonautonomous": nonautonomous,
}


def build(model_id: str, **params):
    """Instantiate a registered model id; returns (SystemModel, SourceOp)."""
    if model_id not in MODELS:
        hint = ", ".join(sorted(MODELS))
        raise KeyError("unknown model %r; known ids: %s" % (model_id, hint))
    return MODELS[model_id](**params)


def describe(model_id: str) -> str:
    model, src = build(model_id, validate=False)
    lines = ["%s: n=%d, fields=%s, lambda_hat=%.6g, omega=%.3g" % (
        model_id, model.n, "/".join(model.field_kinds),
        model.lambda_hat, model.omega_radius)]
    lines.append("  source %s" % src.describe())
    return "\n".join(lines)
