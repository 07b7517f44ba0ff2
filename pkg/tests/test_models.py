"""Model instantiations: kernel-mass identities, declared constants,
registry behavior, clock augmentation."""

import numpy as np
import pytest
from scipy.integrate import quad

from nlbalance.pcfn import PCFn
from nlbalance.source import ZeroSource, apply_g
from nlbalance import models
from nlbalance.models import (
    GasState, RadiatingGasParams, build, describe,
    local_source, nonautonomous, radiating_gas, rosenau, scalar_rosenau,
)
from nlbalance.splitting import SplitSchedule, run


# -- radiating gas -------------------------------------------------------------

def test_radiating_kernel_unit_mass_and_constant_theta():
    model, src = radiating_gas(validate=False)
    K = src.terms[0][0]
    assert K.l1_norm() == pytest.approx(1.0, abs=1e-14)
    # constant-temperature deviation: d rho with energy tracking rho*e
    drho = 0.02
    w = np.array([drho, 0.0, model.gas.e * drho])
    u = PCFn([-1.0, 1.0], np.stack([np.zeros(3), w, np.zeros(3)]))
    g = src.apply(u)
    xs = np.linspace(-2, 2, 9)
    assert np.abs(g(xs)).max() < 1e-14


def test_radiating_source_integral_zero():
    # kernel mass 1: the energy source integrates to zero over R
    model, src = radiating_gas(validate=False)
    w = np.array([0.0, 0.0, 0.02])
    u = PCFn([-0.5, 0.5], np.stack([np.zeros(3), w, np.zeros(3)]))
    gu = apply_g(src, u, N=16)
    assert abs(gu.integral()[2]) < 1e-6  # truncation tails only


def test_radiating_b_zero_gives_zero_source():
    model, src = radiating_gas(b=0.0, validate=False)
    assert isinstance(src, ZeroSource)


def test_radiating_params_validate():
    with pytest.raises(ValueError):
        RadiatingGasParams(a=-1.0)
    with pytest.raises(ValueError):
        RadiatingGasParams(gas=GasState(rho=-1.0))


def test_euler_vacuum_guard():
    with pytest.raises(ValueError):
        radiating_gas(gas=GasState(rho=0.04), omega_radius=0.05,
                      validate=False)


# -- rosenau --------------------------------------------------------------------

def test_rosenau_kernel_masses():
    model, src = rosenau(validate=False, mu=2.0, m=4.0, lam=3.0, s=2.0,
                         eps=0.7)
    assert src.kernels["mu_star"].l1_norm() == pytest.approx(2.0 / 4.0)
    assert src.kernels["lam_star"].l1_norm() == pytest.approx(3.0 / 2.0)


def test_rosenau_base_state_equilibrium():
    model, src = rosenau(validate=False)
    # density-only deviation keeps v = 0 and theta = base theta
    drho = 0.02
    w = np.array([drho, 0.0, model.gas.e * drho])
    # theta(base+w) = e/c_v with e = E/rho - v^2/2 = (e0(1+d))/(1+d) = e0
    u = PCFn([-1.0, 1.0], np.stack([np.zeros(3), w, np.zeros(3)]))
    g = src.apply(u)
    assert np.abs(g(np.linspace(-2, 2, 9))).max() < 1e-13


def test_rosenau_eps_scaling_of_prefactor():
    _, s1 = rosenau(validate=False, eps=1.0)
    _, s2 = rosenau(validate=False, eps=0.5)
    # local part coefficient scales as 1/eps^2 at fixed profile
    v = np.zeros((1, 3))
    v[0, 1] = 0.01
    g1 = s1.g(v)[0, 1]
    g2 = s2.g(v)[0, 1]
    assert g2 == pytest.approx(4.0 * g1, rel=1e-12)


def test_rosenau_zero_viscosities_pure_euler():
    model, src = rosenau(mu=0.0, lam=0.0, validate=False)
    assert isinstance(src, ZeroSource)


# -- scalar rosenau ---------------------------------------------------------------

def test_scalar_constants_and_equilibrium():
    model, src = scalar_rosenau()
    assert (src.L1, src.L2, src.L3) == (2.0, 2.0, 0.0)
    assert src.apply(PCFn.zero(1)).l1_norm() < 1e-14


def test_scalar_dissipativity():
    model, src = scalar_rosenau()
    rng = np.random.default_rng(40)
    for _ in range(5):
        xs = np.sort(rng.uniform(-1.5, 1.5, 5))
        u = PCFn.from_steps(xs, rng.uniform(-0.3, 0.3, (4, 1)))
        g = src.apply(u)
        # exact: int G(u) u dx = sum_j u_j int_{cell_j} G
        edges = np.concatenate([u.xs[:1], u.xs])
        total = 0.0
        ints = g.integral_to(u.xs)[:, 0]
        for j in range(u.njumps - 1):
            total += u.vals[j + 1, 0] * (ints[j + 1] - ints[j])
        assert total <= 1e-12


def test_scalar_equals_kernel_second_derivative():
    # -u + Q*u = Q * u'' for smooth u; verified by quadrature on a
    # piecewise-constant sampling of a gaussian
    model, src = scalar_rosenau()
    xs = np.linspace(-6, 6, 1201)
    mids = 0.5 * (xs[:-1] + xs[1:])
    u = PCFn.from_steps(xs, 0.3 * np.exp(-mids ** 2)[:, None])
    g = src.apply(u)

    def upp(y):
        return 0.3 * np.exp(-y ** 2) * (4 * y ** 2 - 2)

    # evaluate at cell midpoints, where the sampling is pointwise exact
    for x in (-0.695, 0.005, 1.305):
        oracle = quad(lambda y: 0.5 * np.exp(-abs(x - y)) * upp(y),
                      -8, 8, limit=400)[0]
        assert g(np.array([x]))[0, 0] == pytest.approx(oracle, abs=2e-4)


# -- local / nonautonomous ---------------------------------------------------------

def test_local_default_atom():
    model, src = local_source()
    assert src.L3 == pytest.approx(model.omega_radius)


def test_nonautonomous_clock_integral():
    model, src = nonautonomous()
    u0 = PCFn.zero(2)
    t = 0.4
    out, _ = run(model, src, u0, SplitSchedule(s=0.05, t_final=t, N=4,
                                               eps=1e-3))
    # w-component integral equals elapsed time exactly at macro boundaries
    assert out.integral()[1] == pytest.approx(t, abs=1e-12)


def test_nonautonomous_clock_feeds_inner_source():
    model, src = nonautonomous()
    # u-component decays under G(t,u) = -t u: at small t barely changes
    z = np.zeros(2)
    w = np.array([0.2, 0.0])
    u0 = PCFn([-0.5, 0.5], np.stack([z, w, z]))
    t = 0.4
    out, _ = run(model, src, u0, SplitSchedule(s=0.05, t_final=t, N=4,
                                               eps=1e-3))
    mass_u = out.integral()[0]
    # d/dt int u = -clock(t) int u with clock ~ t: int u ~ e^{-t^2/2} * 0.2
    assert mass_u == pytest.approx(0.2 * np.exp(-t ** 2 / 2), rel=0.05)


# -- registry ------------------------------------------------------------------

def test_registry_contains_five_ids():
    assert sorted(models.MODELS) == [
        "local", "nonautonomous", "radiating_gas", "rosenau", "scalar_rosenau"]


def test_build_and_describe():
    text = describe("scalar_rosenau")
    assert "L1=2" in text and "L2=2" in text and "L3=0" in text


def test_build_unknown_id_suggests():
    with pytest.raises(KeyError) as err:
        build("scalar_rosenaux")
    assert "scalar_rosenau" in str(err.value)


def test_constructors_probe_hypothesis_g():
    # validate=True runs randomized (G) probes; they must pass quietly
    scalar_rosenau(validate=True)
    radiating_gas(validate=True)


def test_base_state_is_equilibrium_for_every_model():
    # sources vanish on the base state (kernel-mass identities), so the
    # zero deviation is a fixed point of F^s_t; the nonautonomous clock
    # component is forced by design, but the physical components stay 0
    for mid in sorted(models.MODELS):
        model, src = build(mid, validate=False)
        out, _ = run(model, src, PCFn.zero(model.n),
                     SplitSchedule(s=0.05, t_final=0.1, N=4, eps=1e-3))
        phys = out.vals[:, :1] if mid == "nonautonomous" else out.vals
        assert np.abs(phys).max() < 1e-12, mid
