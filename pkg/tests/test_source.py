"""Source operators: hypothesis-(G) constants, Euler step, ODE flow."""

import numpy as np
import pytest

from nlbalance.pcfn import PCFn, ExpKernel
from nlbalance.source import (
    ConvolutionSource, LocalSource, SourceDomainError, ZeroSource,
    apply_g, euler_step, horizon, ode_flow, probe_constants,
)


def identity_source(lip=1.0):
    return ConvolutionSource(dim=1, g=lambda v: lip * v, lip_g=lip, terms=[],
                             name="identity")


def rosenau_scalar_source():
    K = ExpKernel([(0.5, 1.0)])
    return ConvolutionSource(dim=1, g=lambda v: -v, lip_g=1.0,
                             terms=[(K, lambda v: v.copy(), 1.0)],
                             name="scalar-rosenau")


def random_pcfn(rng, dim=1, njumps=5, span=1.5, amp=0.3):
    xs = np.sort(rng.uniform(-span, span, njumps))
    return PCFn.from_steps(xs, rng.uniform(-amp, amp, (njumps - 1, dim)))


# -- apply_g -----------------------------------------------------------------

def test_apply_g_zero_source():
    out = apply_g(ZeroSource(2), PCFn.zero(2), N=4)
    assert out.l1_norm() == 0.0


def test_scalar_rosenau_value_at_zero():
    src = rosenau_scalar_source()
    u = PCFn.indicator(0.0, 1.0)
    g = src.apply(u)
    # -u(0) + (Q*u)(0) = 0 + (1 - e^{-1})/2
    assert g(np.array([0.0]))[0, 0] == pytest.approx(0.5 * (1 - np.exp(-1)),
                                                     abs=1e-12)


def test_projected_tv_bound_corollary():
    rng = np.random.default_rng(30)
    src = rosenau_scalar_source()
    for _ in range(10):
        u = random_pcfn(rng)
        tvp = apply_g(src, u, N=6).tv()
        assert tvp <= 2 * (src.L2 * u.tv() + src.L3) + 1e-10


def test_conv_part_tv_bound_proposition():
    rng = np.random.default_rng(31)
    src = rosenau_scalar_source()
    for _ in range(6):
        u = random_pcfn(rng)
        conv = src.conv_part(u)
        assert conv.tv() <= src.conv_tv_coefficient() * u.tv() + 1e-10


# -- euler_step ---------------------------------------------------------------

def test_euler_step_zero_time():
    src = identity_source()
    u = PCFn.indicator(0.0, 0.5)
    assert euler_step(src, u, 0.0, 4) is u


def test_euler_step_identity_source_exact():
    # grid-aligned indicator: projection is exact, so P_s u = (1+s) u
    src = identity_source()
    u = PCFn.indicator(0.0, 0.5)
    out = euler_step(src, u, 0.25, 2)
    assert out.l1_dist(1.25 * u) < 1e-14


def test_euler_step_lipschitz_constant():
    rng = np.random.default_rng(32)
    src = rosenau_scalar_source()
    s = 0.2
    for _ in range(6):
        u, w = random_pcfn(rng), random_pcfn(rng)
        d = euler_step(src, u, s, 8).l1_dist(euler_step(src, w, s, 8))
        assert d <= (1 + s * src.L1) * u.l1_dist(w) * (1 + 1e-9) + 1e-12


def test_euler_step_composition_defect():
    src = rosenau_scalar_source()
    rng = np.random.default_rng(33)
    u = random_pcfn(rng)
    for s, t in [(0.1, 0.2), (0.05, 0.1), (0.025, 0.05)]:
        a = euler_step(src, euler_step(src, u, t, 8), s, 8)
        b = euler_step(src, u, s + t, 8)
        defect = a.l1_dist(b)
        assert defect <= 10.0 * s * t * (1 + u.l1_norm())


def test_repeated_euler_matches_power_step_bound():
    src = rosenau_scalar_source()
    rng = np.random.default_rng(34)
    u = random_pcfn(rng)
    s, k = 0.02, 8
    w = u
    for _ in range(k):
        w = euler_step(src, w, s, 8)
    one = euler_step(src, u, k * s, 8)
    assert w.l1_dist(one) <= 10.0 * (1 + u.l1_norm()) * (k * s) ** 2


# -- ode_flow -----------------------------------------------------------------

def test_ode_flow_zero_source():
    u = PCFn.indicator(0.0, 1.0)
    assert ode_flow(ZeroSource(1), u, 0.3) is u


def test_ode_flow_exponential_decay():
    src = ConvolutionSource(dim=1, g=lambda v: -v, lip_g=1.0, terms=[],
                            name="decay")
    u = PCFn.indicator(0.0, 0.5)  # aligned with any even grid
    t = 0.4
    out = ode_flow(src, u, t, substeps=64, N=2)
    exact = float(np.exp(-t)) * u
    assert out.l1_dist(exact) < 1e-8


def test_ode_flow_gronwall_contraction():
    rng = np.random.default_rng(35)
    src = rosenau_scalar_source()
    t = 0.3
    for _ in range(4):
        u, w = random_pcfn(rng), random_pcfn(rng)
        d = ode_flow(src, u, t, substeps=32, N=8).l1_dist(
            ode_flow(src, w, t, substeps=32, N=8))
        assert d <= np.exp(src.L1 * t) * u.l1_dist(w) * (1 + 1e-6)


def test_ode_flow_horizon_refusal():
    src = ConvolutionSource(dim=1, g=lambda v: 3.0 * v, lip_g=3.0, terms=[],
                            name="fast")
    u = PCFn.indicator(0.0, 1.0)
    T = horizon(src, u.tv())
    with pytest.raises(SourceDomainError) as err:
        ode_flow(src, u, T + 0.1)
    assert "T~" in str(err.value)


def test_ode_flow_tv_growth_bound():
    src = rosenau_scalar_source()
    src = ConvolutionSource(dim=1, g=src.g, lip_g=1.0,
                            terms=src.terms, delta0=5.0, name="bounded")
    rng = np.random.default_rng(36)
    u = random_pcfn(rng)
    t = 0.2
    out = ode_flow(src, u, t, substeps=32, N=8)
    delta = u.tv()
    assert out.tv() <= delta + (src.delta0 * src.L2 + src.L3) * t + 1e-6


# -- declared-constants probing ------------------------------------------------

def test_probe_constants_accepts_honest_declaration():
    src = rosenau_scalar_source()
    lip_q, tv_q = probe_constants(src, np.random.default_rng(37), 0.5)
    assert lip_q <= src.L1 * (1 + 1e-8)


def test_probe_constants_rejects_false_declaration():
    K = ExpKernel([(0.5, 1.0)])
    liar = ConvolutionSource(dim=1, g=lambda v: -v, lip_g=0.01,
                             terms=[(K, lambda v: v.copy(), 0.01)],
                             name="liar")
    with pytest.raises(ValueError):
        probe_constants(liar, np.random.default_rng(38), 0.5)


# -- local source ---------------------------------------------------------------

def test_local_source_step_profile():
    def g(x, vals):
        return vals * (np.asarray(x) > 0)[:, None]

    src = LocalSource(dim=1, g=g, x_breaks=[0.0], lip_u=1.0, omega_radius=0.5)
    assert src.L3 == pytest.approx(0.5)  # atom mass = sup(box) |u|
    u = PCFn([-1.0, 1.0], [[0.0], [0.3], [0.0]])
    out = src.apply(u)
    assert out(np.array([-0.5]))[0, 0] == 0.0
    assert out(np.array([0.5]))[0, 0] == pytest.approx(0.3)
    assert out.tv() <= src.L2 * u.tv() + src.L3 + 1e-12


def test_local_source_x_independent_mu_zero():
    def g(x, vals):
        return -0.5 * vals

    src = LocalSource(dim=1, g=g, x_breaks=[], lip_u=0.5, omega_radius=0.5)
    assert src.L3 == 0.0
