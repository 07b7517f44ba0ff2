"""Local integral characterization, entropy residuals, rescaling identity."""

import numpy as np
import pytest
from scipy.integrate import quad

from nlbalance.pcfn import PCFn, CombinedFn
from nlbalance.source import ZeroSource, ConvolutionSource
from nlbalance.system import LD, SystemModel
from nlbalance.models import burgers_system, scalar_rosenau
from nlbalance.splitting import SplitSchedule, run
from nlbalance.verify import (
    HatFunction, LocalWindow, check_characterization,
    entropy_residual, euler_entropy_pair, kruzkov_pair, rescaling_check,
    u_flat, u_sharp,
)


def bump(amp=0.2, steps=4, lo=-1.0, hi=1.0):
    xs = np.linspace(lo, hi, 2 * steps)
    up = amp * np.arange(1, steps + 1) / steps
    return PCFn.from_steps(xs, np.concatenate([up, up[::-1][1:]])[:, None])


@pytest.fixture(scope="module")
def burgers():
    return burgers_system(omega_radius=1.5)


# -- u_sharp ---------------------------------------------------------------

def test_sharp_constant_fan(burgers):
    u = bump()
    fan = u_sharp(burgers, u, 0.123)  # interior of a constant piece
    xs = np.linspace(0.1, 0.15, 5)
    vals = fan(0.01, xs)
    assert np.allclose(vals, u(np.array([0.123]))[0], atol=1e-13)


def test_sharp_burgers_shock(burgers):
    u = PCFn([-5.0, 0.0], [[0.0], [1.0], [0.0]])  # 1 -> 0 at xi = 0
    fan = u_sharp(burgers, u, 0.0)
    theta = 0.3
    x = theta * 0.5
    assert fan(theta, np.array([x - 1e-6]))[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert fan(theta, np.array([x + 1e-6]))[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_sharp_values_from_riemann_solution(burgers):
    u = PCFn([0.0, 5.0], [[0.0], [0.6], [0.0]])  # rarefaction 0 -> 0.6
    fan = u_sharp(burgers, u, 0.0)
    theta = 0.5
    xs = np.linspace(-0.2, 0.5, 40)
    vals = fan(theta, xs)[:, 0]
    # values only from [0, 0.6], and equal to x/theta inside the fan
    assert vals.min() >= -1e-12 and vals.max() <= 0.6 + 1e-12
    inside = (xs > 0) & (xs < 0.6 * theta)
    assert np.allclose(vals[inside], xs[inside] / theta, atol=1e-10)


# -- u_flat ------------------------------------------------------------------

def test_flat_constant_no_source(burgers):
    u = bump()
    flow = u_flat(burgers, None, u, 0.123)
    xs = np.array([0.12, 0.125])
    assert np.allclose(flow(0.01, xs), u(np.array([0.123]))[0], atol=1e-12)


def test_flat_scalar_pure_transport(burgers):
    u = bump()
    xi = 0.123
    lam = float(u(np.array([xi]))[0, 0])  # frozen speed = v(xi)
    flow = u_flat(burgers, None, u, xi)
    theta = 0.2
    xs = np.linspace(-1.5, 1.5, 31)
    assert np.allclose(flow(theta, xs), u(xs - lam * theta), atol=1e-13)


def decoupled_model():
    A = np.diag([-0.7, 0.9])

    def flux(U):
        return U @ A.T

    def jac(U):
        return np.tile(A, (len(U), 1, 1))

    return SystemModel(n=2, flux=flux, jac=jac, field_kinds=(LD, LD),
                       omega_radius=0.5, name="decoupled")


def test_flat_decoupled_characteristic_formula():
    model = decoupled_model()
    profile = PCFn.indicator(-0.3, 0.4, np.array([0.05, -0.02]))

    class FrozenSource(ConvolutionSource):
        def apply(self, u):
            return CombinedFn(profile)

    src = FrozenSource(dim=2, g=lambda v: 0.0 * v, lip_g=0.0, terms=[],
                       name="const")
    u = PCFn.indicator(-0.5, 0.5, np.array([0.04, 0.03]))
    flow = u_flat(model, src, u, 0.0)
    theta = 0.3
    lam = np.array([-0.7, 0.9])
    for x in (-0.45, 0.0, 0.37):
        # hand-integrated: w_i = v_i(x - lam_i t) + int_0^t P_i(x - lam_i s) ds
        expect = np.empty(2)
        for i in range(2):
            trans = u(np.array([x - lam[i] * theta]))[0, i]
            srcint = quad(lambda s: profile(np.array([x - lam[i] * s]))[0, i],
                          0.0, theta, limit=200)[0]
            expect[i] = trans + srcint
        got = flow(theta, np.array([x]))[0]
        assert np.allclose(got, expect, atol=1e-9)


# -- characterization ---------------------------------------------------------

def test_characterization_constant_data(burgers):
    u = PCFn.zero(1)
    win = LocalWindow(xi=0.0, a=-1.0, b=1.0, thetas=(0.1, 0.05))
    rows = check_characterization(burgers, ZeroSource(1), u, win,
                                  SplitSchedule(s=0.1, t_final=0.1, eps=1e-3))
    for r in rows:
        assert r["quotient_sharp"] < 1e-12
        assert r["quotient_flat"] < 1e-12


def test_characterization_single_shock(burgers):
    u = PCFn([-3.0, 0.0], [[0.0], [0.4], [0.0]])  # shock 0.4 -> 0 at 0
    win = LocalWindow(xi=0.0, a=-0.8, b=0.8, thetas=(0.2, 0.1, 0.05))
    rows = check_characterization(burgers, ZeroSource(1), u, win,
                                  SplitSchedule(s=0.2, t_final=0.2, eps=1e-4))
    qa = [r["quotient_sharp"] for r in rows]
    assert qa[-1] <= 0.05 * max(qa[0], 1e-6) + 1e-9  # vanishes at the shock


def test_characterization_nonlocal_flat_bound():
    model, src = scalar_rosenau()
    u = bump(amp=0.15)
    win = LocalWindow(xi=0.05, a=-1.4, b=1.4, thetas=(0.2, 0.1, 0.05))
    rows = check_characterization(model, src, u, win,
                                  SplitSchedule(s=0.1, t_final=0.2,
                                                eps=1e-4, N=8))
    consts = [r["flat_constant"] for r in rows]
    assert all(np.isfinite(c) for c in consts)
    assert max(consts) < 10 * min(consts) + 1e-6


# -- entropy -----------------------------------------------------------------

def make_states(model, src, u, t, s, sched):
    _, trace = run(model, src, u, sched.replace(s=s, t_final=t),
                   record_states=True)
    return trace.states


def test_entropy_zero_in_smooth_region(burgers):
    u = bump(amp=0.2)
    sched = SplitSchedule(s=0.02, t_final=0.2, eps=1e-4)
    states = make_states(burgers, ZeroSource(1), u, 0.2, 0.02, sched)
    pairs = [kruzkov_pair(burgers.scalar_flux, 0.1)]
    hats_t = [HatFunction(0.02, 0.1, 0.18)]
    hats_x = [HatFunction(-2.5, -2.0, -1.5)]  # region where u = 0: smooth
    rows = entropy_residual(burgers, ZeroSource(1), states, pairs,
                            hats_t, hats_x, sched)
    assert all(abs(r["residual"]) < 1e-10 for r in rows)


def test_entropy_shock_produces_negative_residual(burgers):
    u = PCFn([-3.0, 0.0], [[0.0], [0.5], [0.0]])  # admissible shock at 0
    sched = SplitSchedule(s=0.05, t_final=0.4, eps=1e-4)
    states = make_states(burgers, ZeroSource(1), u, 0.4, 0.05, sched)
    pairs = [kruzkov_pair(burgers.scalar_flux, 0.25)]
    hats_t = [HatFunction(0.05, 0.2, 0.35)]
    hats_x = [HatFunction(-0.2, 0.05, 0.3)]  # straddles the shock path
    rows = entropy_residual(burgers, ZeroSource(1), states, pairs,
                            hats_t, hats_x, sched)
    assert rows[0]["residual"] < -1e-4  # strict entropy production
    assert rows[0]["positive_part"] == 0.0


def test_entropy_rejects_nonconvex(burgers):
    bad = type(kruzkov_pair(burgers.scalar_flux, 0.0))(
        eta=lambda v: -v[:, 0] ** 2, q=lambda v: v[:, 0],
        deta=lambda v: -2 * v, name="concave")
    u = bump()
    sched = SplitSchedule(s=0.1, t_final=0.1, eps=1e-3)
    states = make_states(burgers, ZeroSource(1), u, 0.1, 0.1, sched)
    with pytest.raises(ValueError):
        entropy_residual(burgers, ZeroSource(1), states, [bad],
                         [HatFunction(0.0, 0.05, 0.1)],
                         [HatFunction(-1, 0, 1)], sched)


def test_euler_entropy_pair_convex():
    from nlbalance.models import EulerModel, GasState
    model = EulerModel(GasState(e=1.5))
    pair = euler_entropy_pair(model)
    rng = np.random.default_rng(3)
    a = rng.uniform(-0.02, 0.02, (20, 3))
    b = rng.uniform(-0.02, 0.02, (20, 3))
    pair.check_convex((a, b))


# -- rescaling ---------------------------------------------------------------

def test_rescaling_identity_unit_lambda(burgers):
    u = bump()
    rows, worst = rescaling_check(burgers, u, 0.5, [1.0],
                                  SplitSchedule(s=0.5, t_final=0.5, eps=1e-3))
    assert worst == 0.0


def test_rescaling_scalar_shock_tight(burgers):
    u = PCFn([-2.0, 0.0], [[0.0], [0.4], [0.0]])
    rows, worst = rescaling_check(burgers, u, 0.6, [2.0, 3.7],
                                  SplitSchedule(s=0.6, t_final=0.6, eps=1e-3))
    assert worst < 1e-10
