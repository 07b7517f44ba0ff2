"""Eigenstructure, wave curves, strength coordinates, Glimm functionals."""

import numpy as np
import pytest

from nlbalance.pcfn import PCFn
from nlbalance import system as sy
from nlbalance.system import (
    GNL, SystemModel, HyperbolicityError, RiemannFailure,
    lax_curve, rarefaction_curve, shock_curve, psi_glue, rh_glue,
    riemann_strengths, rh_strengths, glimm_functionals,
)
from nlbalance.models import burgers_system, EulerModel, GasState


@pytest.fixture(scope="module")
def euler():
    # base with p = 1 so the sound speed is sqrt(gamma) = sqrt(5/3)
    return EulerModel(GasState(e=1.5))


@pytest.fixture(scope="module")
def burgers():
    return burgers_system()


def rand_states(rng, model, count, frac=0.5):
    return rng.uniform(-frac * model.omega_radius,
                       frac * model.omega_radius, (count, model.n))


# -- eig ------------------------------------------------------------------

def test_euler_eig_sound_speed(euler):
    lam, R, L = euler.eig(np.zeros((1, 3)))
    c = np.sqrt(5.0 / 3.0)
    assert lam[0] == pytest.approx([-c, 0.0, c], abs=1e-13)


def test_burgers_eig(burgers):
    lam, R, L = burgers.eig(np.array([[0.37]]))
    assert lam[0, 0] == 0.37
    assert R[0, 0, 0] == 1.0


def test_biorthonormal_frames(euler):
    rng = np.random.default_rng(1)
    U = rand_states(rng, euler, 100)
    lam, R, L = euler.eig(U)
    prod = np.einsum("bij,bjk->bik", L, R)
    assert np.abs(prod - np.eye(3)).max() < 1e-12
    assert np.abs(np.linalg.norm(R, axis=1) - 1.0).max() < 1e-12


def test_eig_outside_domain_rejected(euler):
    assert not euler.check_domain(np.full(3, 1.0))


def test_hyperbolicity_cert_rejects_degenerate():
    # flux with a double eigenvalue everywhere
    with pytest.raises(HyperbolicityError):
        SystemModel(
            n=2,
            flux=lambda U: U.copy(),
            jac=lambda U: np.tile(np.eye(2), (len(U), 1, 1)),
            field_kinds=(GNL, GNL),
            omega_radius=0.1,
        )


def test_mistagged_field_kind_rejected():
    # linear flux: both fields are LD; tagging them GNL must fail
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(HyperbolicityError):
        SystemModel(
            n=2,
            flux=lambda U: U @ A.T,
            jac=lambda U: np.tile(A, (len(U), 1, 1)),
            field_kinds=(GNL, GNL),
            omega_radius=0.1,
        )


# -- lax curves -----------------------------------------------------------

def test_curve_at_zero_is_identity(euler):
    u = np.array([[0.01, -0.02, 0.03]])
    for j in range(3):
        assert np.abs(lax_curve(euler, j, 0.0, u) - u).max() < 1e-14


def test_burgers_curves_are_lines(burgers):
    u = np.array([[0.2]])
    assert lax_curve(burgers, 0, 0.3, u)[0, 0] == pytest.approx(0.5, abs=1e-14)
    W, speed = shock_curve(burgers, 0, np.array([-0.3]), u, return_speed=True)
    assert W[0, 0] == pytest.approx(-0.1, abs=1e-14)
    # RH speed (u- + u+)/2
    assert speed[0] == pytest.approx((0.2 - 0.1) / 2, abs=1e-14)


def test_speed_rate_normalization(euler):
    # d lam_j / d sigma == k_j along both branches, finite differences
    u = np.array([[0.01, 0.005, -0.01]])
    h = 1e-5
    for j in (0, 2):
        for branch in (rarefaction_curve, shock_curve):
            lp = euler.eig(branch(euler, j, +h, u))[0][0, j]
            lm = euler.eig(branch(euler, j, -h, u))[0][0, j]
            assert (lp - lm) / (2 * h) == pytest.approx(euler.k[j], abs=1e-6)


def test_contact_curve_constant_speed(euler):
    u = np.array([[0.0, 0.0, 0.0]])
    W = rarefaction_curve(euler, 1, 0.03, u)
    assert euler.eig(W)[0][0, 1] == pytest.approx(euler.eig(u)[0][0, 1], abs=1e-10)


def test_shock_rarefaction_second_order_contact(euler):
    u = np.zeros((1, 3))
    for j in (0, 2):
        gaps = []
        for s in (1e-2, 5e-3, 2.5e-3):
            # extend both branches to the same signed parameter
            r = rarefaction_curve(euler, j, -s, u)
            sh = shock_curve(euler, j, -s, u)
            gaps.append(np.linalg.norm(r - sh))
        slope = np.polyfit(np.log([1e-2, 5e-3, 2.5e-3]), np.log(gaps), 1)[0]
        assert slope >= 2.5  # difference O(sigma^3)


def test_shock_curve_satisfies_rankine_hugoniot(euler):
    u = np.array([[0.01, -0.01, 0.02]])
    for j in (0, 2):
        W, speed = shock_curve(euler, j, np.array([-0.03]), u, return_speed=True)
        res = euler.flux(W) - euler.flux(u) - speed[:, None] * (W - u)
        assert np.abs(res).max() < 1e-12


# -- riemann strengths ----------------------------------------------------

def test_strengths_zero_for_equal_states(euler):
    u = np.array([[0.01, 0.0, -0.01]])
    sig = riemann_strengths(euler, u, u)
    assert np.abs(sig).max() < 1e-12


def test_burgers_strength_is_difference(burgers):
    sig = riemann_strengths(burgers, np.array([[1.0]]), np.array([[0.0]]))
    assert sig[0, 0] == pytest.approx(-1.0, abs=1e-14)


def test_strength_round_trip(euler):
    rng = np.random.default_rng(2)
    ul = rand_states(rng, euler, 40, frac=0.4)
    ur = ul + rng.uniform(-0.01, 0.01, ul.shape)
    sig = riemann_strengths(euler, ul, ur)
    back = psi_glue(euler, sig, ul)
    assert np.linalg.norm(back - ur, axis=1).max() < 1e-10


def test_strengths_failure_is_surfaced(euler):
    with pytest.raises(RiemannFailure):
        riemann_strengths(euler, np.zeros((1, 3)), np.full((1, 3), 50.0),
                          max_iter=5)


# -- rh gluing ------------------------------------------------------------

def test_rh_glue_identity_and_burgers_line(burgers):
    u0 = np.array([[0.0]])
    assert np.abs(rh_glue(burgers, np.zeros((1, 1)), u0) - u0).max() < 1e-14
    out = rh_glue(burgers, np.array([[1.0]]), u0)
    assert out[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_rh_and_psi_agree_second_order(euler):
    rng = np.random.default_rng(3)
    u = rand_states(rng, euler, 1, frac=0.2)
    scales = [2e-2, 1e-2, 5e-3]
    gaps = []
    for s in scales:
        sig = s * np.array([[0.7, -0.4, 0.5]])
        gaps.append(np.linalg.norm(psi_glue(euler, sig, u) - rh_glue(euler, sig, u)))
    slope = np.polyfit(np.log(scales), np.log(gaps), 1)[0]
    assert slope >= 2.5


def test_rh_strengths_round_trip(euler):
    rng = np.random.default_rng(4)
    ul = rand_states(rng, euler, 10, frac=0.3)
    ur = ul + rng.uniform(-0.008, 0.008, ul.shape)
    sig = rh_strengths(euler, ul, ur)
    back = rh_glue(euler, sig, ul)
    assert np.linalg.norm(back - ur, axis=1).max() < 1e-10


# -- size estimate (randomized, Lemma-style) --------------------------------

def test_perturbed_strength_size_estimate(euler):
    rng = np.random.default_rng(5)
    ratios = []
    for _ in range(25):
        um = rand_states(rng, euler, 1, frac=0.2)
        vm = um + rng.uniform(-0.01, 0.01, (1, 3))
        a = rng.uniform(-1, 1, (1, 3))
        b = rng.uniform(-1, 1, (1, 3))
        s = rng.uniform(1e-4, 5e-3)
        sig_m = riemann_strengths(euler, um, vm)
        sig_p = riemann_strengths(euler, um + s * a, vm + s * b)
        lhs = np.abs(sig_p - sig_m).sum()
        rhs = (np.linalg.norm(a - b) + np.abs(sig_m).sum()) * s
        if rhs > 1e-12:
            ratios.append(lhs / rhs)
    ratios = np.array(ratios)
    # stable constant: no outlier an order of magnitude above the bulk
    assert ratios.max() < 10 * max(np.median(ratios), 0.1)


# -- glimm functionals ------------------------------------------------------

def test_glimm_single_jump(euler):
    u = PCFn.from_steps([0.0], np.empty((0, 3)))
    ur = lax_curve(euler, 0, -0.02, np.zeros((1, 3)))[0]
    u = PCFn([0.0, 1.0], np.stack([np.zeros(3), ur, np.zeros(3)]))
    V, Q, Ups = glimm_functionals(euler, u)
    assert Q >= 0.0
    # the second jump (back to zero) also decomposes into waves
    assert V > 0.0


def test_glimm_scalar_two_shocks(burgers):
    u = PCFn.from_steps([0.0, 1.0, 2.0], [[-0.2], [-0.5]])
    # jumps: -0.2, -0.3, +0.5 -> approaching pairs involve negatives
    V, Q, Ups = glimm_functionals(burgers, u, c0=1.0)
    sig = np.array([-0.2, -0.3, 0.5])
    q_oracle = 0.0
    for x in range(3):
        for y in range(x + 1, 3):
            if min(sig[x], sig[y]) < 0:
                q_oracle += abs(sig[x] * sig[y])
    assert V == pytest.approx(1.0, abs=1e-12)
    assert Q == pytest.approx(q_oracle, abs=1e-12)
    assert Ups == pytest.approx(V + q_oracle, abs=1e-12)


def test_glimm_two_negative_jumps_product(burgers):
    u = PCFn.from_steps([0.0, 1.0], [[-0.4]])
    # jumps: -0.4 then +0.4: approaching (min < 0): Q = 0.16
    V, Q, _ = glimm_functionals(burgers, u, c0=1.0)
    assert Q == pytest.approx(0.16, abs=1e-13)


def test_glimm_permuting_nonapproaching(burgers, euler):
    # positive scalar waves never approach: permuting them keeps Q = 0
    _, qa, _ = glimm_functionals(
        burgers, (np.zeros(3, dtype=int), np.array([0.1, 0.3, 0.2])), c0=1.0)
    _, qb, _ = glimm_functionals(
        burgers, (np.zeros(3, dtype=int), np.array([0.2, 0.3, 0.1])), c0=1.0)
    assert qa == qb == 0.0
    # Euler: slow family ahead of fast family is non-approaching; swapping
    # the two strengths leaves the (empty) approaching set unchanged
    for s1, s2 in [(0.01, 0.02), (0.02, 0.01)]:
        _, q, _ = glimm_functionals(
            euler, (np.array([0, 2]), np.array([s1, s2])), c0=1.0)
        assert q == 0.0


def test_interaction_potential_nonphysical_family():
    # NP front (family id = n) approaches every physical wave ahead of it
    q = sy.interaction_potential(
        families=np.array([1, 0]), strengths=np.array([0.1, 0.2]),
        kinds_gnl=[True], n=1)
    assert q == pytest.approx(0.02)


def test_membership_fence_constant(euler):
    # U_{c^2 d} subset D_{c d} subset U_d on sampled profiles
    rng = np.random.default_rng(6)
    ratios = []
    for _ in range(20):
        xs = np.sort(rng.uniform(-1, 1, 4))
        inner = rng.uniform(-0.25, 0.25, (3, 3)) * euler.omega_radius
        u = PCFn.from_steps(xs, inner)
        V, Q, Ups = glimm_functionals(euler, u)
        if u.tv() > 1e-9:
            ratios.append(Ups / u.tv())
    ratios = np.array(ratios)
    c = min(ratios.min(), 1.0 / ratios.max())
    assert 0.0 < c < 1.0 + 1e-12
    for r in ratios:  # both inclusions hold with this c on the probes
        assert c <= r <= 1.0 / c + 1e-12


def test_c0_calibration(euler):
    c0 = euler.glimm_c0()
    assert c0 >= 1.0
