"""Tests for the lattice field module: sources, Green operators, theta map."""

import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from latticeharvest.lattice import (
    CausalGeometryError,
    CoupledSystem,
    DegenerateModeError,
    FieldOperatorSpec,
    GeometryError,
    LatticeSpec,
    StabilityError,
    TestFunction,
    TripleFunction,
    born_reconstruct,
    born_theta_terms,
    box_mask,
    causal_future_mask,
    causal_pairing,
    causal_past_mask,
    coupled_advanced_apply,
    coupled_retarded_apply,
    green_apply,
    green_residual,
    is_spacelike,
    make_bump,
    normalize_mode,
    pairing,
    theta_apply,
)

from oracles import free_space_retarded_solution


def small_lattice(n_space=64, n_time=96, dx=0.125, courant=0.5):
    return LatticeSpec(n_space=n_space, n_time=n_time, dx=dx, dt=courant * dx)


# ------------------------------------------------------------ lattice spec ---

def test_cfl_violation_rejected():
    with pytest.raises(StabilityError):
        LatticeSpec(n_space=64, n_time=64, dx=0.1, dt=0.11)
    with pytest.raises(StabilityError):
        LatticeSpec(n_space=64, n_time=64, dx=0.1, dt=0.1)  # equality not allowed


def test_lattice_validation():
    with pytest.raises(GeometryError):
        LatticeSpec(n_space=4, n_time=64, dx=0.1, dt=0.05)
    with pytest.raises(GeometryError):
        LatticeSpec(n_space=64, n_time=64, dx=-0.1, dt=0.05)


# ------------------------------------------------------------------ bumps ---

def test_bump_center_value():
    lat = small_lattice()
    f = make_bump(lat, (3.0, 4.0), (1.0, 1.0), amplitude=2.0)
    # (3.0, 4.0) lies on the grid: dt = 0.0625, dx = 0.125
    n_c, i_c = round(3.0 / lat.dt), round(4.0 / lat.dx)
    assert_allclose(f.values[n_c, i_c], 2.0 * math.exp(-2.0), rtol=1e-12)


def test_bump_zero_amplitude():
    lat = small_lattice()
    f = make_bump(lat, (3.0, 4.0), (1.0, 1.0), amplitude=0.0)
    assert f.is_zero


def test_bump_support_box_exact():
    lat = small_lattice()
    f = make_bump(lat, (3.0, 4.0), (0.8, 0.9), amplitude=1.0)
    t0, t1, x0, x1 = f.support_box
    inside = f.values[t0:t1, x0:x1]
    assert np.any(inside != 0)
    padded = f.values.copy()
    padded[t0:t1, x0:x1] = 0.0
    assert not np.any(padded)
    # box is tight: boundary rows/columns of the box contain support
    assert np.any(f.values[t0] != 0) and np.any(f.values[t1 - 1] != 0)


def test_bump_geometry_errors():
    lat = small_lattice()
    with pytest.raises(GeometryError):
        make_bump(lat, (0.05, 4.0), (0.5, 1.0), 1.0)  # touches early slices
    with pytest.raises(GeometryError):
        make_bump(lat, (5.9, 4.0), (0.5, 1.0), 1.0)  # touches late slices
    with pytest.raises(GeometryError):
        make_bump(lat, (3.0, 0.2), (0.5, 1.0), 1.0)  # crosses the seam
    with pytest.raises(GeometryError):
        make_bump(lat, (3.0, 4.0), (0.5, 5.0), 1.0)  # wraps the circle


def test_test_function_validation():
    lat = small_lattice()
    vals = np.zeros(lat.shape)
    vals[10, 5] = 1.0
    with pytest.raises(GeometryError):
        TestFunction(lat, vals, (12, 20, 0, 3))  # nonzero outside box
    vals2 = np.zeros(lat.shape)
    vals2[1, 5] = 1.0
    with pytest.raises(GeometryError):
        TestFunction(lat, vals2, (0, 4, 0, 8))  # touches second slice
    f = TestFunction.from_values(lat, np.zeros(lat.shape))
    assert f.is_zero


# --------------------------------------------------------- Green operators ---

def test_green_zero_source():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=1.0)
    f = make_bump(lat, (3.0, 4.0), (1.0, 1.0), amplitude=0.0)
    assert not np.any(green_apply(op, "retarded", f))


def test_green_linearity():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.7)
    f = make_bump(lat, (2.0, 3.0), (0.6, 0.7), 1.0)
    g = make_bump(lat, (3.5, 5.0), (0.6, 0.7), 1.0)
    combo = TestFunction.from_values(lat, 2.0 * f.values + 3.0 * g.values)
    direct = green_apply(op, "retarded", combo)
    split = 2.0 * green_apply(op, "retarded", f) + 3.0 * green_apply(op, "retarded", g)
    assert_allclose(direct, split, atol=1e-12)


def test_advanced_is_time_reflected_retarded_exactly():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f = make_bump(lat, (2.5, 3.0), (0.7, 0.8), 1.3)
    adv = green_apply(op, "advanced", f)
    reflected = TestFunction.from_values(lat, f.values[::-1].copy())
    ret = green_apply(op, "retarded", reflected)
    assert np.array_equal(adv, ret[::-1])


def test_retarded_causal_support():
    """The retarded field vanishes (1e-12) outside the forward cone + halo."""
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f = make_bump(lat, (1.5, 4.0), (0.8, 0.8), 1.0)
    u = green_apply(op, "retarded", f)
    cone = causal_future_mask(lat, [f.support_box])
    outside = np.abs(u) * ~cone
    assert float(outside.max()) <= 1e-12 * float(np.abs(u).max())


def test_residual_second_order_convergence():
    op = FieldOperatorSpec(mass=1.0)
    residuals = []
    for n in (128, 256):
        lat = LatticeSpec(n_space=n, n_time=n, dx=8.0 / n, dt=4.0 / n)
        f = make_bump(lat, (1.9, 4.0), (1.6, 1.6), 1.0)
        u = green_apply(op, "retarded", f)
        residuals.append(green_residual(op, f, u))
    order = math.log2(residuals[0] / residuals[1])
    assert order >= 1.9, f"observed order {order:.3f}, residuals {residuals}"


def test_retarded_matches_dalembert_oracle():
    """Near-massless solve against the closed-form d'Alembert integral."""
    n = 64
    lat = LatticeSpec(n_space=n, n_time=48, dx=8.0 / n, dt=4.0 / n)
    op = FieldOperatorSpec(mass=1e-6)
    t_c, r_t, x_c, r_x = 0.8, 0.5, 4.0, 0.75
    f = make_bump(lat, (t_c, x_c), (r_t, r_x), 1.0)
    u = green_apply(op, "retarded", f)

    def prof_t(s):
        arg = (np.asarray(s, dtype=float) - t_c) / r_t
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(np.abs(arg) < 1, np.exp(-1.0 / np.maximum(1 - arg**2, 1e-300)), 0.0)

    def prof_x(y):
        arg = (np.asarray(y, dtype=float) - x_c) / r_x
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(np.abs(arg) < 1, np.exp(-1.0 / np.maximum(1 - arg**2, 1e-300)), 0.0)

    exact = free_space_retarded_solution(
        prof_t, prof_x, (x_c - r_x, x_c + r_x), lat.times, lat.xs
    )
    err = float(np.max(np.abs(u - exact)[2:-2]))
    assert err <= 5.0 * lat.dx**2, f"error {err:.3e} vs bound {5 * lat.dx**2:.3e}"


# ----------------------------------------------------------------- pairing ---

def test_pairing_symmetric_and_positive():
    lat = small_lattice()
    f = make_bump(lat, (2.0, 3.0), (0.6, 0.7), 1.0)
    g = make_bump(lat, (2.2, 3.4), (0.7, 0.8), 0.5)
    assert pairing(f, f) > 0
    assert_allclose(pairing(f, g), pairing(g, f), rtol=1e-14)


def test_pairing_riemann_value():
    lat = small_lattice()
    f = make_bump(lat, (2.0, 3.0), (0.6, 0.7), 2.0)
    assert_allclose(pairing(f, f), float(np.sum(f.values**2)) * lat.dx * lat.dt, rtol=1e-15)


def test_causal_pairing_antisymmetric():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f = make_bump(lat, (2.0, 3.0), (0.6, 0.7), 1.0)
    g = make_bump(lat, (3.5, 3.5), (0.6, 0.7), 1.0)
    e_fg = causal_pairing(op, f, g)
    e_gf = causal_pairing(op, g, f)
    scale = max(abs(e_fg), abs(e_gf), 1.0)
    assert abs(e_fg + e_gf) <= 1e-10 * scale
    assert abs(e_fg) > 1e-3  # timelike-related bumps do talk to each other


def test_causal_pairing_spacelike_zero():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f = make_bump(lat, (2.0, 1.5), (0.4, 0.5), 1.0)
    g = make_bump(lat, (2.0, 6.0), (0.4, 0.5), 1.0)
    assert is_spacelike(lat, f.support_box, g.support_box)
    assert abs(causal_pairing(op, f, g)) <= 1e-12


def test_normalize_mode_unit_commutator():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f1 = make_bump(lat, (2.0, 4.0), (0.5, 0.6), 1.0)
    f2 = make_bump(lat, (2.9, 4.0), (0.5, 0.6), 1.0)
    g1, g2 = normalize_mode(op, f1, f2)
    assert_allclose(causal_pairing(op, g1, g2), 1.0, atol=1e-8)


def test_normalize_mode_degenerate():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=0.5)
    f = make_bump(lat, (2.0, 4.0), (0.5, 0.6), 1.0)
    with pytest.raises(DegenerateModeError):
        normalize_mode(op, f, f)  # E(f, f) = 0 by antisymmetry


# --------------------------------------------------------- causal geometry ---

def test_cone_masks_basic_shape():
    lat = small_lattice()
    box = (40, 42, 30, 32)
    past = causal_past_mask(lat, [box], halo=0)
    future = causal_future_mask(lat, [box], halo=0)
    assert past[41, 31] and future[40, 31]
    assert not past[60, 31] and not future[10, 31]
    # grid speed: after k steps the front has moved k cells
    assert future[60, 31 + 20] and not future[60, 31 + 21]


def test_spacelike_symmetry():
    lat = small_lattice()
    a = (10, 20, 5, 15)
    b = (10, 20, 40, 55)
    assert is_spacelike(lat, a, b) and is_spacelike(lat, b, a)
    c = (30, 40, 5, 15)  # in the future of a
    assert not is_spacelike(lat, a, c)


# ------------------------------------------------------------ coupled solve ---

def coupled_fixture(lam=0.4, rho_amp=1.0, lat=None):
    lat = lat or small_lattice(n_space=64, n_time=128)
    sys_op = FieldOperatorSpec(mass=0.4)
    pa_op = FieldOperatorSpec(mass=1.1)
    pb_op = FieldOperatorSpec(mass=0.9)
    rho_a = make_bump(lat, (2.0, 2.2), (0.5, 0.5), rho_amp)
    rho_b = make_bump(lat, (2.0, 5.8), (0.5, 0.5), rho_amp)
    return CoupledSystem(lat, sys_op, pa_op, pb_op, rho_a, rho_b, coupling=lam)


def late_probe_source(lat, which="probe_a"):
    f = make_bump(lat, (5.5, 2.2), (0.6, 0.7), 1.0)
    return TripleFunction.single_slot(f, which)


def test_coupled_zero_coupling_equals_free():
    coupled = coupled_fixture(lam=0.0)
    lat = coupled.lattice
    g = late_probe_source(lat)
    sol = coupled_advanced_apply(coupled, g)
    f = TestFunction.from_values(lat, g.probe_a)
    free = green_apply(coupled.probe_a_op, "advanced", f)
    assert np.array_equal(sol.probe_a, free)
    assert not np.any(sol.system) and not np.any(sol.probe_b)


def test_coupled_overlap_warning():
    lat = small_lattice()
    op = FieldOperatorSpec(mass=1.0)
    rho_a = make_bump(lat, (2.0, 4.0), (0.5, 0.5), 1.0)
    rho_b = make_bump(lat, (2.0, 4.2), (0.5, 0.5), 1.0)
    with pytest.warns(UserWarning):
        CoupledSystem(lat, op, op, op, rho_a, rho_b, coupling=0.1)


def test_coupled_adjointness():
    """pairing(g', E_T^- g) = pairing(E_T^+ g', g), summed over slots."""
    coupled = coupled_fixture(lam=0.6)
    lat = coupled.lattice
    g = late_probe_source(lat, "probe_a")
    gp = TripleFunction.single_slot(make_bump(lat, (4.0, 5.0), (0.5, 0.6), 0.8), "system")
    adv = coupled_advanced_apply(coupled, g)
    ret = coupled_retarded_apply(coupled, gp)
    lhs = sum(pairing(a, b, lat) for a, b in zip(gp.components, adv.components))
    rhs = sum(pairing(a, b, lat) for a, b in zip(ret.components, g.components))
    assert_allclose(lhs, rhs, rtol=1e-11)


# -------------------------------------------------------------- theta map ---

def test_theta_zero_coupling_identity():
    coupled = coupled_fixture(lam=0.0)
    g = late_probe_source(coupled.lattice)
    out = theta_apply(coupled, g)
    assert np.array_equal(out.probe_a, g.probe_a)
    assert not np.any(out.system) and not np.any(out.probe_b)


def test_theta_rejects_source_in_interaction_past():
    coupled = coupled_fixture(lam=0.3)
    lat = coupled.lattice
    early = TripleFunction.single_slot(make_bump(lat, (0.8, 2.2), (0.4, 0.5), 1.0), "probe_a")
    with pytest.raises(CausalGeometryError):
        theta_apply(coupled, early)


def test_theta_identity_on_causal_complement():
    lat = small_lattice(n_space=192, n_time=128, dx=0.125)
    coupled = coupled_fixture(lam=0.8, lat=lat)
    # same times as the zones but far away on the circle: spacelike to both
    f = make_bump(lat, (2.0, 14.0), (0.3, 0.3), 1.0)
    assert is_spacelike(lat, f.support_box, coupled.rho_a.support_box)
    assert is_spacelike(lat, f.support_box, coupled.rho_b.support_box)
    g = TripleFunction.single_slot(f, "probe_a")
    out = theta_apply(coupled, g)
    scale = float(np.abs(f.values).max())
    assert float(np.abs(out.probe_a - g.probe_a).max()) <= 1e-10 * scale
    assert float(np.abs(out.system).max()) <= 1e-10 * scale
    assert float(np.abs(out.probe_b).max()) <= 1e-10 * scale


def test_theta_probe_b_slot_small_for_spacelike_zones():
    coupled = coupled_fixture(lam=0.9, rho_amp=2.0)
    lat = coupled.lattice
    assert is_spacelike(lat, coupled.rho_a.support_box, coupled.rho_b.support_box)
    g = late_probe_source(lat, "probe_a")
    out = theta_apply(coupled, g)
    f = TestFunction.from_values(lat, g.probe_a)
    adv = green_apply(coupled.probe_a_op, "advanced", f)
    residual = green_residual(coupled.probe_a_op, f, adv)
    leak = float(np.abs(out.probe_b).max())
    assert leak <= 10.0 * residual, f"leak {leak:.3e} vs residual {residual:.3e}"


# ---------------------------------------------------------- Born expansion ---

def test_born_slot_parity():
    coupled = coupled_fixture()
    lat = coupled.lattice
    f = make_bump(lat, (5.5, 2.2), (0.6, 0.7), 1.0)
    terms = born_theta_terms(coupled, f, "a")
    assert len(terms) == 5
    for k, term in enumerate(terms):
        if k % 2 == 0:
            assert not np.any(term.system), f"order {k} has a system component"
        else:
            assert not np.any(term.probe_a) and not np.any(term.probe_b)


def test_born_order_zero_is_input():
    coupled = coupled_fixture()
    lat = coupled.lattice
    f = make_bump(lat, (5.5, 2.2), (0.6, 0.7), 1.0)
    terms = born_theta_terms(coupled, f, "a")
    assert np.array_equal(terms[0].probe_a, f.values)


def test_born_remainder_scaling():
    """theta - (Born sum to order 4) shrinks like coupling^6 on the probe
    slots and coupling^5 on the system slot (log-log slope >= 4.5).

    The interaction terms carry strong factorial suppression (the advanced
    coupling kernel is Volterra in time), so the zone amplitude is chosen
    large enough that the remainder stays above float rounding across the
    whole coupling range."""
    coupled = coupled_fixture(rho_amp=3000.0)
    lat = coupled.lattice
    f = make_bump(lat, (5.5, 2.2), (0.6, 0.7), 1.0)
    terms = born_theta_terms(coupled, f, "a")
    lams = np.geomspace(1e-3, 1e-2, 5)
    probe_rem, system_rem = [], []
    g = TripleFunction.single_slot(f, "probe_a")
    for lam in lams:
        coupled.coupling = float(lam)
        full = theta_apply(coupled, g)
        approx = born_reconstruct(terms, float(lam))
        probe_rem.append(
            max(
                float(np.abs(full.probe_a - approx.probe_a).max()),
                float(np.abs(full.probe_b - approx.probe_b).max()),
            )
        )
        system_rem.append(float(np.abs(full.system - approx.system).max()))
    probe_slope = np.polyfit(np.log(lams), np.log(probe_rem), 1)[0]
    system_slope = np.polyfit(np.log(lams), np.log(system_rem), 1)[0]
    assert probe_slope >= 4.5, f"probe slope {probe_slope:.2f}, remainders {probe_rem}"
    assert system_slope >= 4.5, f"system slope {system_slope:.2f}, remainders {system_rem}"


def test_born_richardson_extracts_second_order():
    """(theta(g)_probe - f) / coupling^2 converges to U f at rate O(coupling^2)."""
    coupled = coupled_fixture(rho_amp=64.0)
    lat = coupled.lattice
    f = make_bump(lat, (5.5, 2.2), (0.6, 0.7), 1.0)
    terms = born_theta_terms(coupled, f, "a")
    t2 = terms[2].probe_a  # U f
    g = TripleFunction.single_slot(f, "probe_a")
    scale = float(np.abs(t2).max())
    errs = []
    for lam in (0.1, 0.05):
        coupled.coupling = lam
        full = theta_apply(coupled, g)
        est = (full.probe_a - f.values) / lam**2
        errs.append(float(np.abs(est - t2).max()) / scale)
    assert errs[0] < 1e-3, f"Richardson error {errs[0]:.3e} at coupling 0.1"
    assert errs[1] <= 0.35 * errs[0], f"errors {errs} do not shrink at O(coupling^2)"
