from fractions import Fraction

import numpy as np
import pytest

from dbedge.complex import (CechFamily, Cochain, annulus, build_cover, circle, coboundary,
                            sample_function, sample_one_form, sphere)
from dbedge.db import DBCochain
from dbedge.dynamics import (BoundaryState, QuantizationObstruction, _l2, charge_bracket,
                             chart_functions, electric_charge, eom_residuals, magnetic_charges,
                             on_shell_state, presymplectic_potential, quantization_check,
                             scalar_two_form_charge, solve_dual_edge_mode, theta_terms)
from dbedge.fields import (ExtendedField, FieldVariation, U1Connection, random_zero_cocycle,
                           transform_extended, winding_number)
from dbedge.wilson import solve_harmonic_form


@pytest.fixture(scope="module")
def setup():
    cpx = annulus(2, 16)
    cov = build_cover(cpx, 4)[0]
    return cpx, cov


def _dtheta(x):
    return np.stack([-x[:, 1], x[:, 0]], 1) / (x[:, 0] ** 2 + x[:, 1] ** 2)[:, None]


@pytest.mark.parametrize("kpn,feasible,w", [
    ((2, 3, 4), True, 6), ((2, 1, 1), False, Fraction(1, 2)), ((1, 0, 0), True, 0),
    ((-2, 3, 4), True, -6), ((3, 2, 3), True, 2),
])
def test_quantization_check(kpn, feasible, w):
    c = quantization_check(*kpn)
    assert c.feasible is feasible and c.winding == w
    assert c.to_json()["feasible"] is feasible


def test_quantization_rejects_zero_level():
    with pytest.raises(ValueError):
        quantization_check(0, 1, 1)


@pytest.mark.parametrize("kpn,w", [((1, 1, 1), 1), ((3, 2, 3), 2), ((2, 3, 4), 6), ((1, 0, 0), 0)])
def test_dual_edge_mode_solutions(setup, kpn, w):
    cpx, cov = setup
    om = solve_harmonic_form(cpx, kpn[2])
    st = on_shell_state(*kpn, om, cov)
    assert winding_number(st.dual_edge_mode) == w
    assert st.dual_edge_mode.is_global == (w == 0)
    assert st.dual_connection.cochain.is_zero()
    rep = eom_residuals(st)
    assert rep.max_residual < 1e-8 and rep.feasible and rep.required_winding == w
    assert rep.maxwell is None


def test_obstruction_is_raised(setup):
    cpx, cov = setup
    with pytest.raises(QuantizationObstruction) as err:
        solve_dual_edge_mode(2, 1, 1, solve_harmonic_form(cpx, 1), cov)
    assert err.value.check.winding == Fraction(1, 2)


def test_zero_state_has_exactly_zero_residuals(setup):
    cpx, cov = setup
    rep = eom_residuals(on_shell_state(1, 1, 0, solve_harmonic_form(cpx, 0), cov))
    assert (rep.duality, rep.eom_omega, rep.flatness) == (0.0, 0.0, 0.0)


def test_duality_residual_tracks_perturbation(setup):
    cpx, cov = setup
    st = on_shell_state(1, 1, 1, solve_harmonic_form(cpx, 1), cov)
    rng = np.random.default_rng(0)
    bump = Cochain.from_floats(cpx, 1, rng.normal(size=cpx.n_simplices(1)))
    d_bump = _l2(cpx, 2, coboundary(bump).values)
    bump = bump.scale(1.0 / d_bump)
    A = U1Connection.from_global(cov, bump)
    moved = BoundaryState(st.a, A, st.dual_edge_mode, st.omega, 1, 1, 1, star_F=st.star_F)
    expected = 1 / (2 * np.pi)  # e² k / 2π times the unit curvature norm
    assert eom_residuals(moved).duality == pytest.approx(expected, rel=0.1)


def test_bracket_cos_sin_second_order():
    vals = []
    for n in (64, 128, 256):
        c = circle(n)
        al = sample_function(c, lambda x: x[:, 0])
        at = sample_function(c, lambda x: x[:, 1])
        vals.append(charge_bracket(al, at, 1))
    assert vals[-1] == pytest.approx(-0.5, rel=0.01)
    errs = [abs(v + 0.5) for v in vals]
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.8


def test_bracket_constant_and_winding():
    c = circle(48)
    cov = build_cover(c, 3)[0]
    const = sample_function(c, lambda x: 0 * x[:, 0] + 1.5)
    at = sample_function(c, lambda x: np.sin(3 * np.arctan2(x[:, 1], x[:, 0])))
    assert abs(charge_bracket(const, at, 2)) < 1e-12
    wound = chart_functions(cov, np.cos, winding=2)
    assert charge_bracket(const, wound, 3, cov) == pytest.approx(-3 * 1.5 * 2, rel=1e-9)
    # shifting charts by constants leaves the bracket alone
    al = sample_function(c, lambda x: x[:, 0])
    shifted = chart_functions(cov, lambda t: np.cos(t) + 0.0, winding=2)
    offs = shifted.values.copy()
    for i in range(3):
        offs[cov.layout.segment(0, 0, (i,))] += i
    moved = CechFamily(cov, 0, 0, offs, None)
    assert charge_bracket(al, moved, 1, cov) == pytest.approx(charge_bracket(al, shifted, 1, cov), abs=1e-12)


def test_electric_charge_cases(setup):
    cpx, cov = setup
    flat = U1Connection(DBCochain.zeros(cov, 1, 1))
    al = sample_function(cpx, lambda x: x[:, 0])
    assert electric_charge(al, flat, 2) == 0.0
    A = U1Connection.from_global(cov, sample_one_form(cpx, lambda x: np.stack([-x[:, 1], x[:, 0]], 1) / 2))
    # dA = dx∧dy, so the flux is the area between the two 16-gons
    flux = 8 * (4 - 1) * np.sin(2 * np.pi / 16)
    three = sample_function(cpx, lambda x: 0 * x[:, 0] + 3.0)
    assert electric_charge(three, A, 2) == pytest.approx(2 / (2 * np.pi) * 3 * flux, rel=1e-9)
    al2 = sample_function(cpx, lambda x: x[:, 1] ** 2)
    lhs = electric_charge(Cochain.from_floats(cpx, 0, al.values + al2.values), A, 2)
    assert lhs == pytest.approx(electric_charge(al, A, 2) + electric_charge(al2, A, 2), abs=1e-12)


def test_magnetic_charges_cases():
    c = circle(60)
    cov = build_cover(c, 3)[0]
    a0 = Cochain.zeros(c, 1)
    funcs = chart_functions(cov, np.sin)
    assert not magnetic_charges(a0, funcs, 1, cov).any()
    a = sample_one_form(c, lambda x: 2 * _dtheta(x))
    const = chart_functions(cov, lambda t: 0 * t + 0.75)
    q = magnetic_charges(a, const, 3, cov)
    assert q.sum() == pytest.approx(3 * 0.75 * 2, rel=1e-9)
    doubled = magnetic_charges(a, CechFamily(cov, 0, 0, 2 * funcs.values, None), 3, cov)
    assert np.allclose(doubled, 2 * magnetic_charges(a, funcs, 3, cov), rtol=0, atol=1e-12)
    assert np.allclose(magnetic_charges(a, funcs, 3, cov, boundary_sign=-1),
                       -magnetic_charges(a, funcs, 3, cov))


def _monopole(x):
    r = np.linalg.norm(x, axis=1)
    return np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], 1) / (r * (r + x[:, 2]))[:, None]


def test_scalar_two_form_charge():
    sp = sphere(6)
    al = sample_one_form(sp, _monopole)
    psi = sample_function(sp, lambda x: np.arccos(np.clip(x[:, 2], -1, 1)))
    assert scalar_two_form_charge(al, psi) == pytest.approx(-2 * np.pi ** 2, rel=0.01)
    small = sphere(2)
    const = Cochain.from_fractions(small, 0, [Fraction(2, 3)] * small.n_vertices)
    al = Cochain.from_fractions(small, 1, [Fraction(i % 5, 7) for i in range(small.n_simplices(1))])
    assert scalar_two_form_charge(al, const) == 0.0


def test_scalar_charge_of_closed_form_vanishes():
    vals = []
    for s in (2, 3, 4):
        sp = sphere(s)
        al = sample_one_form(sp, lambda x: np.stack([x[:, 1], x[:, 0], 0 * x[:, 0]], 1))  # d(xy)
        psi = sample_function(sp, lambda x: x[:, 2] ** 2)
        vals.append(abs(scalar_two_form_charge(al, psi)))
    assert vals[-1] < 1e-10 or vals[-1] < vals[0]


def _state(setup, rng):
    cpx, cov = setup
    om = solve_harmonic_form(cpx, 1)
    A = U1Connection.from_global(cov, Cochain.from_floats(cpx, 1, 0.1 * rng.normal(size=cpx.n_simplices(1))))
    phi = sample_function(cpx, lambda x: np.sin(x[:, 0]))
    base = on_shell_state(1, 1, 1, om, cov)
    return BoundaryState.from_bulk(A, phi, dual_connection=base.dual_connection,
                                   dual_edge_mode=base.dual_edge_mode, omega=om, k=1, p=1, n=1,
                                   star_F=base.star_F), A, phi


def test_theta_on_electric_direction_is_electric_charge(setup):
    cpx, cov = setup
    rng = np.random.default_rng(1)
    st, _, _ = _state(setup, rng)
    # a curl-ful dual connection that vanishes on the inner ring keeps the state on shell
    vals = sample_one_form(cpx, lambda x: np.stack([-x[:, 1], x[:, 0]], 1)).values.copy()
    r = np.linalg.norm(cpx.coords, axis=1)
    on_ring = (r[cpx.simplices[1]] < 1 + 1e-9).all(axis=1)
    vals[on_ring] = 0.0
    A = U1Connection.from_global(cov, Cochain.from_floats(cpx, 1, vals))
    st = BoundaryState(st.a, A, st.dual_edge_mode, st.omega, 2, 2, 1)
    al = sample_function(cpx, lambda x: x[:, 0] ** 2)
    var = FieldVariation({"phi": al})
    out = theta_terms(st, var)
    assert out["on_shell"] and set(out["terms"]) == {"phi_dA"}
    q = electric_charge(al, A, 2)
    assert q != 0.0 and presymplectic_potential(st, var) == q
    assert presymplectic_potential(st, FieldVariation({})) == 0.0


def test_theta_off_shell_keeps_boundary_terms(setup):
    cpx, cov = setup
    st, _, _ = _state(setup, np.random.default_rng(5))
    A = U1Connection.from_global(cov, sample_one_form(cpx, lambda x: np.stack([-x[:, 1], x[:, 0]], 1)))
    off = BoundaryState(st.a, A, st.dual_edge_mode, st.omega, 1, 1, 1)
    out = theta_terms(off, FieldVariation({"phi": sample_function(cpx, lambda x: x[:, 0])}))
    assert not out["on_shell"] and {"phi_at", "phi_omega"} <= set(out["terms"])


def test_theta_on_magnetic_direction_is_per_chart(setup):
    rng = np.random.default_rng(2)
    st, _, _ = _state(setup, rng)
    sc = st.dual_edge_mode.cover
    funcs = chart_functions(sc, np.cos)
    q = presymplectic_potential(st, FieldVariation({"dual_phi": funcs}))
    assert np.allclose(q, magnetic_charges(st.a_circle, funcs, 1, sc), rtol=0, atol=0)


def test_theta_gauge_invariance(setup):
    cpx, cov = setup
    rng = np.random.default_rng(3)
    st, A, phi = _state(setup, rng)
    sc = st.dual_edge_mode.cover
    var = FieldVariation({"phi": sample_function(cpx, lambda x: x[:, 1]),
                          "dual_A": sample_one_form(cpx, lambda x: np.stack([x[:, 1], -x[:, 0]], 1)),
                          "dual_phi": sample_function(sc.complex, lambda x: x[:, 0])})
    ref = presymplectic_potential(st, var)
    for _ in range(5):
        eps = sample_function(cpx, lambda x, c=rng.normal(size=2): c[0] * x[:, 0] + c[1] * x[:, 1] ** 2)
        A2 = U1Connection.from_global(cov, A.global_form() + coboundary(eps))
        et = random_zero_cocycle(cov, rng)
        ext = transform_extended(ExtendedField(st.dual_connection, st.dual_edge_mode), et)
        moved = BoundaryState.from_bulk(A2, phi + eps, dual_connection=ext.connection,
                                        dual_edge_mode=ext.edge_mode, omega=st.omega, k=1, p=1, n=1,
                                        star_F=st.star_F)
        assert presymplectic_potential(moved, var) == pytest.approx(ref, abs=1e-10)
