import numpy as np
import pytest
from scipy.integrate import quad

from dbedge.complex import (Cochain, SimplicialComplex, Subcomplex, annulus, circle, sample_function,
                            sample_one_form, sphere)
from dbedge.wilson import (HodgeError, WilsonError, build_hodge, refinement_study,
                           solve_harmonic_form, wilson_line_value)


def _circumcenter(P):
    a, b, c = P
    M = 2 * np.array([b - a, c - a])
    rhs = np.array([b @ b - a @ a, c @ c - a @ a])
    return np.linalg.solve(M, rhs)


def _shoelace(pts):
    x, y = np.array(pts).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_uniform_circle_stars():
    c = circle(16)
    H = build_hodge(c)
    ell = 2 * np.sin(np.pi / 16)
    assert np.allclose(H.star(0), ell)
    assert np.allclose(H.star(1), 1 / ell)


def test_annulus_stars_match_circumcentric_geometry():
    cpx = annulus(3, 24)
    H = build_hodge(cpx)
    X = cpx.coords
    dual = np.zeros(cpx.n_simplices(1))
    cell = np.zeros(cpx.n_vertices)
    area = []
    for t in cpx.simplices[2]:
        P = X[t]
        cc = _circumcenter(P)
        area.append(_shoelace(P))
        for i in range(3):
            u, v = t[(i + 1) % 3], t[(i + 2) % 3]
            mid = (X[u] + X[v]) / 2
            dual[cpx.index_of(tuple(sorted((u, v))))] += np.linalg.norm(cc - mid)
        for i in range(3):
            u, v = t[(i + 1) % 3], t[(i + 2) % 3]
            cell[t[i]] += _shoelace([X[t[i]], (X[t[i]] + X[u]) / 2, cc, (X[t[i]] + X[v]) / 2])
    ell = np.linalg.norm(X[cpx.simplices[1][:, 1]] - X[cpx.simplices[1][:, 0]], axis=1)
    assert np.allclose(H.star(1), dual / ell, rtol=0, atol=1e-12)
    assert np.allclose(H.star(0), cell, rtol=0, atol=1e-12)
    assert np.allclose(H.star(2), 1 / np.array(area), rtol=0, atol=1e-12)
    assert all((s > 0).all() for s in H.stars)


def test_codifferential_squares_to_zero():
    H = build_hodge(annulus(2, 16))
    rng = np.random.default_rng(0)
    v = rng.normal(size=H.complex.n_simplices(2))
    assert np.abs(H.codifferential(1) @ (H.codifferential(2) @ v)).max() < 1e-10
    with pytest.raises(ValueError):
        H.codifferential(0)


def test_laplacian_of_harmonic_polynomial_is_second_order():
    errs = []
    for lev in (2, 3, 4):
        cpx = annulus(2 << lev, 16 << lev)
        H = build_hodge(cpx)
        f = sample_function(cpx, lambda x: x[:, 0] ** 3 - 3 * x[:, 0] * x[:, 1] ** 2).to_float().values
        r = np.linalg.norm(cpx.coords, axis=1)
        interior = (r > 1 + 1e-9) & (r < 2 - 1e-9)
        lap = (H.laplacian0() @ f) / H.star(0)
        errs.append(np.sqrt(np.mean(lap[interior] ** 2)))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3.5


def test_obtuse_and_degenerate_meshes_are_named():
    flat = SimplicialComplex.from_top_simplices(
        [(0, 1, 2), (1, 2, 3)], coords=np.array([[0, 0], [1, 0], [0.5, 0.05], [0.5, -0.05]]))
    with pytest.raises(HodgeError, match="obtuse"):
        build_hodge(flat)
    sliver = SimplicialComplex.from_top_simplices(
        [(0, 1, 2)], coords=np.array([[0, 0], [1, 0], [2, 0]]))
    with pytest.raises(HodgeError, match="degenerate"):
        build_hodge(sliver)


def test_wilson_form_periods_and_linearity():
    cpx = annulus(4, 32)
    one = solve_harmonic_form(cpx, 1)
    d = one.diagnostics
    assert d["closure_exact"] and d["closure"] == 0.0
    assert one.period("inner") == pytest.approx(2 * np.pi, abs=1e-8)
    assert one.period("outer") == pytest.approx(2 * np.pi, abs=1e-8)
    assert d["discrete_coclosure"] < 1e-10
    three = solve_harmonic_form(cpx, 3)
    assert three.cochain.fractions() == one.cochain.scale(3).fractions()
    assert solve_harmonic_form(cpx, 0).cochain.is_zero()
    assert solve_harmonic_form(cpx, -2).period() == pytest.approx(-4 * np.pi, abs=1e-8)


def test_wilson_form_is_sampled_angle_differential():
    cpx = annulus(4, 32)
    dtheta = sample_one_form(cpx, lambda x: np.stack([-x[:, 1], x[:, 0]], 1)
                             / (x[:, 0] ** 2 + x[:, 1] ** 2)[:, None])
    om = solve_harmonic_form(cpx, 1).radians
    assert np.abs(om.values - dtheta.values).max() < 1e-9


def test_refinement_residuals():
    rows = refinement_study(1, levels=(0, 1, 2, 3))
    co = [r["coclosure"] for r in rows]
    assert all(b < 1.1 * a for a, b in zip(co, co[1:]))
    assert co[-1] < co[0] / 4
    # the boundary constraint is imposed exactly, so this sits at round-off
    assert all(r["tangentiality"] < 1e-12 for r in rows)
    periods = [r["period_inner"] for r in rows]
    assert max(periods) - min(periods) < 1e-8


def test_non_annulus_inputs():
    with pytest.raises(WilsonError):
        solve_harmonic_form(sphere(1), 1)
    om = solve_harmonic_form(annulus(2, 16), 1)
    with pytest.raises(WilsonError):
        wilson_line_value(Cochain.zeros(om.complex, 0), om)
    with pytest.raises(WilsonError):
        wilson_line_value(Cochain.zeros(annulus(2, 16), 1), om)


def test_wilson_line_value_cases():
    cpx = annulus(4, 32)
    om = solve_harmonic_form(cpx, 2)
    zero = Cochain.zeros(cpx, 1)
    assert wilson_line_value(zero, om) == 0.0
    assert abs(wilson_line_value(om.radians, om)) < 1e-12
    g = lambda r: np.exp(-r) * r ** 2
    a = sample_one_form(cpx, lambda x: (g(np.linalg.norm(x, axis=1))
                                        / np.linalg.norm(x, axis=1))[:, None] * x)
    oracle = 2 * np.pi * 2 * quad(g, 1, 2)[0]
    assert wilson_line_value(a, om) == pytest.approx(oracle, abs=1e-10)
    rng = np.random.default_rng(1)
    b = Cochain.from_floats(cpx, 1, rng.normal(size=cpx.n_simplices(1)))
    lhs = wilson_line_value(a.scale(2.0) + b, om)
    assert lhs == pytest.approx(2 * wilson_line_value(a, om) + wilson_line_value(b, om), abs=1e-12)
    # rings are log-spaced, so the inner two ring gaps end at sqrt(2)
    r = np.linalg.norm(cpx.coords, axis=1)
    half = Subcomplex.induced(cpx, r <= np.sqrt(2) + 1e-9)
    oracle_half = 2 * np.pi * 2 * quad(g, 1, np.sqrt(2))[0]
    assert wilson_line_value(a, om, half) == pytest.approx(oracle_half, rel=1e-6)
