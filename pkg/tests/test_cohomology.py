from fractions import Fraction

import numpy as np
import pytest

from dbedge.cohomology import (CohomologyGroup, apply_ses_map, cochain_cohomology,
                               cocycle_from_integer_class, curvature, gauge_equivalence, holonomy,
                               integral_cohomology, is_acyclic, random_cocycle, simplicial_cohomology,
                               smith_normal_form, solve_integer, solve_rational, u_map,
                               verify_exactness)
from dbedge.complex import Cochain, Subcomplex, annulus, build_cover, circle, integrate, sphere
from dbedge.db import DBCochain, gauge_transform, random_db_cochain

# invariant factors computed with sympy.matrices.normalforms.smith_normal_form
SNF_CASES = [
    ([[2, 4, 4], [-6, 6, 12], [10, -4, -16]], (2, 6, 12)),
    ([[6, 4, 0], [4, 6, 2], [0, 2, 6], [2, 0, 4]], (2, 2, 24)),
    ([[0, 0], [0, 0]], ()),
    ([[3, 0, 0], [0, 5, 0], [0, 0, 0]], (1, 15)),
    ([[-5, 3, 2, -1, -1, 4, -5], [2, -3, -4, 0, 5, 3, 3], [2, 3, 0, -4, 4, -1, 0],
      [-1, -3, 5, 3, 2, -1, 4], [0, -1, -1, -3, -4, 1, 4]], (1, 1, 1, 1, 1)),
]


@pytest.mark.parametrize("M,factors", SNF_CASES)
def test_smith_normal_form_matches_reference(M, factors):
    M = np.array(M, dtype=np.int64)
    res = smith_normal_form(M)
    assert tuple(int(f) for f in res.factors) == factors
    assert np.array_equal(res.left @ M @ res.right, res.diagonal)
    assert abs(round(np.linalg.det(res.left.astype(float)))) == 1
    assert abs(round(np.linalg.det(res.right.astype(float)))) == 1


def test_smith_random_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        M = rng.integers(-4, 5, (rng.integers(1, 7), rng.integers(1, 7)))
        res = smith_normal_form(M)
        assert np.array_equal(res.left @ M @ res.right, res.diagonal)
        f = [int(v) for v in res.factors]
        assert all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1))


def test_torsion_from_cochain_complex():
    # Z --2--> Z: H^0 = 0, H^1 = Z/2
    d = [np.array([[2]])]
    assert cochain_cohomology(d, [1, 1], 0).is_zero()
    assert cochain_cohomology(d, [1, 1], 1) == CohomologyGroup(0, (2,))
    assert str(CohomologyGroup(2, (3,))) == "Z^2 + Z/3"


def test_cohomology_tables():
    _, cn = build_cover(circle(12), 3)
    assert integral_cohomology(cn, 0) == CohomologyGroup(1)
    assert integral_cohomology(cn, 1) == CohomologyGroup(1)
    _, an = build_cover(annulus(2, 16), 4)
    assert integral_cohomology(an, 1) == CohomologyGroup(1)
    _, sn = build_cover(sphere(2))
    assert integral_cohomology(sn, 1).is_zero()
    assert integral_cohomology(sn, 2) == CohomologyGroup(1)
    assert simplicial_cohomology(sphere(1), 2) == CohomologyGroup(1)


def test_acyclicity_certificate():
    c = circle(8)
    arc = Subcomplex.induced(c, np.arange(8) < 4)
    whole = Subcomplex.induced(c, np.ones(8, dtype=bool))
    assert is_acyclic(arc)
    assert not is_acyclic(whole)


def test_linear_solvers():
    M = np.array([[2, 0], [0, 3]])
    assert list(solve_integer(M, [4, 9])) == [2, 3]
    assert solve_integer(M, [1, 3]) is None
    assert solve_rational(M, [1, 1]) == [Fraction(1, 2), Fraction(1, 3)]
    assert solve_rational(np.array([[1], [1]]), [1, 2]) is None


def test_monopole_flux_matches_integer_class():
    cov, _ = build_cover(sphere(2))
    from dbedge.cohomology import nerve_homology_basis
    _, coc = nerve_homology_basis(cov, 2)
    for scale in (1, -1, 2):
        x = cocycle_from_integer_class(cov, scale * coc[:, 0], k=1)
        assert integrate(curvature(x)) == scale
        assert u_map(x).coordinates == (scale,)


def test_holonomy_gauge_invariant_on_circle():
    rng = np.random.default_rng(2)
    cov, _ = build_cover(circle(12), 3)
    x = random_cocycle(cov, rng, flat=True)
    h = holonomy(x)
    for _ in range(10):
        y = gauge_transform(x, random_db_cochain(cov, 1, 0, rng))
        assert holonomy(y) == h
        assert gauge_equivalence(x, y) is not None


def test_gauge_equivalence_detects_distinct_holonomy():
    cov, _ = build_cover(circle(12), 3)
    zero = DBCochain.zeros(cov, 1, 1)
    m = [Fraction(1, 3), Fraction(0), Fraction(0)]
    x = apply_ses_map("v", m, cov)
    assert holonomy(x) != 0
    assert gauge_equivalence(zero, x) is None


@pytest.mark.parametrize("build", [
    lambda: build_cover(circle(12), 3)[0],
    lambda: build_cover(annulus(2, 16), 4)[0],
    lambda: build_cover(sphere(2))[0],
])
def test_short_exact_sequences_exact_at_every_node(build):
    res = verify_exactness(build(), np.random.default_rng(0), samples=2)
    assert set(res) == {"ses1.Omega1", "ses1.H1DB", "ses1.H2", "ses2.H1RZ", "ses2.H1DB", "ses2.Omega2"}
    assert all(res.values()), res


def test_ses_map_dispatch():
    cov, _ = build_cover(circle(12), 3)
    with pytest.raises(ValueError):
        apply_ses_map("w", None, cov)
    om = Cochain.zeros(cov.complex, 1)
    assert apply_ses_map("delta_check", om, cov).is_zero()
