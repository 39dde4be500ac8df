"""Discrete Hodge stars and the harmonic Wilson form on a flat annulus."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex import (Cochain, SimplicialComplex, Subcomplex, annulus, boundary_circle, coboundary,
                      cup_product, integrate)

TWO_PI = 2 * np.pi
# Potentials are rounded to this dyadic grid so the form is an exact rational cochain.
QUANTUM_BITS = 40


class HodgeError(ValueError):
    pass


class WilsonError(ValueError):
    pass


def _sparse_d(cpx: SimplicialComplex, p: int) -> sp.csr_matrix:
    f = cpx.faces[p + 1]
    n_rows, width = f.shape
    rows = np.repeat(np.arange(n_rows), width)
    signs = np.tile([(-1) ** i for i in range(width)], n_rows)
    return sp.csr_matrix((signs.astype(float), (rows, f.ravel())),
                         shape=(n_rows, cpx.n_simplices(p)))


@dataclass(frozen=True, eq=False)
class HodgeStructure:
    """Diagonal circumcentric Hodge stars of a metric complex.

    ``stars[p]`` maps primal p-cochains to dual (dim - p)-cochains and holds
    dual/primal volume ratios.
    """

    complex: SimplicialComplex
    stars: tuple
    d: tuple = field(repr=False)

    def star(self, p: int) -> np.ndarray:
        return self.stars[p]

    def codifferential(self, p: int) -> sp.csr_matrix:
        """``δ_p = ⋆_{p-1}^{-1} d_{p-1}^T ⋆_p`` from p- to (p-1)-cochains."""
        if not 1 <= p <= self.complex.dim:
            raise ValueError(f"no codifferential on degree {p}")
        return sp.diags(1.0 / self.stars[p - 1]) @ self.d[p - 1].T @ sp.diags(self.stars[p])

    def laplacian0(self) -> sp.csr_matrix:
        """Weak (stiffness) Laplacian ``d_0^T ⋆_1 d_0`` on vertices."""
        return (self.d[0].T @ sp.diags(self.stars[1]) @ self.d[0]).tocsr()

    def inner(self, p: int, a, b) -> float:
        a = a.to_float().values if isinstance(a, Cochain) else np.asarray(a, dtype=float)
        b = b.to_float().values if isinstance(b, Cochain) else np.asarray(b, dtype=float)
        return float(np.sum(a * self.stars[p] * b))

    def norm(self, c) -> float:
        p = c.degree if isinstance(c, Cochain) else 1
        return float(np.sqrt(max(self.inner(p, c, c), 0.0)))


def _edge_lengths(cpx: SimplicialComplex) -> np.ndarray:
    e = cpx.simplices[1]
    return np.linalg.norm(cpx.coords[e[:, 1]] - cpx.coords[e[:, 0]], axis=1)


def build_hodge(cpx: SimplicialComplex, tol: float = 1e-14) -> HodgeStructure:
    """Circumcentric stars for a 1- or 2-dimensional complex with coordinates.

    Raises :class:`HodgeError` naming degenerate simplices or edges whose
    cotangent weight is not positive.
    """
    if cpx.coords is None:
        raise HodgeError("complex has no vertex coordinates")
    if cpx.dim not in (1, 2):
        raise HodgeError(f"Hodge stars are implemented for dimension 1 and 2, not {cpx.dim}")
    ell = _edge_lengths(cpx)
    bad = np.flatnonzero(ell <= tol)
    if bad.size:
        raise HodgeError(f"degenerate edges {cpx.simplices[1][bad[:5]].tolist()}")
    d = tuple(_sparse_d(cpx, p) for p in range(cpx.dim))
    if cpx.dim == 1:
        star0 = np.zeros(cpx.n_vertices)
        np.add.at(star0, cpx.simplices[1][:, 0], ell / 2)
        np.add.at(star0, cpx.simplices[1][:, 1], ell / 2)
        return HodgeStructure(cpx, (star0, 1.0 / ell), d)

    tri = cpx.simplices[2]
    faces = cpx.faces[2]
    X = cpx.coords[tri]
    # edge opposite vertex i of each triangle is faces[:, i]
    cot = np.zeros((len(tri), 3))
    area = np.zeros(len(tri))
    for i in range(3):
        a, b = X[:, (i + 1) % 3] - X[:, i], X[:, (i + 2) % 3] - X[:, i]
        dot = np.einsum("ij,ij->i", a, b)
        if X.shape[2] == 2:
            cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        else:
            cross = np.linalg.norm(np.cross(a, b), axis=1)
        area = cross / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            cot[:, i] = dot / cross
    bad = np.flatnonzero(area <= tol)
    if bad.size:
        raise HodgeError(f"degenerate triangles {tri[bad[:5]].tolist()}")
    star1 = np.zeros(cpx.n_simplices(1))
    for i in range(3):
        np.add.at(star1, faces[:, i], cot[:, i] / 2)
    bad = np.flatnonzero(star1 <= tol)
    if bad.size:
        raise HodgeError(
            f"non-positive cotangent weights on edges {cpx.simplices[1][bad[:5]].tolist()} "
            "(obtuse triangles)")
    L2 = ell[faces] ** 2
    star0 = np.zeros(cpx.n_vertices)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        # edge (i, j) is opposite k; edge (i, k) is opposite j
        share = (L2[:, k] * cot[:, k] + L2[:, j] * cot[:, j]) / 8
        np.add.at(star0, tri[:, i], share)
    bad = np.flatnonzero(star0 <= tol)
    if bad.size:
        raise HodgeError(f"non-positive dual areas at vertices {bad[:5].tolist()}")
    return HodgeStructure(cpx, (star0, star1, 1.0 / area), d)


# ----------------------------------------------------------------------------
# Harmonic Wilson form
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WilsonForm:
    """Closed, co-closed, boundary-tangential 1-form with period ``2πn``.

    ``cochain`` is exact and measured in turns; :attr:`radians` is the
    numeric form used for integration against fields.
    """

    cochain: Cochain
    n: int
    hodge: HodgeStructure = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def complex(self) -> SimplicialComplex:
        return self.cochain.complex

    @property
    def radians(self) -> Cochain:
        return self.cochain.to_float().scale(TWO_PI)

    def period(self, which: str = "inner") -> float:
        """``∮ Ω`` over a counter-clockwise boundary circle, in radians."""
        return TWO_PI * float(_boundary_period(self.cochain, which))


def _boundary_period(form: Cochain, which: str) -> Fraction:
    st = boundary_circle(form.complex, which)
    return integrate(form.restrict(st))


def _branch_cut(cpx: SimplicialComplex) -> np.ndarray:
    """Integer 1-cocycle with period one around the hole: the jump of the
    polar angle across the ray at angle 0."""
    ang = np.mod(np.arctan2(cpx.coords[:, 1], cpx.coords[:, 0]), TWO_PI)
    e = cpx.simplices[1]
    raw = ang[e[:, 1]] - ang[e[:, 0]]
    wrapped = np.mod(raw + np.pi, TWO_PI) - np.pi
    return np.rint((wrapped - raw) / TWO_PI).astype(np.int64)


def _triangle_fields(hodge: HodgeStructure, values: np.ndarray) -> np.ndarray:
    """Constant vector field per triangle whose edge circulations match a
    closed 1-cochain (least squares; exact when closed)."""
    cpx = hodge.complex
    tri = cpx.simplices[2]
    faces = cpx.faces[2]
    X = cpx.coords
    # face i is the edge opposite vertex i: tri[:, (i+1)%3] -> tri[:, (i+2)%3] in sorted order
    e0 = X[tri[:, 1]] - X[tri[:, 0]]
    e1 = X[tri[:, 2]] - X[tri[:, 0]]
    rhs0 = values[faces[:, 2]]
    rhs1 = values[faces[:, 1]]
    M = np.stack([e0, e1], axis=1)
    rhs = np.stack([rhs0, rhs1], axis=1)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def form_residuals(hodge: HodgeStructure, form: Cochain) -> dict:
    """Continuum-facing residuals of a 1-form on a planar annulus.

    ``coclosure``: length-weighted RMS jump of the normal component of the
    reconstructed field across interior edges.  ``tangentiality``: RMS
    normal component on boundary edges.  ``discrete_coclosure``: max of the
    discrete divergence ``d_0^T ⋆_1 Ω`` relative to dual areas.
    """
    cpx = hodge.complex
    vals = form.to_float().values * (TWO_PI if form.exact else 1.0)
    u = _triangle_fields(hodge, vals)
    e = cpx.simplices[1]
    tvec = cpx.coords[e[:, 1]] - cpx.coords[e[:, 0]]
    ell = np.linalg.norm(tvec, axis=1)
    normal = np.stack([tvec[:, 1], -tvec[:, 0]], axis=1) / ell[:, None]
    faces = cpx.faces[2]
    owner = [[] for _ in range(cpx.n_simplices(1))]
    for t, row in enumerate(faces):
        for g in row:
            owner[g].append(t)
    jump_sq, jump_w, tan_sq, tan_w = 0.0, 0.0, 0.0, 0.0
    for g, ts in enumerate(owner):
        if len(ts) == 2:
            j = float(np.dot(u[ts[0]] - u[ts[1]], normal[g]))
            jump_sq += ell[g] * j * j
            jump_w += ell[g]
        else:
            j = float(np.dot(u[ts[0]], normal[g]))
            tan_sq += ell[g] * j * j
            tan_w += ell[g]
    div = hodge.d[0].T @ (hodge.stars[1] * vals)
    closure = coboundary(form)
    return {
        "closure": float(closure.max_abs()) if closure.values.size else 0.0,
        "closure_exact": bool(closure.exact and closure.is_zero()),
        "coclosure": float(np.sqrt(jump_sq / jump_w)) if jump_w else 0.0,
        "tangentiality": float(np.sqrt(tan_sq / tan_w)) if tan_w else 0.0,
        "discrete_coclosure": float(np.max(np.abs(div / hodge.stars[0]))),
    }


def _check_annulus(cpx: SimplicialComplex):
    if cpx.kind != "annulus" or cpx.dim != 2 or cpx.coords is None:
        raise WilsonError(f"the Wilson form needs a flat annulus, got a {cpx.kind!r} complex")


def _unit_potential(hodge: HodgeStructure, z: np.ndarray, solver_tol: float) -> np.ndarray:
    L = hodge.laplacian0()
    b = -(hodge.d[0].T @ (hodge.stars[1] * z))
    # pin vertex 0; the Neumann system is singular only along constants
    keep = np.arange(1, L.shape[0])
    Lk = L[keep][:, keep].tocsc()
    f = np.zeros(L.shape[0])
    f[keep] = spla.spsolve(Lk, b[keep])
    res = float(np.linalg.norm(L @ f - b)) / max(1.0, float(np.linalg.norm(b)))
    if not np.isfinite(res) or res > solver_tol:
        raise WilsonError(f"harmonic solve did not converge (relative residual {res:.3g})")
    return f


def solve_harmonic_form(cpx: SimplicialComplex, n: int, hodge: HodgeStructure | None = None,
                        solver_tol: float = 1e-8) -> WilsonForm:
    """Energy-minimizing closed 1-form in the class of ``n`` times the
    generator, with zero normal flux through the boundary.

    The form is ``n (z + d f)`` with ``z`` the integer branch-cut cocycle and
    ``f`` the Neumann solution of ``Δf = −δz``, rounded to a dyadic grid so
    that closure and linearity in ``n`` hold exactly.
    """
    _check_annulus(cpx)
    n = int(n)
    hodge = hodge or build_hodge(cpx)
    cache = cpx.__dict__.setdefault("_wilson_cache", {})
    if "unit" not in cache:
        z = _branch_cut(cpx)
        f = _unit_potential(hodge, z.astype(float), solver_tol)
        q = 1 << QUANTUM_BITS
        fq = np.rint(f * q).astype(np.int64)
        unit = Cochain(cpx, 1, z * q + (fq[cpx.simplices[1][:, 1]] - fq[cpx.simplices[1][:, 0]]), q)
        cache["unit"] = unit.scale(1)
    form = cache["unit"].scale(n)
    diag = form_residuals(hodge, form)
    diag["period_inner"] = TWO_PI * float(_boundary_period(form, "inner"))
    diag["period_outer"] = TWO_PI * float(_boundary_period(form, "outer"))
    diag["h"] = float(_edge_lengths(cpx).max())
    return WilsonForm(form, n, hodge, diag)


def refinement_study(n: int, levels=(0, 1, 2), n_r: int = 2, n_theta: int = 16,
                     r_inner: float = 1.0, r_outer: float = 2.0) -> list[dict]:
    """Diagnostics of the Wilson form on successively doubled annuli."""
    out = []
    for lev in levels:
        cpx = annulus(n_r << lev, n_theta << lev, r_inner, r_outer)
        out.append({"level": int(lev), **solve_harmonic_form(cpx, n).diagnostics})
    return out


def wilson_line_value(a: Cochain, omega: WilsonForm, region=None) -> float:
    """``∫_R a ∧ Ω`` with the discrete cup product; ``region`` is a
    :class:`Subcomplex` of the annulus or ``None`` for all of it."""
    if a.degree != 1:
        raise WilsonError(f"the dressed field must be a 1-cochain, got degree {a.degree}")
    if a.complex is not omega.complex:
        raise WilsonError("field and Wilson form live on different complexes")
    if region is not None and not isinstance(region, Subcomplex):
        raise WilsonError("region must be a subcomplex of the annulus")
    return float(integrate(cup_product(a.to_float(), omega.radians), region))


__all__ = [
    "HodgeError", "WilsonError", "HodgeStructure", "WilsonForm", "build_hodge",
    "solve_harmonic_form", "wilson_line_value", "form_residuals", "refinement_study",
]
