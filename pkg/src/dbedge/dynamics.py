"""Boundary equations of motion, the quantization constraint, presymplectic
potential and charges of the dressed Maxwell theory with a Wilson line."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cohomology import _glue, _local_d, curvature
from .complex import (CechFamily, Cochain, GoodCover, SimplicialComplex, Subcomplex, boundary_circle,
                      coboundary, cup_product, integrate)
from .db import DBCochain
from .fields import (FieldError, FieldVariation, MinusOneGerbeConnection, U1Connection,
                     covariant_derivative, dress, winding_number)
from .wilson import WilsonForm, build_hodge

TWO_PI = 2 * np.pi


class QuantizationObstruction(ValueError):
    """``k`` does not divide ``p·n``: no edge mode can absorb the Wilson line."""

    def __init__(self, check: "QuantizationCheck"):
        self.check = check
        super().__init__(
            f"k={check.k} does not divide p*n={check.p * check.n}; "
            f"the required winding {check.winding} is not an integer")


@dataclass(frozen=True)
class QuantizationCheck:
    k: int
    p: int
    n: int
    feasible: bool
    winding: Fraction

    def to_json(self) -> dict:
        w = self.winding
        return {"k": self.k, "p": self.p, "n": self.n, "feasible": self.feasible,
                "winding": int(w) if w.denominator == 1 else str(w)}


def quantization_check(k: int, p: int, n: int) -> QuantizationCheck:
    """Winding ``w = pn/k`` forced by integrating the boundary equation of motion."""
    k, p, n = int(k), int(p), int(n)
    if k == 0:
        raise ValueError("the level k must be nonzero")
    w = Fraction(p * n, k)
    return QuantizationCheck(k, p, n, w.denominator == 1, w)


def _radians(c: Cochain) -> np.ndarray:
    """Exact cochains are in turns, numeric ones already in radians."""
    return c.to_float().values * TWO_PI if c.exact else np.asarray(c.values, dtype=float)


def _as_numeric(cpx: SimplicialComplex, degree: int, values: np.ndarray) -> Cochain:
    return Cochain(cpx, degree, np.asarray(values, dtype=float))


def _inner_circle_cover(cover: GoodCover) -> GoodCover:
    cache = cover.layout._cache
    if "inner_circle" not in cache:
        cache["inner_circle"] = cover.induced(boundary_circle(cover.complex, "inner"))
    return cache["inner_circle"]


# ----------------------------------------------------------------------------
# Dual edge mode
# ----------------------------------------------------------------------------


def _arc_primitive(circle_cover: GoodCover, form: Cochain) -> CechFamily:
    """Local primitives of a 1-form on a circle, one per chart (an arc),
    anchored so that overlaps differ by integers when the period is one."""
    cpx = circle_cover.complex
    n = cpx.n_vertices
    vals = form.fractions()
    step = []
    for v in range(n):
        w = (v + 1) % n
        g = cpx.index_of((v, w))
        step.append(vals[g] if v < w else -vals[g])
    prefix = [Fraction(0)]
    for s in step[:-1]:
        prefix.append(prefix[-1] + s)
    members = {}
    for i, ch in enumerate(circle_cover.charts):
        mask = ch.vertex_mask
        start = next(v for v in range(n) if mask[v] and not mask[(v - 1) % n])
        local = {start: prefix[start]}
        v = start
        while mask[(v + 1) % n] and (v + 1) % n != start:
            local[(v + 1) % n] = local[v] + step[v]
            v = (v + 1) % n
        members[(i,)] = [local[int(u)] for u in ch.simplices[0]]
    return CechFamily.from_members(circle_cover, 0, 0, members)


def solve_dual_edge_mode(k: int, p: int, n: int, omega: WilsonForm,
                         cover: GoodCover) -> tuple[MinusOneGerbeConnection, U1Connection]:
    """On-shell ``(φ̃, Ã)`` with ``Ã = 0`` and ``k dφ̃ = p Ω`` on the inner circle.

    ``cover`` covers the annulus carrying ``omega``; the edge mode lives on
    its trace on the inner boundary circle.
    """
    check = quantization_check(k, p, n)
    if not check.feasible:
        raise QuantizationObstruction(check)
    if cover.complex is not omega.complex:
        raise ValueError("cover and Wilson form live on different complexes")
    if omega.n != check.n:
        raise ValueError(f"Wilson form has level {omega.n}, expected {n}")
    sc = _inner_circle_cover(cover)
    target = omega.cochain.restrict(sc.complex).scale(Fraction(p, k))
    phi = _arc_primitive(sc, target)
    lay = sc.layout
    owner, gid = lay.entries(1, 0)
    jumps = []
    for e, sigma in enumerate(sc.nerve.level(1)):
        sel = np.flatnonzero(owner == e)
        i, j = sigma
        a = phi.values[lay._locate(0, 0, np.full(len(sel), i), gid[sel])]
        b = phi.values[lay._locate(0, 0, np.full(len(sel), j), gid[sel])]
        diff = set(int(x) for x in (b - a))
        if len(diff) != 1 or next(iter(diff)) % phi.denominator:
            raise FieldError(f"local primitives on overlap {sigma} do not differ by an integer")
        jumps.append(next(iter(diff)) // phi.denominator)
    x = DBCochain.from_layers(sc, 0, 0, {0: phi, 1: CechFamily(sc, 1, -1, np.array(jumps, dtype=np.int64))})
    edge = MinusOneGerbeConnection(x)
    dual = U1Connection(DBCochain.zeros(cover, 1, 1, exact=True))
    return edge, dual


# ----------------------------------------------------------------------------
# Boundary state and equations of motion
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryState:
    """Fields on the annulus slice ``Δ∩Σ`` and its inner circle ``∂Δ∩Σ``.

    ``a`` is the dressed bulk field on the annulus; its circle trace is
    :attr:`a_circle`.  ``star_F`` is supplied bulk data (or ``None``).
    ``boundary_sign`` fixes the relative orientation of the circle
    integrals (+1: counter-clockwise).
    """

    a: Cochain
    dual_connection: U1Connection
    dual_edge_mode: MinusOneGerbeConnection
    omega: WilsonForm
    k: int
    p: int
    n: int
    star_F: Cochain | None = None
    e2: float = 1.0
    boundary_sign: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k == 0:
            raise ValueError("the level k must be nonzero")
        ann = self.omega.complex
        if self.a.complex is not ann or self.a.degree != 1:
            raise FieldError("dressed field must be a 1-cochain on the Wilson form's annulus")
        if self.dual_connection.cover.complex is not ann:
            raise FieldError("dual connection must live on the annulus")
        if self.dual_edge_mode.cover.complex.parent is not ann:
            raise FieldError("dual edge mode must live on a boundary circle of the annulus")
        if self.star_F is not None and (self.star_F.complex is not ann or self.star_F.degree != 2):
            raise FieldError("supplied star F must be a 2-cochain on the annulus")
        if self.boundary_sign not in (1, -1):
            raise ValueError("boundary_sign must be +1 or -1")

    @property
    def annulus(self) -> SimplicialComplex:
        return self.omega.complex

    @property
    def circle(self) -> SimplicialComplex:
        return self.dual_edge_mode.cover.complex

    @property
    def a_circle(self) -> Cochain:
        return self.a.restrict(self.circle)

    def dual_dressed(self) -> Cochain:
        """``ã = dφ̃_i − Ã_i`` glued on the circle (turns if exact)."""
        A = self.dual_connection.restrict(self.dual_edge_mode.cover)
        D = covariant_derivative(self.dual_edge_mode, A)
        vals = _glue(D.cover, 1, D.layers[0], D.exact)
        return Cochain(self.circle, 1, vals, D.denominator)

    def dual_curvature(self) -> Cochain:
        return curvature(self.dual_connection.cochain)

    @classmethod
    def from_bulk(cls, A: U1Connection, phi: Cochain, **kw) -> "BoundaryState":
        """Dress a global bulk connection ``A`` with the edge mode ``φ``."""
        return cls(a=dress(A, phi), **kw)


@dataclass(frozen=True)
class EOMReport:
    duality: float | None
    eom_omega: float
    flatness: float
    maxwell: float | None
    feasible: bool
    winding: int
    required_winding: Fraction

    @property
    def max_residual(self) -> float:
        vals = [v for v in (self.duality, self.eom_omega, self.flatness, self.maxwell) if v is not None]
        return max(vals) if vals else 0.0

    def to_json(self) -> dict:
        w = self.required_winding
        return {
            "duality": self.duality, "duality_evaluated": self.duality is not None,
            "eom_omega": self.eom_omega, "flatness": self.flatness,
            "maxwell": self.maxwell, "maxwell_evaluated": self.maxwell is not None,
            "feasible": self.feasible, "winding": self.winding,
            "required_winding": int(w) if w.denominator == 1 else str(w),
        }


def _hodge(cpx: SimplicialComplex):
    cache = cpx.__dict__.setdefault("_hodge_cache", {})
    if "h" not in cache:
        cache["h"] = build_hodge(cpx)
    return cache["h"]


def _l2(cpx: SimplicialComplex, degree: int, values: np.ndarray) -> float:
    h = _hodge(cpx)
    return float(np.sqrt(np.sum(h.stars[degree] * values * values)))


def eom_residuals(state: BoundaryState) -> EOMReport:
    """L² residuals of the boundary equations of motion.

    ``duality``: ``⋆F − e² (k/2π) dÃ`` on the annulus (``None`` without
    supplied bulk data).  ``eom_omega``: ``(k/2π) ã − (p/2π) Ω`` on the
    circle.  ``flatness``: ``F = −da`` on the annulus.
    """
    k, p = state.k, state.p
    dA = _radians(state.dual_curvature())
    duality = None
    if state.star_F is not None:
        duality = _l2(state.annulus, 2, _radians(state.star_F) - state.e2 * k / TWO_PI * dA)
    at = state.dual_dressed()
    om = state.omega.cochain.restrict(state.circle)
    if at.exact and om.exact:
        diff = at.scale(k) - om.scale(p)
        r = _l2(state.circle, 1, diff.to_float().values)
    else:
        r = _l2(state.circle, 1, (k * _radians(at) - p * _radians(om)) / TWO_PI)
    da = coboundary(state.a)
    flat = _l2(state.annulus, 2, _radians(da))
    check = quantization_check(k, p, state.n)
    return EOMReport(duality, r, flat, None, check.feasible,
                     winding_number(state.dual_edge_mode), check.winding)


def on_shell_state(k: int, p: int, n: int, omega: WilsonForm, cover: GoodCover,
                   a: Cochain | None = None, e2: float = 1.0) -> BoundaryState:
    """State built from :func:`solve_dual_edge_mode` with matching bulk data
    ``⋆F := e² (k/2π) dÃ``."""
    edge, dual = solve_dual_edge_mode(k, p, n, omega, cover)
    ann = omega.complex
    if a is None:
        a = Cochain.zeros(ann, 1, exact=True)
    star_F = _as_numeric(ann, 2, e2 * k / TWO_PI * _radians(curvature(dual.cochain)))
    return BoundaryState(a, dual, edge, omega, k, p, n, star_F=star_F, e2=e2)


# ----------------------------------------------------------------------------
# Charges
# ----------------------------------------------------------------------------


def chart_functions(cover: GoodCover, func, winding: int = 0) -> CechFamily:
    """Local functions ``func(θ) + w·θ_i`` on a circle cover, where ``θ_i``
    is the polar angle lifted continuously along chart ``i``."""
    cpx = cover.complex
    ang = np.arctan2(cpx.coords[:, 1], cpx.coords[:, 0])
    base = np.asarray(func(ang), dtype=float) if func is not None else np.zeros(len(ang))
    n = cpx.n_vertices
    members = {}
    for i, ch in enumerate(cover.charts):
        mask = ch.vertex_mask
        start = next(v for v in range(n) if mask[v] and not mask[(v - 1) % n])
        lifted = {start: ang[start]}
        v = start
        while mask[(v + 1) % n] and (v + 1) % n != start:
            u = (v + 1) % n
            lifted[u] = lifted[v] + (np.mod(ang[u] - ang[v] + np.pi, TWO_PI) - np.pi)
            v = u
        members[(i,)] = [float(base[u] + winding * lifted[int(u)]) for u in ch.simplices[0]]
    return CechFamily.from_members(cover, 0, 0, members)


def _chart_values(cover: GoodCover, alpha_t) -> list[np.ndarray]:
    """Per-chart vertex values (radians) of chart functions ``α̃_i``."""
    if isinstance(alpha_t, MinusOneGerbeConnection):
        alpha_t = alpha_t.cochain.layer(0)
    if isinstance(alpha_t, Cochain):
        if alpha_t.degree != 0 or alpha_t.complex is not cover.complex:
            raise FieldError("global smearing function must be a 0-cochain on the circle")
        fam = CechFamily.restrict_global(alpha_t, cover, 0)
    elif isinstance(alpha_t, CechFamily):
        fam = alpha_t
    else:
        raise FieldError("chart functions must be a CechFamily, an edge mode or a global 0-cochain")
    if (fam.q, fam.p) != (0, 0) or fam.cover is not cover:
        raise FieldError("chart functions must be local 0-cochains on the circle cover")
    vals = np.array([int(v) for v in fam.values], dtype=float) * TWO_PI / fam.denominator \
        if fam.denominator is not None else np.asarray(fam.values, dtype=float)
    out = []
    for i in range(cover.n_charts):
        full = np.zeros(cover.complex.n_vertices)
        full[cover.charts[i].simplices[0]] = vals[cover.layout.segment(0, 0, (i,))]
        out.append(full)
    return out


def electric_charge(alpha: Cochain, dual_connection: U1Connection, k: int,
                    region: Subcomplex | None = None) -> float:
    """``Q^E = (k/2π) ∫ α ∧ dÃ`` over the annulus slice."""
    if alpha.degree != 0:
        raise ValueError(f"electric smearing function must be a 0-cochain, got degree {alpha.degree}")
    F = curvature(dual_connection.cochain)
    if alpha.complex is not F.complex:
        raise ValueError("smearing function and connection live on different complexes")
    a = _as_numeric(alpha.complex, 0, _radians(alpha))
    f = _as_numeric(F.complex, 2, _radians(F))
    return k / TWO_PI * float(integrate(cup_product(a, f), region))


def magnetic_charges(a: Cochain, alpha_t, k: int, cover: GoodCover,
                     boundary_sign: int = 1) -> np.ndarray:
    """Per-chart ``Q^M_i = (k/2π) ∫ a ∧ ρ_i α̃_i`` on the circle.

    ``ρ_i`` is the vertex partition of unity of ``cover``; the charges sum to
    the global value whenever the ``α̃_i`` agree.
    """
    if a.degree != 1 or a.complex is not cover.complex:
        raise ValueError("dressed field must be a 1-cochain on the covered circle")
    av = _as_numeric(a.complex, 1, _radians(a))
    rho = cover.partition_of_unity(0)
    out = np.zeros(cover.n_charts)
    for i, vals in enumerate(_chart_values(cover, alpha_t)):
        w = np.array([float(r) for r in rho[i]]) * vals
        out[i] = k / TWO_PI * float(integrate(cup_product(av, _as_numeric(a.complex, 0, w))))
    return boundary_sign * out


def _glued_differential(cover: GoodCover, alpha_t) -> np.ndarray:
    """``dα̃_i`` glued to a global 1-form (radians); fails unless jumps are constant."""
    parts = _chart_values(cover, alpha_t)
    local = np.concatenate([parts[i][cover.charts[i].simplices[0]] for i in range(cover.n_charts)])
    d = _local_d(cover, 0, 0, local)
    try:
        return _glue(cover, 1, d, exact=False)
    except ValueError:
        raise FieldError("dα̃_i do not glue: the jumps of α̃ are not constant") from None


def charge_bracket(alpha: Cochain, alpha_t, k: int, cover: GoodCover | None = None) -> float:
    """``{Q^E, Q^M} = −(k/2π) ∫ α ∧ dα̃`` on the circle.

    ``alpha_t`` is a global 0-cochain, a :class:`CechFamily` of chart
    functions or an edge mode; ``cover`` is required for the latter two.
    """
    if alpha.degree != 0:
        raise ValueError("α must be a 0-cochain")
    cpx = alpha.complex
    if isinstance(alpha_t, Cochain) and cover is None:
        if alpha_t.complex is not cpx or alpha_t.degree != 0:
            raise ValueError("α̃ must be a 0-cochain on the same circle")
        dat = _radians(coboundary(alpha_t))
    else:
        cover = cover or getattr(alpha_t, "cover", None)
        if cover is None or cover.complex is not cpx:
            raise ValueError("chart functions need the circle cover")
        dat = _glued_differential(cover, alpha_t)
    a = _as_numeric(cpx, 0, _radians(alpha))
    return -k / TWO_PI * float(integrate(cup_product(a, _as_numeric(cpx, 1, dat)))) + 0.0


def scalar_two_form_charge(alpha: Cochain, psi: Cochain) -> float:
    """``Q = ∫ α ∧ dψ`` over a closed surface."""
    if alpha.degree != 1 or psi.degree != 0:
        raise ValueError("need a 1-cochain α and a 0-cochain ψ")
    if alpha.complex is not psi.complex:
        raise ValueError("α and ψ live on different complexes")
    if alpha.exact and psi.exact:
        return float(integrate(cup_product(alpha, coboundary(psi))))
    return float(integrate(cup_product(alpha.to_float(), coboundary(psi.to_float()))))


# ----------------------------------------------------------------------------
# Presymplectic potential
# ----------------------------------------------------------------------------


def theta_terms(state: BoundaryState, var: FieldVariation, tol: float = 1e-8) -> dict:
    """Individual terms of the presymplectic potential contracted with ``var``.

    Directions: ``phi`` (0-cochain on the annulus), ``dual_A`` (1-cochain on
    the annulus) and ``dual_phi`` (global 0-cochain on the circle, or chart
    functions giving one value per chart).  Off shell the two terms that
    cancel by the boundary equation are kept.
    """
    unknown = set(var.directions) - {"phi", "dual_A", "dual_phi"}
    if unknown:
        raise FieldError(f"unsupported variation directions {sorted(unknown)}")
    k, p, s = state.k, state.p, state.boundary_sign
    ann, circ = state.annulus, state.circle
    report = eom_residuals(state)
    on_shell = report.eom_omega <= tol
    terms = {}
    dphi = var.get("phi")
    if dphi is not None:
        if dphi.complex is not ann or dphi.degree != 0:
            raise FieldError("δφ must be a 0-cochain on the annulus")
        terms["phi_dA"] = electric_charge(dphi, state.dual_connection, k)
        if not on_shell:
            phc = _as_numeric(circ, 0, _radians(dphi.restrict(circ)))
            at = _as_numeric(circ, 1, _radians(state.dual_dressed()))
            om = _as_numeric(circ, 1, _radians(state.omega.cochain.restrict(circ)))
            terms["phi_at"] = -s * k / TWO_PI * float(integrate(cup_product(phc, at)))
            terms["phi_omega"] = s * p / TWO_PI * float(integrate(cup_product(phc, om)))
    dA = var.get("dual_A")
    if dA is not None:
        if dA.complex is not ann or dA.degree != 1:
            raise FieldError("δÃ must be a 1-cochain on the annulus")
        a = _as_numeric(ann, 1, _radians(state.a))
        terms["a_dAt"] = -k / TWO_PI * float(integrate(cup_product(a, _as_numeric(ann, 1, _radians(dA)))))
    dpt = var.get("dual_phi")
    if dpt is not None:
        if isinstance(dpt, Cochain) and dpt.complex is not circ:
            raise FieldError("δφ̃ must live on the boundary circle")
        q = magnetic_charges(state.a_circle, dpt, k, state.dual_edge_mode.cover, s)
        terms["a_dphit"] = float(q.sum()) if isinstance(dpt, Cochain) else q
    return {"on_shell": on_shell, "terms": terms}


def presymplectic_potential(state: BoundaryState, var: FieldVariation, tol: float = 1e-8):
    """``θ(var)``: a float, or one value per chart when ``dual_phi`` is given
    as chart functions."""
    out = theta_terms(state, var, tol)["terms"]
    total = 0.0
    for v in out.values():
        total = total + v
    return total


__all__ = [
    "QuantizationObstruction", "QuantizationCheck", "quantization_check", "solve_dual_edge_mode",
    "BoundaryState", "EOMReport", "eom_residuals", "on_shell_state", "electric_charge",
    "magnetic_charges", "charge_bracket", "chart_functions", "scalar_two_form_charge", "theta_terms",
    "presymplectic_potential",
]
