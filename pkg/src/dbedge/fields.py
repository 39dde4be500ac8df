"""Connections, edge modes, dressing and the morphisms between extended fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cohomology import (IntegerClass, _cech, _inject, _local_d, arc_decomposition, homotopy,
                         integral_cohomology, nerve_homology_basis, solve_integer)
from .complex import CechFamily, Cochain, GoodCover, coboundary
from .db import DBCochain, gauge_transform, is_cocycle, restrict_to_stratum


class FieldError(ValueError):
    pass


def _check_cocycle(x: DBCochain, what: str, tol: float = 1e-9):
    ok, res = is_cocycle(x, tol)
    if not ok:
        raise FieldError(f"{what} violates its cocycle condition (residual {res:.3g})")


@dataclass(frozen=True, eq=False)
class U1Connection:
    """DB 1-cocycle ``(A_i, Λ_ij, n_ijk)``."""

    cochain: DBCochain

    def __post_init__(self):
        x = self.cochain
        if (x.k, x.l) != (1, 1):
            raise FieldError("a U(1) connection is a DB cochain with k = l = 1")
        _check_cocycle(x, "connection")

    @property
    def cover(self) -> GoodCover:
        return self.cochain.cover

    @property
    def is_global(self) -> bool:
        """True when all transition layers vanish."""
        return all(not np.any(a) for a in self.cochain.layers[1:])

    @classmethod
    def from_global(cls, cover: GoodCover, A: Cochain) -> "U1Connection":
        fam = CechFamily.restrict_global(A, cover, 0)
        if not A.exact:
            fam = CechFamily(cover, 0, 1, np.asarray(fam.values, dtype=float), None)
        return cls(DBCochain.from_layers(cover, 1, 1, {0: fam}))

    def global_form(self) -> Cochain:
        """The glued 1-form of a global connection."""
        if not self.is_global:
            raise FieldError("connection has nontrivial transition data")
        from .cohomology import _glue
        x = self.cochain
        vals = _glue(self.cover, 1, x.layers[0], x.exact)
        return Cochain(self.cover.complex, 1, vals, x.denominator)

    def restrict(self, stratum_cover: GoodCover) -> "U1Connection":
        return U1Connection(restrict_to_stratum(self.cochain, stratum_cover))


@dataclass(frozen=True, eq=False)
class MinusOneGerbeConnection:
    """DB 0-cocycle ``(φ_i, m_ij)`` with ``φ_i − φ_j = −m_ij`` (in units of 2π)."""

    cochain: DBCochain

    def __post_init__(self):
        x = self.cochain
        if (x.k, x.l) != (0, 0):
            raise FieldError("a (-1)-gerbe connection is a DB cochain with k = l = 0")
        _check_cocycle(x, "edge mode")

    @property
    def cover(self) -> GoodCover:
        return self.cochain.cover

    @property
    def jumps(self) -> np.ndarray:
        return self.cochain.layers[1]

    @property
    def is_global(self) -> bool:
        return not np.any(self.jumps)

    @classmethod
    def from_global(cls, cover: GoodCover, f: Cochain) -> "MinusOneGerbeConnection":
        fam = CechFamily.restrict_global(f, cover, 0)
        if not f.exact:
            fam = CechFamily(cover, 0, 0, np.asarray(fam.values, dtype=float), None)
        return cls(DBCochain.from_layers(cover, 0, 0, {0: fam}))

    @classmethod
    def from_jumps(cls, cover: GoodCover, jumps, base: Cochain | None = None) -> "MinusOneGerbeConnection":
        """Edge mode with prescribed integer jumps ``m_ij`` (one per nerve
        edge, an integer Čech cocycle).

        Local functions are ``φ = −K m`` (partition-of-unity contraction of
        the injected jumps) plus an optional global ``base``.
        """
        m = np.array([int(v) for v in jumps], dtype=np.int64)
        if len(m) != cover.nerve.n_simplices(1):
            raise FieldError("need one jump per nerve edge")
        if cover.nerve.n_simplices(2) and np.any(_cech(cover, 1, -1, m)):
            raise FieldError("jumps are not a Čech cocycle")
        own, _ = cover.layout.entries(1, 0)
        vals, den = homotopy(cover, 1, 0, _inject(m, 1)[own], 1)
        fam = CechFamily(cover, 0, 0, -vals, den)
        x = DBCochain.from_layers(cover, 0, 0, {0: fam, 1: CechFamily(cover, 1, -1, m)})
        if base is not None:
            g = cls.from_global(cover, base).cochain
            x, g = _same_db_mode(x, g)
            x = x + g
        return cls(x)

    def restrict(self, stratum_cover: GoodCover) -> "MinusOneGerbeConnection":
        return MinusOneGerbeConnection(restrict_to_stratum(self.cochain, stratum_cover))


@dataclass(frozen=True, eq=False)
class ExtendedField:
    """A bulk connection together with a boundary edge mode on a stratum.

    ``connection`` lives on the bulk cover; ``edge_mode`` on the induced cover
    of the stratum.  A global edge mode is stored with zero jumps.
    """

    connection: U1Connection
    edge_mode: MinusOneGerbeConnection

    def __post_init__(self):
        sc = self.edge_mode.cover.complex
        if sc.parent is not self.connection.cover.complex:
            raise FieldError("edge mode does not live on a stratum of the connection's complex")


@dataclass(frozen=True, eq=False)
class FieldVariation:
    """Variation directions: global cochains keyed by field name.

    DB-valued entries must have vanishing integer layers, since a variation
    never changes the gerbe class.
    """

    directions: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, v in self.directions.items():
            if isinstance(v, DBCochain):
                ints = v.integer_layer()
                if ints is not None and np.any(ints):
                    raise FieldError(f"variation of {name!r} changes integer data")

    def get(self, name: str):
        return self.directions.get(name)

    @property
    def is_zero(self) -> bool:
        for v in self.directions.values():
            if isinstance(v, DBCochain):
                if not v.is_zero():
                    return False
            elif isinstance(v, Cochain):
                if not v.is_zero():
                    return False
            else:
                if any(not c.is_zero() for c in v):
                    return False
        return True


# ----------------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------------


def _same_mode(a: Cochain, b: Cochain):
    if a.exact == b.exact:
        return a, b
    return a.to_float(), b.to_float()


def dress(A, phi: Cochain) -> Cochain:
    """Dressed photon ``a = dφ − A`` for a global connection."""
    if isinstance(A, U1Connection):
        A = A.global_form()
    elif isinstance(A, DBCochain):
        A = U1Connection(A).global_form()
    if A.complex is not phi.complex:
        raise FieldError("connection and edge mode live on different complexes")
    dphi, A = _same_mode(coboundary(phi), A)
    return dphi - A


def covariant_derivative(phi: MinusOneGerbeConnection, A: U1Connection) -> DBCochain:
    """``(dφ_i − A_i, −Λ_ij, −n_ijk)`` on a shared cover."""
    if phi.cover is not A.cover:
        raise FieldError("edge mode and connection must share a cover")
    x, y = phi.cochain, A.cochain
    if x.exact != y.exact:
        x, y = x.to_float(), y.to_float()
    cover = x.cover
    dphi = _local_d(cover, 0, 0, x.layers[0])
    top = CechFamily(cover, 0, 1, dphi, x.denominator)
    lifted = DBCochain.from_layers(cover, 1, 1, {0: top})
    if lifted.exact != y.exact:
        lifted = lifted.to_float()
    return lifted - y


def dressed_field(phi: MinusOneGerbeConnection, A: U1Connection) -> Cochain:
    """The global gauge-invariant 1-form ``ã = dφ_i − A`` for global ``A``."""
    if not A.is_global:
        raise FieldError("the dressed field glues only for a global connection")
    from .cohomology import _glue
    D = covariant_derivative(phi, A)
    vals = _glue(D.cover, 1, D.layers[0], D.exact)
    return Cochain(D.cover.complex, 1, vals, D.denominator)


def _transition_cycle(cover: GoodCover) -> np.ndarray:
    """Nerve 1-chain traced by the ccw walk's chart transitions."""
    arcs = arc_decomposition(cover)
    z = np.zeros(cover.nerve.n_simplices(1), dtype=np.int64)
    level = cover.nerve.level(1)
    for _, a, b in arcs.transitions:
        key = (min(a, b), max(a, b))
        z[level.index(key)] += 1 if a < b else -1
    return z


def winding_number(phi: MinusOneGerbeConnection) -> int:
    """``w`` with ``2πw = ∫ dφ = −Σ m`` along the ccw walk around the circle."""
    z = _transition_cycle(phi.cover)
    return -int(sum(int(a) * int(b) for a, b in zip(z, phi.jumps)))


def arc_integral(phi: MinusOneGerbeConnection):
    """``∫ dφ`` summed chart by chart along the ccw arcs (turns if exact)."""
    arcs = arc_decomposition(phi.cover)
    x = phi.cochain
    dphi = _local_d(x.cover, 0, 0, x.layers[0])
    pos = x.cover.layout._locate(0, 1, np.array(arcs.edge_chart, dtype=np.int64), arcs.edge_index)
    vals = dphi[pos] * arcs.edge_sign
    if x.exact:
        return Fraction(sum(int(v) for v in vals), x.denominator)
    return float(np.sum(vals))


def gerbe_class(phi: MinusOneGerbeConnection) -> IntegerClass:
    """Čech class of the jumps in ``H^1(stratum; Z)``.

    On a circle the single coordinate is the winding number.
    """
    cover, m = phi.cover, phi.jumps
    nerve = cover.nerve
    if cover.complex.kind == "circle" and cover.complex.dim == 1:
        z = _transition_cycle(cover)
        coords = (-int(sum(int(a) * int(b) for a, b in zip(z, m))),)
    else:
        gens, _ = nerve_homology_basis(cover, 1)
        coords = tuple(-int(sum(int(a) * int(b) for a, b in zip(gens[:, j], m)))
                       for j in range(gens.shape[1]))
    trivial = solve_integer(nerve.cech_matrix(0), m) is not None
    return IntegerClass(tuple(int(v) for v in m), 1, coords, integral_cohomology(nerve, 1), trivial)


def as_gauge_parameter(eps: DBCochain) -> DBCochain:
    """View a DB 0-cochain ``(ε_i, m_ij)`` as a k = 1 gauge parameter."""
    if (eps.k, eps.l) != (0, 0):
        raise FieldError("expected a DB 0-cochain with k = 0")
    return DBCochain(eps.cover, 1, 0, eps.layers, eps.denominator)


def transform_extended(src: ExtendedField, eps: DBCochain) -> ExtendedField:
    """Apply ``ε ∈ Z⁰_DB``: ``Ã → Ã + Dε``, ``φ̃ → φ̃ + ε|``."""
    conn, q = _same_db_mode(src.connection.cochain, as_gauge_parameter(eps))
    conn = gauge_transform(conn, q)
    edge, shift = _same_db_mode(src.edge_mode.cochain, restrict_to_stratum(eps, src.edge_mode.cover))
    edge = edge + shift
    return ExtendedField(U1Connection(conn), MinusOneGerbeConnection(edge))


def _same_db_mode(a: DBCochain, b: DBCochain):
    if a.exact == b.exact:
        return a, b
    return a.to_float(), b.to_float()


def _agree(a: DBCochain, b: DBCochain, tol: float) -> bool:
    if a.exact != b.exact:
        a, b = a.to_float(), b.to_float()
        tol = tol or 1e-9
    return a.equals(b, tol)


def is_morphism(src: ExtendedField, dst: ExtendedField, eps: DBCochain, tol: float = 0.0) -> bool:
    """Whether ``ε`` maps ``src`` to ``dst`` in the groupoid of extended fields."""
    if src.connection.cover is not dst.connection.cover or eps.cover is not src.connection.cover:
        return False
    if (eps.k, eps.l) != (0, 0):
        return False
    ok, _ = is_cocycle(eps, tol if tol else 1e-9)
    if not ok:
        return False
    moved = transform_extended(src, eps)
    return (_agree(moved.connection.cochain, dst.connection.cochain, tol)
            and _agree(moved.edge_mode.cochain, dst.edge_mode.cochain, tol))


def random_zero_cocycle(cover: GoodCover, rng: np.random.Generator, jump_range: int = 2,
                        with_jumps: bool = True) -> DBCochain:
    """Random exact element of ``Z⁰_DB``: a global rational function plus
    local functions carrying random integer-cocycle jumps."""
    n = cover.complex.n_vertices
    g = Cochain.from_fractions(cover.complex, 0,
                               [Fraction(int(a), 6) for a in rng.integers(-9, 10, n)])
    if with_jumps:
        nv = cover.nerve.n_simplices(0)
        t = rng.integers(-jump_range, jump_range + 1, nv)
        m = _cech(cover, 0, -1, t.astype(np.int64))
        if cover.complex.kind == "circle":
            m = m.copy()
            m[0] += int(rng.integers(-jump_range, jump_range + 1))
        else:
            _, coc = nerve_homology_basis(cover, 1)
            for j in range(coc.shape[1]):
                m = m + int(rng.integers(-jump_range, jump_range + 1)) * coc[:, j].astype(np.int64)
    else:
        m = np.zeros(cover.nerve.n_simplices(1), dtype=np.int64)
    return MinusOneGerbeConnection.from_jumps(cover, m, base=g).cochain


__all__ = [
    "FieldError", "U1Connection", "MinusOneGerbeConnection", "ExtendedField", "FieldVariation",
    "dress", "covariant_derivative", "dressed_field", "winding_number", "arc_integral",
    "gerbe_class", "is_morphism", "transform_extended", "as_gauge_parameter",
    "random_zero_cocycle",
]
