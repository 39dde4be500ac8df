"""Simplicial complexes, good covers, nerves and exact cochain calculus.

Cochains come in two arithmetic modes:

* exact: integer numerators (``int64`` or Python ints in an object array)
  over one positive common ``denominator``;
* numeric: ``float64`` values, ``denominator`` is ``None``.

Every operation keeps the mode of its inputs.  Structural identities
(d∘d = 0, Stokes, Čech nilpotency) are checked in exact mode; metric and
Hodge operations run in numeric mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class InvalidParameterError(ValueError):
    """Raised when a builder gets parameters outside its valid range."""


class CoverError(ValueError):
    """Raised when no valid good cover can be built."""


# ----------------------------------------------------------------------------
# Simplicial complex
# ----------------------------------------------------------------------------


def _sorted_rows(a: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return a
    a = np.sort(a, axis=1)
    order = np.lexsort(a.T[::-1])
    a = a[order]
    keep = np.ones(len(a), dtype=bool)
    keep[1:] = np.any(a[1:] != a[:-1], axis=1)
    return a[keep]


def _row_lookup(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of each row of ``rows`` in the lexicographically sorted ``table``."""
    if rows.size == 0:
        return np.zeros(rows.shape[:1], dtype=np.int64)
    n_v = int(max(table.max(), rows.max())) + 1
    weights = n_v ** np.arange(table.shape[1] - 1, -1, -1, dtype=np.int64)
    tkeys = table @ weights
    rkeys = rows @ weights
    pos = np.searchsorted(tkeys, rkeys)
    pos = np.minimum(pos, len(tkeys) - 1)
    if not np.all(tkeys[pos] == rkeys):
        raise KeyError("face missing from complex")
    return pos


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """An oriented simplicial complex.

    Simplices of each dimension are stored as lexicographically sorted rows
    of increasing vertex indices; the induced orientation of a simplex is the
    one given by its vertex order. ``orientation`` holds, for each top
    simplex, its sign relative to the ambient orientation of the manifold.

    Attributes:
        simplices: tuple indexed by dimension of ``(n_p, p + 1)`` int arrays.
        orientation: ``±1`` per top simplex.
        coords: vertex coordinates, or ``None`` for purely combinatorial use.
        kind: builder name (``circle``, ``annulus``, ...), used by covers.
        meta: builder-specific data (ring/angle indices, coarse weights).
        parent: complex this one is embedded in, if it is a stratum.
        embedding: per dimension, index of each simplex in ``parent``.
    """

    simplices: tuple
    orientation: np.ndarray
    coords: np.ndarray | None = None
    kind: str = "generic"
    meta: dict = field(default_factory=dict)
    parent: "SimplicialComplex | None" = None
    embedding: tuple | None = None

    @classmethod
    def from_top_simplices(cls, tops, coords=None, orientation=None, kind="generic",
                           meta=None, parent=None, parent_vertices=None):
        """Build a complex from its top simplices, adding every face.

        If ``orientation`` is ``None`` the signs are taken from the row order
        given in ``tops``: +1 when sorting the row is an even permutation.
        """
        tops = np.asarray(tops, dtype=np.int64)
        dim = tops.shape[1] - 1
        if orientation is None:
            orientation = np.array([_perm_sign(row) for row in tops], dtype=np.int8)
            order = np.lexsort(np.sort(tops, axis=1).T[::-1])
            orientation = orientation[order]
        tops_sorted = _sorted_rows(tops)
        if len(tops_sorted) != len(tops):
            raise InvalidParameterError("duplicate top simplices")
        levels = [None] * (dim + 1)
        levels[dim] = tops_sorted
        for p in range(dim - 1, -1, -1):
            faces = [np.delete(levels[p + 1], i, axis=1) for i in range(p + 2)]
            levels[p] = _sorted_rows(np.concatenate(faces))
        if coords is not None:
            coords = np.asarray(coords, dtype=float)
            coords.setflags(write=False)
        for lev in levels:
            lev.setflags(write=False)
        orientation = np.asarray(orientation, dtype=np.int8)
        orientation.setflags(write=False)
        embedding = None
        if parent is not None:
            vmap = np.asarray(parent_vertices, dtype=np.int64)
            embedding = tuple(
                _row_lookup(parent.simplices[p], np.sort(vmap[levels[p]], axis=1))
                for p in range(dim + 1))
        return cls(tuple(levels), orientation, coords, kind, dict(meta or {}),
                   parent, embedding)

    @property
    def dim(self) -> int:
        return len(self.simplices) - 1

    def n_simplices(self, p: int) -> int:
        if p < 0 or p > self.dim:
            return 0
        return len(self.simplices[p])

    @property
    def n_vertices(self) -> int:
        return self.n_simplices(0)

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * self.n_simplices(p) for p in range(self.dim + 1))

    @cached_property
    def faces(self) -> tuple:
        """``faces[p][s, i]`` is the index of the face of p-simplex ``s``
        opposite its ``i``-th vertex (sign ``(-1)**i``)."""
        out = [np.zeros((self.n_vertices, 0), dtype=np.int64)]
        for p in range(1, self.dim + 1):
            s = self.simplices[p]
            cols = [_row_lookup(self.simplices[p - 1], np.delete(s, i, axis=1))
                    for i in range(p + 1)]
            arr = np.stack(cols, axis=1)
            arr.setflags(write=False)
            out.append(arr)
        return tuple(out)

    def index_of(self, simplex: Sequence[int]) -> int:
        row = np.array([sorted(simplex)], dtype=np.int64)
        return int(_row_lookup(self.simplices[len(simplex) - 1], row)[0])

    def boundary_matrix(self, p: int) -> np.ndarray:
        """Dense integer matrix of ∂_p : C_p → C_{p-1}."""
        m = np.zeros((self.n_simplices(p - 1), self.n_simplices(p)), dtype=np.int64)
        if 1 <= p <= self.dim:
            f = self.faces[p]
            cols = np.arange(len(f))
            for i in range(p + 1):
                m[f[:, i], cols] += (-1) ** i
        return m

    def coboundary_matrix(self, p: int) -> np.ndarray:
        """Dense integer matrix of d : C^p → C^{p+1} (transpose of ∂_{p+1})."""
        return self.boundary_matrix(p + 1).T.copy()

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Indices of codimension-1 simplices with exactly one coface."""
        if self.dim < 1:
            return np.zeros(0, dtype=np.int64)
        counts = np.bincount(self.faces[self.dim].ravel(),
                             minlength=self.n_simplices(self.dim - 1))
        return np.flatnonzero(counts == 1)

    def fundamental_chain(self) -> "Chain":
        return Chain(self, self.dim, self.orientation.astype(np.int64))

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if a structural invariant fails."""
        for p in range(2, self.dim + 1):
            prod = self.boundary_matrix(p - 1) @ self.boundary_matrix(p)
            assert not prod.any(), "boundary of boundary is nonzero"
        assert set(np.unique(self.orientation)) <= {-1, 1}
        assert len(self.orientation) == self.n_simplices(self.dim)

    def to_json(self) -> dict:
        data = {
            "kind": self.kind,
            "dim": self.dim,
            "simplices": [lev.tolist() for lev in self.simplices],
            "orientation": self.orientation.tolist(),
        }
        if self.coords is not None:
            data["coords"] = self.coords.tolist()
        return data

    @classmethod
    def from_json(cls, data: dict) -> "SimplicialComplex":
        tops = np.array(data["simplices"][data["dim"]], dtype=np.int64)
        cpx = cls.from_top_simplices(tops, data.get("coords"),
                                     orientation=data["orientation"], kind=data["kind"])
        for p, lev in enumerate(data["simplices"]):
            if not np.array_equal(cpx.simplices[p], np.array(lev, dtype=np.int64).reshape(-1, p + 1)):
                raise ValueError(f"serialized {p}-simplices are not closed under faces")
        return cpx


def _perm_sign(row: Sequence[int]) -> int:
    row = list(row)
    sign = 1
    for i in range(len(row)):
        for j in range(i + 1, len(row)):
            if row[i] > row[j]:
                sign = -sign
    return sign


# ----------------------------------------------------------------------------
# Builders
# ----------------------------------------------------------------------------


def _orient_planar(tops: np.ndarray, coords: np.ndarray) -> np.ndarray:
    s = np.sort(tops, axis=1)
    p0, p1, p2 = coords[s[:, 0]], coords[s[:, 1]], coords[s[:, 2]]
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    if np.any(np.abs(det) < 1e-14):
        raise InvalidParameterError("degenerate triangle in planar mesh")
    order = np.lexsort(s.T[::-1])
    return np.sign(det[order]).astype(np.int8)


def circle(n: int, radius: float = 1.0) -> SimplicialComplex:
    if n < 3:
        raise InvalidParameterError(f"circle needs at least 3 vertices, got {n}")
    ang = 2 * np.pi * np.arange(n) / n
    coords = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # counter-clockwise edges k -> k+1
    tops = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return SimplicialComplex.from_top_simplices(
        tops, coords, kind="circle",
        meta={"n": n, "radius": radius, "angle_index": np.arange(n), "angles": ang})


def annulus(n_r: int, n_theta: int, r_inner: float = 1.0, r_outer: float = 2.0) -> SimplicialComplex:
    """Flat annulus with geometrically spaced, half-step staggered rings.

    Log-polar spacing keeps every triangle the same shape up to scale, so the
    cotangent weights stay positive at all refinement levels.
    """
    if n_theta < 3:
        raise InvalidParameterError(f"annulus needs n_theta >= 3, got {n_theta}")
    if n_r < 1:
        raise InvalidParameterError(f"annulus needs n_r >= 1, got {n_r}")
    if not 0 < r_inner < r_outer:
        raise InvalidParameterError("annulus needs 0 < r_inner < r_outer")
    h = 2 * np.pi / n_theta
    a_idx, b_idx = np.meshgrid(np.arange(n_r + 1), np.arange(n_theta), indexing="ij")
    radii = r_inner * (r_outer / r_inner) ** (a_idx / n_r)
    ang = (b_idx + 0.5 * a_idx) * h
    coords = np.stack([(radii * np.cos(ang)).ravel(), (radii * np.sin(ang)).ravel()], axis=1)
    vid = lambda a, b: a * n_theta + (b % n_theta)
    tops = []
    for a in range(n_r):
        for b in range(n_theta):
            tops.append((vid(a, b), vid(a + 1, b), vid(a, b + 1)))
            tops.append((vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)))
    tops = np.array(tops, dtype=np.int64)
    meta = {"n_r": n_r, "n_theta": n_theta, "r_inner": r_inner, "r_outer": r_outer,
            "angle_index": b_idx.ravel(), "ring_index": a_idx.ravel()}
    return SimplicialComplex.from_top_simplices(
        tops, coords, orientation=_orient_planar(tops, coords), kind="annulus", meta=meta)


def disk(n_r: int, n_theta: int, radius: float = 1.0) -> SimplicialComplex:
    """Disk: a centre vertex fanned to the first ring, then staggered rings."""
    if n_theta < 3:
        raise InvalidParameterError(f"disk needs n_theta >= 3, got {n_theta}")
    if n_r < 1:
        raise InvalidParameterError(f"disk needs n_r >= 1, got {n_r}")
    h = 2 * np.pi / n_theta
    coords = [(0.0, 0.0)]
    ring = [-1]
    angle_index = [-1]
    for a in range(1, n_r + 1):
        r = radius * a / n_r
        for b in range(n_theta):
            t = (b + 0.5 * (a - 1)) * h
            coords.append((r * np.cos(t), r * np.sin(t)))
            ring.append(a)
            angle_index.append(b)
    coords = np.array(coords)
    vid = lambda a, b: 1 + (a - 1) * n_theta + (b % n_theta)
    tops = [(0, vid(1, b), vid(1, b + 1)) for b in range(n_theta)]
    for a in range(1, n_r):
        for b in range(n_theta):
            tops.append((vid(a, b), vid(a + 1, b), vid(a, b + 1)))
            tops.append((vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)))
    tops = np.array(tops, dtype=np.int64)
    meta = {"n_r": n_r, "n_theta": n_theta, "radius": radius,
            "angle_index": np.array(angle_index), "ring_index": np.array(ring)}
    return SimplicialComplex.from_top_simplices(
        tops, coords, orientation=_orient_planar(tops, coords), kind="disk", meta=meta)


def square(n: int, side: float = 1.0) -> SimplicialComplex:
    """Unit square split into ``2 n²`` right triangles."""
    if n < 1:
        raise InvalidParameterError(f"square needs n >= 1, got {n}")
    xs = np.linspace(0.0, side, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    coords = np.stack([X.ravel(), Y.ravel()], axis=1)
    vid = lambda i, j: i * (n + 1) + j
    tops = []
    for i in range(n):
        for j in range(n):
            tops.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            tops.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    tops = np.array(tops, dtype=np.int64)
    return SimplicialComplex.from_top_simplices(
        tops, coords, orientation=_orient_planar(tops, coords), kind="square",
        meta={"n": n, "side": side})


def _icosahedron():
    z, r = 1 / np.sqrt(5), 2 / np.sqrt(5)
    verts = [(0.0, 0.0, 1.0)]
    verts += [(r * np.cos(2 * np.pi * k / 5), r * np.sin(2 * np.pi * k / 5), z) for k in range(5)]
    verts += [(r * np.cos(2 * np.pi * k / 5 + np.pi / 5), r * np.sin(2 * np.pi * k / 5 + np.pi / 5), -z)
              for k in range(5)]
    verts.append((0.0, 0.0, -1.0))
    U = lambda k: 1 + k % 5
    L = lambda k: 6 + k % 5
    faces = []
    for k in range(5):
        faces.append((0, U(k), U(k + 1)))
        faces.append((U(k), L(k), U(k + 1)))
        faces.append((U(k + 1), L(k), L(k + 1)))
        faces.append((11, L(k + 1), L(k)))
    return np.array(verts), faces


def sphere(subdivision: int) -> SimplicialComplex:
    """Unit sphere: icosahedron with ``subdivision`` rounds of 4-to-1 splits.

    ``meta['coarse_weights'][v]`` holds the barycentric coordinates of vertex
    ``v`` with respect to the 12 icosahedron vertices (before projection).
    """
    if subdivision < 0:
        raise InvalidParameterError(f"sphere subdivision must be >= 0, got {subdivision}")
    verts, faces = _icosahedron()
    pos = [np.array(v) for v in verts]
    weights = [np.eye(12)[i] for i in range(12)]
    for _ in range(subdivision):
        mid = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                mid[key] = len(pos)
                pos.append(0.5 * (pos[i] + pos[j]))
                weights.append(0.5 * (weights[i] + weights[j]))
            return mid[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new
    coords = np.array(pos)
    coords /= np.linalg.norm(coords, axis=1)[:, None]
    tops = np.array(faces, dtype=np.int64)
    s = np.sort(tops, axis=1)
    p0, p1, p2 = coords[s[:, 0]], coords[s[:, 1]], coords[s[:, 2]]
    det = np.einsum("ij,ij->i", np.cross(p1 - p0, p2 - p0), p0 + p1 + p2)
    orientation = np.sign(det[np.lexsort(s.T[::-1])]).astype(np.int8)
    return SimplicialComplex.from_top_simplices(
        tops, coords, orientation=orientation, kind="sphere",
        meta={"subdivision": subdivision, "coarse_weights": np.array(weights)})


_BUILDERS = {"circle": circle, "annulus": annulus, "disk": disk, "sphere": sphere, "square": square}


def build_complex(kind: str, **params) -> SimplicialComplex:
    """Build one of the supported meshes by name."""
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise InvalidParameterError(f"unknown complex kind {kind!r}") from None
    return builder(**params)


def boundary_circle(cpx: SimplicialComplex, which: str = "inner") -> SimplicialComplex:
    """Extract a boundary circle of an annulus as a stratum complex.

    The circle is oriented counter-clockwise around the origin and keeps
    ``embedding`` maps into ``cpx``.
    """
    if cpx.kind != "annulus":
        raise InvalidParameterError("boundary_circle needs an annulus")
    ring = 0 if which == "inner" else cpx.meta["n_r"]
    n = cpx.meta["n_theta"]
    verts = ring * n + np.arange(n)
    tops = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    coords = cpx.coords[verts]
    ang = np.arctan2(coords[:, 1], coords[:, 0])
    meta = {"n": n, "radius": float(np.linalg.norm(coords[0])),
            "angle_index": np.arange(n), "angles": ang, "which": which}
    return SimplicialComplex.from_top_simplices(
        tops, coords, kind="circle", meta=meta, parent=cpx, parent_vertices=verts)


# ----------------------------------------------------------------------------
# Chains and cochains
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Chain:
    """Integer chain: one coefficient per ``degree``-simplex."""

    complex: SimplicialComplex
    degree: int
    coeffs: np.ndarray

    @classmethod
    def from_simplices(cls, cpx, oriented: Iterable[Sequence[int]]) -> "Chain":
        """Chain summing the given oriented simplices (vertex tuples)."""
        oriented = list(oriented)
        degree = len(oriented[0]) - 1
        coeffs = np.zeros(cpx.n_simplices(degree), dtype=np.int64)
        for s in oriented:
            coeffs[cpx.index_of(s)] += _perm_sign(s)
        return cls(cpx, degree, coeffs)

    def boundary(self) -> "Chain":
        p = self.degree
        out = np.zeros(self.complex.n_simplices(p - 1), dtype=np.int64)
        if p >= 1:
            f = self.complex.faces[p]
            for i in range(p + 1):
                np.add.at(out, f[:, i], (-1) ** i * self.coeffs)
        return Chain(self.complex, p - 1, out)


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def _as_exact_array(values) -> tuple[np.ndarray, int]:
    """Numerators over a common denominator for a sequence of rationals."""
    fr = [Fraction(v) for v in values]
    den = 1
    for f in fr:
        den = _lcm(den, f.denominator)
    nums = [f.numerator * (den // f.denominator) for f in fr]
    return _int_array(nums), den


def _int_array(nums) -> np.ndarray:
    nums = list(nums)
    if nums and max(abs(int(x)) for x in nums) >= 2 ** 62:
        return np.array([int(x) for x in nums], dtype=object)
    return np.array(nums, dtype=np.int64)


def _rescale(values: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return values
    if factor == 0:
        return np.zeros_like(values)
    if values.dtype != object and values.size and np.abs(values).max() >= 2 ** 62 // abs(factor):
        values = values.astype(object)
    return values * factor


def _reduce(values: np.ndarray, den: int) -> tuple[np.ndarray, int]:
    if den == 1 or values.size == 0:
        return values, den if values.size else 1
    if values.dtype == object:
        g = den
        for v in values:
            g = math.gcd(g, int(v))
            if g == 1:
                return values, den
    else:
        g = math.gcd(den, int(np.gcd.reduce(values)))
    if g == 1:
        return values, den
    return values // g, den // g


@dataclass(frozen=True, eq=False)
class Cochain:
    """A p-cochain on ``complex``.

    Exact mode stores integer numerators in ``values`` over ``denominator``;
    numeric mode stores floats and ``denominator is None``.
    """

    complex: SimplicialComplex
    degree: int
    values: np.ndarray
    denominator: int | None = None

    def __post_init__(self):
        if len(self.values) != self.complex.n_simplices(self.degree):
            raise ValueError(
                f"{self.degree}-cochain needs {self.complex.n_simplices(self.degree)} "
                f"coefficients, got {len(self.values)}")

    @property
    def exact(self) -> bool:
        return self.denominator is not None

    @property
    def empty_degree(self) -> bool:
        """True for the zero cochain of a degree above the complex dimension."""
        return self.degree > self.complex.dim

    @classmethod
    def zeros(cls, cpx, degree, exact=True) -> "Cochain":
        n = cpx.n_simplices(degree)
        if exact:
            return cls(cpx, degree, np.zeros(n, dtype=np.int64), 1)
        return cls(cpx, degree, np.zeros(n))

    @classmethod
    def from_fractions(cls, cpx, degree, values) -> "Cochain":
        nums, den = _as_exact_array(values)
        return cls(cpx, degree, nums, den)

    @classmethod
    def from_floats(cls, cpx, degree, values) -> "Cochain":
        return cls(cpx, degree, np.asarray(values, dtype=float))

    def fractions(self) -> list[Fraction]:
        if not self.exact:
            raise TypeError("fractions() needs an exact cochain")
        return [Fraction(int(v), self.denominator) for v in self.values]

    def to_float(self) -> "Cochain":
        if not self.exact:
            return self
        return Cochain(self.complex, self.degree,
                       np.array([int(v) for v in self.values], dtype=float) / self.denominator)

    def _align(self, other: "Cochain"):
        if other.complex is not self.complex or other.degree != self.degree:
            raise ValueError("cochains live on different complexes or degrees")
        if self.exact != other.exact:
            raise TypeError("cannot mix exact and numeric cochains")
        if not self.exact:
            return self.values, other.values, None
        den = _lcm(self.denominator, other.denominator)
        return (_rescale(self.values, den // self.denominator),
                _rescale(other.values, den // other.denominator), den)

    def __add__(self, other: "Cochain") -> "Cochain":
        a, b, den = self._align(other)
        return _make(self.complex, self.degree, a + b, den)

    def __sub__(self, other: "Cochain") -> "Cochain":
        a, b, den = self._align(other)
        return _make(self.complex, self.degree, a - b, den)

    def __neg__(self) -> "Cochain":
        return Cochain(self.complex, self.degree, -self.values, self.denominator)

    def scale(self, factor) -> "Cochain":
        """Multiply by a scalar (int/Fraction keeps exactness, float does not)."""
        if self.exact and isinstance(factor, (int, Fraction)):
            f = Fraction(factor)
            return _make(self.complex, self.degree, _rescale(self.values, f.numerator),
                         self.denominator * f.denominator)
        return Cochain(self.complex, self.degree, self.to_float().values * float(factor))

    __mul__ = scale
    __rmul__ = scale

    def is_zero(self, tol: float = 0.0) -> bool:
        if self.values.size == 0:
            return True
        if self.exact:
            return not np.any(self.values)
        return float(np.max(np.abs(self.values))) <= tol

    def max_abs(self) -> float:
        if self.values.size == 0:
            return 0.0
        if self.exact:
            return float(Fraction(int(max(abs(int(v)) for v in self.values)), self.denominator))
        return float(np.max(np.abs(self.values)))

    def restrict(self, stratum: SimplicialComplex) -> "Cochain":
        """Pull back to a stratum complex embedded in this cochain's complex."""
        if stratum.parent is not self.complex:
            raise ValueError("stratum is not embedded in this complex")
        return Cochain(stratum, self.degree, self.values[stratum.embedding[self.degree]],
                       self.denominator)


def _make(cpx, degree, values, den) -> Cochain:
    if den is not None:
        values, den = _reduce(values, den)
    return Cochain(cpx, degree, values, den)


def sample_function(cpx: SimplicialComplex, func) -> Cochain:
    """Numeric 0-cochain of point values ``func(coords)``."""
    return Cochain(cpx, 0, np.asarray(func(cpx.coords), dtype=float))


def sample_one_form(cpx: SimplicialComplex, form, n_quad: int = 8, path=None) -> Cochain:
    """Numeric 1-cochain of line integrals of ``form`` over each edge.

    ``form(points) -> (n, ambient)`` gives the covector at each point; edges
    are parametrised by ``path(p0, p1, t)`` (straight segments by default) and
    integrated with Gauss–Legendre quadrature.
    """
    e = cpx.simplices[1]
    p0, p1 = cpx.coords[e[:, 0]], cpx.coords[e[:, 1]]
    t, w = np.polynomial.legendre.leggauss(n_quad)
    t, w = 0.5 * (t + 1), 0.5 * w
    total = np.zeros(len(e))
    eps = 1e-6
    for ti, wi in zip(t, w):
        if path is None:
            x = p0 + ti * (p1 - p0)
            dx = p1 - p0
        else:
            x = path(p0, p1, ti)
            dx = (path(p0, p1, min(ti + eps, 1.0)) - path(p0, p1, max(ti - eps, 0.0))) / (
                min(ti + eps, 1.0) - max(ti - eps, 0.0))
        total += wi * np.einsum("ij,ij->i", form(x), dx)
    return Cochain(cpx, 1, total)


def coboundary(c: Cochain) -> Cochain:
    """Simplicial coboundary ``(dc)(σ) = Σ_i (-1)^i c(σ with vertex i removed)``.

    For ``c.degree == dim`` the zero cochain of the empty degree ``dim + 1`` is
    returned (``empty_degree`` is set on it).
    """
    cpx, p = c.complex, c.degree
    if p >= cpx.dim:
        zero = np.zeros(0, dtype=c.values.dtype)
        return Cochain(cpx, p + 1, zero, c.denominator)
    f = cpx.faces[p + 1]
    out = c.values[f[:, 0]].copy()
    for i in range(1, p + 2):
        out = out + (-1) ** i * c.values[f[:, i]]
    return _make(cpx, p + 1, out, c.denominator)


def integrate(c: Cochain, region=None):
    """Pair a cochain with a chain.

    ``region`` may be a :class:`Chain`, a :class:`Subcomplex` (its top simplices
    with ambient orientation) or ``None`` for the whole complex.  Returns a
    ``Fraction`` in exact mode and a ``float`` otherwise.
    """
    cpx = c.complex
    if region is None:
        chain = cpx.fundamental_chain()
    elif isinstance(region, Subcomplex):
        full = cpx.fundamental_chain().coeffs
        coeffs = np.zeros_like(full)
        sel = region.simplices[cpx.dim]
        coeffs[sel] = full[sel]
        chain = Chain(cpx, cpx.dim, coeffs)
    else:
        chain = region
    if chain.degree != c.degree:
        raise ValueError(f"cannot integrate a {c.degree}-cochain over a {chain.degree}-chain")
    if chain.complex is not cpx:
        raise ValueError("chain and cochain live on different complexes")
    if c.exact:
        total = sum(int(a) * int(b) for a, b in zip(chain.coeffs, c.values) if a)
        return Fraction(total, c.denominator)
    return float(np.dot(chain.coeffs, c.values))


@dataclass(frozen=True)
class _CupIndex:
    front: np.ndarray
    back: np.ndarray


def _cup_index(cpx: SimplicialComplex, p: int, q: int) -> _CupIndex:
    cache = cpx.__dict__.setdefault("_cup_cache", {})
    if (p, q) not in cache:
        s = cpx.simplices[p + q]
        front = _row_lookup(cpx.simplices[p], s[:, : p + 1]) if p > 0 else s[:, 0].copy()
        back = _row_lookup(cpx.simplices[q], s[:, p:]) if q > 0 else s[:, -1].copy()
        cache[(p, q)] = _CupIndex(front, back)
    return cache[(p, q)]


def cup_product(a: Cochain, b: Cochain) -> Cochain:
    """Alexander–Whitney cup product on vertex-ordered simplices:
    ``(a ∪ b)(v0..v_{p+q}) = a(v0..vp) · b(vp..v_{p+q})``."""
    if a.complex is not b.complex:
        raise ValueError("cochains live on different complexes")
    p, q = a.degree, b.degree
    cpx = a.complex
    if p + q > cpx.dim:
        raise ValueError(f"cup product degree {p + q} exceeds complex dimension {cpx.dim}")
    if a.exact != b.exact:
        a, b = a.to_float(), b.to_float()
    idx = _cup_index(cpx, p, q)
    av, bv = a.values[idx.front], b.values[idx.back]
    if a.exact:
        if av.dtype != object and bv.dtype != object and av.size and (
                np.abs(av).max() * np.abs(bv).max() >= 2 ** 62):
            av, bv = av.astype(object), bv.astype(object)
        return _make(cpx, p + q, av * bv, a.denominator * b.denominator)
    return Cochain(cpx, p + q, av * bv)


# ----------------------------------------------------------------------------
# Subcomplexes, covers and nerves
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Subcomplex:
    """Full subcomplex induced on a vertex set; ``simplices[p]`` holds sorted
    indices into ``complex.simplices[p]``."""

    complex: SimplicialComplex
    simplices: tuple

    @classmethod
    def induced(cls, cpx: SimplicialComplex, vertex_mask: np.ndarray) -> "Subcomplex":
        vertex_mask = np.asarray(vertex_mask, dtype=bool)
        levels = []
        for p in range(cpx.dim + 1):
            sel = np.flatnonzero(vertex_mask[cpx.simplices[p]].all(axis=1))
            sel.setflags(write=False)
            levels.append(sel)
        return cls(cpx, tuple(levels))

    @property
    def vertex_mask(self) -> np.ndarray:
        m = np.zeros(self.complex.n_vertices, dtype=bool)
        m[self.simplices[0]] = True
        return m

    def is_empty(self) -> bool:
        return len(self.simplices[0]) == 0

    def n_simplices(self, p: int) -> int:
        if p < 0 or p > self.complex.dim:
            return 0
        return len(self.simplices[p])

    def boundary_matrix(self, p: int) -> np.ndarray:
        """∂_p restricted to this subcomplex, in local indexing."""
        m = np.zeros((self.n_simplices(p - 1), self.n_simplices(p)), dtype=np.int64)
        if 1 <= p <= self.complex.dim and m.size:
            f = self.complex.faces[p][self.simplices[p]]
            local = np.searchsorted(self.simplices[p - 1], f)
            cols = np.arange(len(f))
            for i in range(p + 1):
                m[local[:, i], cols] += (-1) ** i
        return m


@dataclass(frozen=True, eq=False)
class Nerve:
    """Abstract simplicial complex on chart indices."""

    simplices: tuple  # simplices[q] -> tuple of sorted index tuples

    @property
    def dim(self) -> int:
        return len(self.simplices) - 1

    def n_simplices(self, q: int) -> int:
        if q < 0 or q > self.dim:
            return 0
        return len(self.simplices[q])

    def level(self, q: int) -> tuple:
        if q < 0 or q > self.dim:
            return ()
        return self.simplices[q]

    @cached_property
    def _index(self) -> dict:
        return {s: i for lev in self.simplices for i, s in enumerate(lev)}

    def index_of(self, sigma: tuple) -> int:
        return self._index[tuple(sigma)]

    def __contains__(self, sigma) -> bool:
        return tuple(sigma) in self._index

    def counts(self) -> tuple:
        return tuple(len(lev) for lev in self.simplices)

    def cech_matrix(self, q: int) -> np.ndarray:
        """Integer matrix of the Čech coboundary on constants, C^q → C^{q+1}.

        Sign convention: ``(δ̌c)_{i0..i_{q+1}} = Σ_s (-1)^{q+1-s} c_{…î_s…}``, so
        the term omitting the last index enters with ``+``.
        """
        rows, cols = self.level(q + 1), self.level(q)
        m = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for r, sigma in enumerate(rows):
            for s in range(q + 2):
                tau = sigma[:s] + sigma[s + 1:]
                m[r, self.index_of(tau)] += (-1) ** (q + 1 - s)
        return m

    def cycle_order(self) -> list[int] | None:
        """Chart indices in cyclic order if the nerve is a cycle graph."""
        if self.dim != 1:
            return None
        verts = [s[0] for s in self.simplices[0]]
        adj = {v: [] for v in verts}
        for a, b in self.simplices[1]:
            adj[a].append(b)
            adj[b].append(a)
        if any(len(v) != 2 for v in adj.values()):
            return None
        order = [verts[0]]
        prev, cur = None, verts[0]
        while True:
            nxt = [w for w in adj[cur] if w != prev][0] if prev is not None else min(adj[cur])
            if nxt == order[0]:
                break
            order.append(nxt)
            prev, cur = cur, nxt
        return order if len(order) == len(verts) else None


class GoodCover:
    """Charts (full subcomplexes) with their nonempty intersections.

    Intersections are computed level by level until a level is empty, so the
    stored nerve is complete.  Each stored intersection carries a
    contractibility certificate (vanishing reduced integral homology).
    """

    def __init__(self, cpx: SimplicialComplex, vertex_masks: Sequence[np.ndarray],
                 max_depth: int = 6, certify: bool = True):
        self.complex = cpx
        masks = [np.asarray(m, dtype=bool) for m in vertex_masks]
        self.charts = tuple(Subcomplex.induced(cpx, m) for m in masks)
        covered = [np.zeros(cpx.n_simplices(p), dtype=bool) for p in range(cpx.dim + 1)]
        for ch in self.charts:
            if ch.is_empty():
                raise CoverError("empty chart")
            for p in range(cpx.dim + 1):
                covered[p][ch.simplices[p]] = True
        if not all(c.all() for c in covered):
            raise CoverError("charts do not cover the complex")
        inter = {}
        levels = []
        current = [((i,), masks[i]) for i in range(len(masks))]
        depth = 1
        while current:
            levels.append(tuple(s for s, _ in current))
            for s, m in current:
                inter[s] = Subcomplex.induced(cpx, m) if len(s) > 1 else self.charts[s[0]]
            if depth >= max_depth:
                raise CoverError(f"intersections do not terminate by depth {max_depth}")
            present = {s for s, _ in current}
            nxt = []
            for s, m in current:
                for j in range(s[-1] + 1, len(masks)):
                    cand = s + (j,)
                    if any(cand[:t] + cand[t + 1:] not in present for t in range(len(cand) - 1)):
                        continue
                    mm = m & masks[j]
                    if mm.any():
                        nxt.append((cand, mm))
            current = nxt
            depth += 1
        self.nerve = Nerve(tuple(levels))
        self.intersections = inter
        self.certificates = {}
        if certify:
            from .cohomology import is_acyclic
            for s, sub in inter.items():
                self.certificates[s] = is_acyclic(sub)
            bad = [s for s, ok in self.certificates.items() if not ok]
            if bad:
                raise CoverError(f"intersections {bad[:5]} are not contractible")

    def intersection(self, sigma) -> Subcomplex:
        return self.intersections[tuple(sigma)]

    @property
    def n_charts(self) -> int:
        return len(self.charts)

    @cached_property
    def layout(self) -> "CechLayout":
        return CechLayout(self)

    def induced(self, stratum: SimplicialComplex) -> "GoodCover":
        """Cover of a stratum by the traces of these charts (same chart indices)."""
        if stratum.parent is not self.complex:
            raise ValueError("stratum is not embedded in the covered complex")
        vmap = stratum.embedding[0]
        return GoodCover(stratum, [ch.vertex_mask[vmap] for ch in self.charts])

    def partition_of_unity(self, p: int) -> list[list[Fraction]]:
        """Exact weights ``ρ_i(σ) = [σ ∈ U_i] / #{j : σ ∈ U_j}`` on p-simplices."""
        n = self.complex.n_simplices(p)
        count = np.zeros(n, dtype=np.int64)
        for ch in self.charts:
            count[ch.simplices[p]] += 1
        out = []
        for ch in self.charts:
            w = [Fraction(0)] * n
            for g in ch.simplices[p]:
                w[g] = Fraction(1, int(count[g]))
            out.append(w)
        return out

    def to_json(self) -> dict:
        return {
            "charts": [ch.simplices[0].tolist() for ch in self.charts],
            "nerve": [[list(s) for s in lev] for lev in self.nerve.simplices],
        }

    @classmethod
    def from_json(cls, cpx: SimplicialComplex, data: dict) -> "GoodCover":
        masks = []
        for verts in data["charts"]:
            m = np.zeros(cpx.n_vertices, dtype=bool)
            m[verts] = True
            masks.append(m)
        cover = cls(cpx, masks)
        stored = [[tuple(s) for s in lev] for lev in data.get("nerve", [])]
        if stored and stored != [list(lev) for lev in cover.nerve.simplices]:
            raise CoverError("serialized nerve disagrees with the recomputed one")
        return cover


def _sector_masks(cpx: SimplicialComplex, n_charts: int, overlap: int) -> list[np.ndarray]:
    n = cpx.meta["n_theta"] if "n_theta" in cpx.meta else cpx.meta["n"]
    b = np.asarray(cpx.meta["angle_index"])
    if n_charts < 3:
        raise CoverError(f"a circle has no good cover by {n_charts} consecutive arcs; need >= 3")
    starts = [(i * n) // n_charts for i in range(n_charts)] + [n]
    spacing = min(starts[i + 1] - starts[i] for i in range(n_charts))
    if spacing <= overlap:
        raise CoverError(
            f"resolution {n} too low for {n_charts} charts with overlap {overlap}")
    masks = []
    for i in range(n_charts):
        width = starts[i + 1] - starts[i] + overlap
        rel = (b - starts[i]) % n
        m = (rel <= width) & (b >= 0)
        if cpx.kind == "disk":
            m |= b < 0
        masks.append(m)
    return masks


def build_cover(cpx: SimplicialComplex, n_charts: int | None = None,
                overlap: int = 1) -> tuple[GoodCover, Nerve]:
    """Good cover by angular sectors (circle, annulus, disk) or by coarse
    vertex stars (sphere, which needs subdivision >= 2 and ignores
    ``n_charts``)."""
    if cpx.kind in ("circle", "annulus", "disk"):
        if n_charts is None:
            raise CoverError("n_charts is required for sector covers")
        cover = GoodCover(cpx, _sector_masks(cpx, n_charts, overlap))
    elif cpx.kind == "sphere":
        if cpx.meta["subdivision"] < 2:
            raise CoverError("vertex-star cover of the sphere needs subdivision >= 2")
        w = cpx.meta["coarse_weights"]
        cover = GoodCover(cpx, [w[:, i] > 1e-12 for i in range(12)])
    else:
        raise CoverError(f"no cover builder for kind {cpx.kind!r}")
    return cover, cover.nerve


# ----------------------------------------------------------------------------
# Čech families of local cochains
# ----------------------------------------------------------------------------


class CechLayout:
    """Flat indexing of local cochains on intersections.

    Layer ``(q, p)`` concatenates, over the q-simplices σ of the nerve in
    order, the p-simplices of ``U_σ`` (global indices ascending).  Form degree
    ``p = -1`` stands for one integer per intersection.
    """

    def __init__(self, cover: GoodCover):
        self.cover = cover
        self.nerve = cover.nerve
        self._cache = {}

    def entries(self, q: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        """``(owner, gid)``: nerve position and global simplex index per entry."""
        key = ("entries", q, p)
        if key not in self._cache:
            level = self.nerve.level(q)
            if p < 0:
                owner = np.arange(len(level), dtype=np.int64)
                gid = np.full(len(level), -1, dtype=np.int64)
            else:
                parts = [self.cover.intersection(s).simplices[p] if p <= self.cover.complex.dim
                         else np.zeros(0, dtype=np.int64) for s in level]
                owner = np.concatenate([np.full(len(a), i, dtype=np.int64)
                                        for i, a in enumerate(parts)] or [np.zeros(0, np.int64)])
                gid = np.concatenate(parts or [np.zeros(0, np.int64)]).astype(np.int64)
            self._cache[key] = (owner, gid)
        return self._cache[key]

    def size(self, q: int, p: int) -> int:
        return len(self.entries(q, p)[0])

    def _keys(self, q, p):
        owner, gid = self.entries(q, p)
        return owner * (self.cover.complex.n_vertices + _max_simplices(self.cover.complex) + 1) + gid

    def _locate(self, q, p, owner, gid) -> np.ndarray:
        keys = self._keys(q, p)
        want = owner * (self.cover.complex.n_vertices + _max_simplices(self.cover.complex) + 1) + gid
        pos = np.searchsorted(keys, want)
        if want.size and (pos.max(initial=0) >= len(keys) or not np.all(keys[np.minimum(pos, len(keys) - 1)] == want)):
            raise KeyError("restriction target missing from layout")
        return pos

    def segment(self, q: int, p: int, sigma) -> slice:
        owner, _ = self.entries(q, p)
        i = self.nerve.level(q).index(tuple(sigma))
        lo, hi = np.searchsorted(owner, [i, i + 1])
        return slice(int(lo), int(hi))

    def cech_gather(self, q: int, p: int) -> list[tuple[int, np.ndarray]]:
        """Terms of δ̌ : layer (q-1, p) → layer (q, p) as (sign, source index)."""
        key = ("cech", q, p)
        if key not in self._cache:
            owner, gid = self.entries(q, p)
            level = self.nerve.level(q)
            prev = self.nerve.level(q - 1)
            prev_index = {s: i for i, s in enumerate(prev)}
            terms = []
            for s in range(q + 1):
                tau_idx = np.array([prev_index[sig[:s] + sig[s + 1:]] for sig in level],
                                   dtype=np.int64)
                src_owner = tau_idx[owner] if len(owner) else owner
                terms.append(((-1) ** (q - s), self._locate(q - 1, p, src_owner, gid)))
            self._cache[key] = terms
        return self._cache[key]

    def d_gather(self, q: int, p: int) -> list[tuple[int, np.ndarray]]:
        """Terms of the local coboundary : layer (q, p-1) → layer (q, p).

        For ``p == 0`` the single term is the injection of the integer layer
        (source index = owning intersection)."""
        key = ("d", q, p)
        if key not in self._cache:
            owner, gid = self.entries(q, p)
            if p == 0:
                terms = [(1, owner.copy())]
            else:
                faces = self.cover.complex.faces[p][gid] if len(gid) else np.zeros((0, p + 1), np.int64)
                terms = [((-1) ** i, self._locate(q, p - 1, owner, faces[:, i]))
                         for i in range(p + 1)]
            self._cache[key] = terms
        return self._cache[key]

    def restrict_index(self, q: int, p: int, sigma, sub: Subcomplex) -> np.ndarray:
        """Positions, inside layer (q, p), of ``sub``'s p-simplices on ``U_σ``."""
        i = self.nerve.level(q).index(tuple(sigma))
        owner = np.full(len(sub.simplices[p]), i, dtype=np.int64)
        return self._locate(q, p, owner, sub.simplices[p])

    def glue_index(self, p: int) -> np.ndarray:
        """For each global p-simplex, its first occurrence in layer (0, p)."""
        key = ("glue", p)
        if key not in self._cache:
            _, gid = self.entries(0, p)
            first = np.full(self.cover.complex.n_simplices(p), -1, dtype=np.int64)
            order = np.arange(len(gid))[::-1]
            first[gid[order]] = order
            self._cache[key] = first
        return self._cache[key]


def _max_simplices(cpx: SimplicialComplex) -> int:
    return max(cpx.n_simplices(p) for p in range(cpx.dim + 1))


@dataclass(frozen=True, eq=False)
class CechFamily:
    """Local p-cochains on every (q+1)-fold intersection of a cover.

    ``values`` is a flat array in :class:`CechLayout` order; exact families
    carry a ``denominator`` as :class:`Cochain` does.
    """

    cover: GoodCover
    q: int
    p: int
    values: np.ndarray
    denominator: int | None = None

    @classmethod
    def from_members(cls, cover: GoodCover, q: int, p: int, members: dict) -> "CechFamily":
        """Assemble from ``{σ: coefficients on U_σ}``; every nonempty σ is required."""
        level = cover.nerve.level(q)
        missing = [s for s in level if s not in members]
        if missing:
            raise KeyError(f"missing members for intersections {missing[:5]}")
        if p < 0:
            vals = [members[s] for s in level]
            return cls(cover, q, p, _int_array([int(v) for v in vals]), None)
        flat = []
        for s in level:
            arr = list(members[s])
            if len(arr) != cover.intersection(s).n_simplices(p):
                raise ValueError(f"member for {s} has wrong length")
            flat.extend(arr)
        if flat and all(isinstance(v, (int, Fraction, np.integer)) for v in flat):
            nums, den = _as_exact_array(flat)
            return cls(cover, q, p, nums, den)
        return cls(cover, q, p, np.asarray(flat, dtype=float), None)

    @classmethod
    def restrict_global(cls, c: Cochain, cover: GoodCover, q: int = 0) -> "CechFamily":
        """Restrictions of a global cochain to every (q+1)-fold intersection."""
        _, gid = cover.layout.entries(q, c.degree)
        return cls(cover, q, c.degree, c.values[gid], c.denominator)

    def member(self, sigma) -> np.ndarray:
        return self.values[self.cover.layout.segment(self.q, self.p, sigma)]

    def is_zero(self) -> bool:
        return self.values.size == 0 or not np.any(self.values)


def cech_coboundary(family: CechFamily) -> CechFamily:
    """δ̌ of a family: alternating sum of restrictions to (q+2)-fold intersections.

    Uses the sign convention of :meth:`Nerve.cech_matrix`.
    """
    lay = family.cover.layout
    q, p = family.q + 1, family.p
    out = np.zeros(lay.size(q, p), dtype=family.values.dtype)
    for sign, idx in lay.cech_gather(q, p):
        out = out + sign * family.values[idx]
    den = family.denominator
    if den is not None:
        out, den = _reduce(out, den)
    return CechFamily(family.cover, q, p, out, den)
