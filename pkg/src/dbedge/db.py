"""Deligne–Beilinson cochains on a good cover and their differentials.

A DB cochain with truncation ``k`` and diagonal ``l`` has one layer per Čech
degree ``q`` in ``max(0, l-k) .. l+1``; layer ``q`` holds local form cochains
of degree ``l-q`` on the (q+1)-fold intersections.  Form degree ``-1`` is the
integer layer: an integer ``w`` per intersection, standing for ``2πw``.

Exact cochains keep form numerators over one common denominator, in units of
full turns (so ``2π`` is ``1``).  Numeric cochains keep forms in radians.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .complex import CechFamily, GoodCover, _int_array, _lcm, _rescale

TWO_PI = 2.0 * math.pi


class LayerShapeError(ValueError):
    pass


def layer_range(k: int, l: int) -> range:
    if k < 0 or l < -1:
        raise LayerShapeError(f"need k >= 0 and l >= -1, got k={k}, l={l}")
    return range(max(0, l - k), l + 2)


# ----------------------------------------------------------------------------
# Operator spec
# ----------------------------------------------------------------------------

_SYMBOLS = ("cech", "d", "-d", "0")


@dataclass(frozen=True)
class DBOperatorSpec:
    """Block form of ``D^[k,l]``.

    ``rows`` and ``cols`` list the ``(q, p)`` of target and source layers;
    ``blocks[r][c]`` is one of ``"cech"``, ``"d"``, ``"-d"``, ``"0"``.
    """

    k: int
    l: int
    rows: tuple
    cols: tuple
    blocks: tuple

    def as_polynomials(self) -> list[list[dict]]:
        conv = {"cech": {("c",): 1}, "d": {("d",): 1}, "-d": {("d",): -1}, "0": {}}
        return [[dict(conv[s]) for s in row] for row in self.blocks]

    def compose(self, inner: "DBOperatorSpec") -> list[list[dict]]:
        """Symbolic product ``self ∘ inner`` in the algebra where δ̌² = d² = 0
        and δ̌ commutes with d (restriction commutes with the local coboundary,
        and d of an injected constant is zero)."""
        if inner.rows != self.cols:
            raise LayerShapeError("specs are not composable")
        a, b = self.as_polynomials(), inner.as_polynomials()
        out = []
        for i in range(len(self.rows)):
            row = []
            for j in range(len(inner.cols)):
                acc: dict = {}
                for m in range(len(self.cols)):
                    for w1, c1 in a[i][m].items():
                        for w2, c2 in b[m][j].items():
                            word = tuple(sorted(w1 + w2))
                            if word.count("c") > 1 or word.count("d") > 1:
                                continue
                            acc[word] = acc.get(word, 0) + c1 * c2
                row.append({w: c for w, c in acc.items() if c})
            out.append(row)
        return out


def operator_spec(k: int, l: int) -> DBOperatorSpec:
    """Generate ``D^[k,l]`` from the block pattern.

    Target layer ``(q, p)`` receives δ̌ from source ``(q-1, p)`` and
    ``(-1)^l d`` from source ``(q, p-1)``; d out of the integer layer is the
    injection of constants, and d out of form degree ``k`` is truncated away.
    """
    src = [(q, l - q) for q in layer_range(k, l)]
    tgt = [(q, l + 1 - q) for q in layer_range(k, l + 1)]
    dsym = "d" if l % 2 == 0 else "-d"
    blocks = []
    for (q, p) in tgt:
        row = []
        for s in src:
            if s == (q - 1, p):
                row.append("cech")
            elif s == (q, p - 1):
                row.append(dsym)
            else:
                row.append("0")
        blocks.append(tuple(row))
    return DBOperatorSpec(k, l, tuple(tgt), tuple(src), tuple(blocks))


# ----------------------------------------------------------------------------
# Cochains
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DBCochain:
    cover: GoodCover
    k: int
    l: int
    layers: tuple  # arrays ordered by Čech degree, see ``qs``
    denominator: int | None = 1

    def __post_init__(self):
        qs = layer_range(self.k, self.l)
        if len(self.layers) != len(qs):
            raise LayerShapeError(
                f"(k={self.k}, l={self.l}) needs {len(qs)} layers, got {len(self.layers)}")
        lay = self.cover.layout
        for q, arr in zip(qs, self.layers):
            n = lay.size(q, self.l - q)
            if len(arr) != n:
                raise LayerShapeError(f"layer q={q} needs {n} entries, got {len(arr)}")

    @property
    def exact(self) -> bool:
        return self.denominator is not None

    @property
    def qs(self) -> range:
        return layer_range(self.k, self.l)

    def _pos(self, q: int) -> int:
        if q not in self.qs:
            raise LayerShapeError(f"no layer at Čech degree {q}")
        return q - self.qs.start

    def layer(self, q: int) -> CechFamily:
        """Layer ``q`` as a family; integer layers have ``denominator=None``."""
        p = self.l - q
        arr = self.layers[self._pos(q)]
        den = None if p < 0 else self.denominator
        return CechFamily(self.cover, q, p, arr, den)

    def member(self, q: int, sigma) -> np.ndarray:
        return self.layers[self._pos(q)][self.cover.layout.segment(q, self.l - q, sigma)]

    def integer_layer(self) -> np.ndarray | None:
        q = self.l + 1
        return self.layers[self._pos(q)] if q in self.qs else None

    def member_fractions(self, q: int, sigma) -> list:
        """Exact member values; forms in turns, integers as ints."""
        vals = self.member(q, sigma)
        if self.l - q < 0:
            return [int(v) for v in vals]
        if not self.exact:
            raise TypeError("member_fractions() needs an exact cochain")
        return [Fraction(int(v), self.denominator) for v in vals]

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, cover: GoodCover, k: int, l: int, exact: bool = True) -> "DBCochain":
        lay = cover.layout
        layers = []
        for q in layer_range(k, l):
            n = lay.size(q, l - q)
            integer = l - q < 0
            layers.append(np.zeros(n, dtype=np.int64 if (exact or integer) else float))
        return cls(cover, k, l, tuple(layers), 1 if exact else None)

    @classmethod
    def from_layers(cls, cover: GoodCover, k: int, l: int, layers: dict) -> "DBCochain":
        """Build from ``{q: CechFamily or {σ: values}}``; absent layers are zero.

        Rational entries (int/Fraction) give an exact cochain in turns;
        floats give a numeric one in radians.
        """
        fams = {}
        for q in layer_range(k, l):
            spec = layers.get(q)
            if spec is None:
                continue
            fam = spec if isinstance(spec, CechFamily) else CechFamily.from_members(cover, q, l - q, spec)
            if (fam.q, fam.p) != (q, l - q):
                raise LayerShapeError(f"family at q={q} has wrong degrees ({fam.q}, {fam.p})")
            fams[q] = fam
        forms = [f for f in fams.values() if f.p >= 0]
        numeric = any(f.denominator is None and f.values.size and f.values.dtype.kind == "f"
                      for f in forms)
        if numeric:
            den = None
        else:
            den = 1
            for f in forms:
                den = _lcm(den, f.denominator)
        base = cls.zeros(cover, k, l, exact=not numeric)
        out = list(base.layers)
        for q, f in fams.items():
            i = q - base.qs.start
            if f.p < 0:
                out[i] = f.values
            elif numeric:
                out[i] = np.asarray(f.values, dtype=float) if f.denominator is None else \
                    np.array([int(v) for v in f.values], dtype=float) / f.denominator * TWO_PI
            else:
                out[i] = _rescale(f.values, den // f.denominator)
        return _make(cover, k, l, out, den)

    # -- arithmetic --------------------------------------------------------

    def _check_shape(self, other: "DBCochain"):
        if other.cover is not self.cover or (other.k, other.l) != (self.k, self.l):
            raise LayerShapeError("DB cochains differ in cover, truncation or diagonal")
        if self.exact != other.exact:
            raise TypeError("cannot mix exact and numeric DB cochains")

    def _combine(self, other: "DBCochain", sign: int) -> "DBCochain":
        self._check_shape(other)
        den = _lcm(self.denominator, other.denominator) if self.exact else None
        out = []
        for q, a, b in zip(self.qs, self.layers, other.layers):
            if self.l - q >= 0 and den is not None:
                a = _rescale(a, den // self.denominator)
                b = _rescale(b, den // other.denominator)
            out.append(a + sign * b)
        return _make(self.cover, self.k, self.l, out, den)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return DBCochain(self.cover, self.k, self.l, tuple(-a for a in self.layers), self.denominator)

    def scale(self, m: int) -> "DBCochain":
        """Integer multiple (keeps the integer layer integral)."""
        if int(m) != m:
            raise ValueError("only integer multiples preserve the integer layer")
        return _make(self.cover, self.k, self.l, [a * int(m) for a in self.layers], self.denominator)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def norm(self) -> float:
        """Max-abs over all entries (forms in radians, integers times 2π)."""
        best = 0.0
        for q, a in zip(self.qs, self.layers):
            if a.size == 0:
                continue
            m = float(max(abs(int(v)) for v in a)) if a.dtype == object else float(np.max(np.abs(a)))
            if self.l - q < 0:
                m *= TWO_PI
            elif self.exact:
                m = m / self.denominator * TWO_PI
            best = max(best, m)
        return best

    def to_float(self) -> "DBCochain":
        if not self.exact:
            return self
        out = []
        for q, a in zip(self.qs, self.layers):
            if self.l - q < 0:
                out.append(a)
            else:
                out.append(np.array([int(v) for v in a], dtype=float) / self.denominator * TWO_PI)
        return DBCochain(self.cover, self.k, self.l, tuple(out), None)

    def truncate(self, k: int) -> "DBCochain":
        """Drop layers of form degree above ``k``."""
        if k > self.k:
            raise LayerShapeError("truncate() cannot raise the truncation level")
        keep = layer_range(k, self.l)
        return DBCochain(self.cover, k, self.l,
                         tuple(self.layers[q - self.qs.start] for q in keep), self.denominator)

    def equals(self, other: "DBCochain", tol: float = 0.0) -> bool:
        return (self - other).is_zero(tol)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        layers = {}
        for q, a in zip(self.qs, self.layers):
            if self.l - q < 0:
                layers[str(q)] = [int(v) for v in a]
            elif self.exact:
                layers[str(q)] = [[str(int(v)), str(self.denominator)] for v in a]
            else:
                layers[str(q)] = [float(v) for v in a]
        return {"truncation": self.k, "diagonal": self.l,
                "mode": "exact" if self.exact else "numeric", "layers": layers}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, cover: GoodCover, data: dict) -> "DBCochain":
        k, l = int(data["truncation"]), int(data["diagonal"])
        exact = data.get("mode", "exact") == "exact"
        fams = {}
        for q in layer_range(k, l):
            raw = data["layers"][str(q)]
            if l - q < 0:
                fams[q] = CechFamily(cover, q, l - q, _int_array(int(v) for v in raw))
            elif exact:
                fams[q] = CechFamily(cover, q, l - q,
                                     *_exact_from_pairs(raw))
            else:
                fams[q] = CechFamily(cover, q, l - q, np.asarray(raw, dtype=float))
        if not exact:
            layers = tuple(fams[q].values for q in layer_range(k, l))
            return cls(cover, k, l, layers, None)
        return cls.from_layers(cover, k, l, fams)


def _exact_from_pairs(pairs):
    fr = [Fraction(int(a), int(b)) for a, b in pairs]
    den = 1
    for f in fr:
        den = _lcm(den, f.denominator)
    return _int_array(f.numerator * (den // f.denominator) for f in fr), den


def _make(cover, k, l, layers, den) -> DBCochain:
    layers = list(layers)
    if den is not None and den != 1:
        forms = [i for i, q in enumerate(layer_range(k, l)) if l - q >= 0]
        g = den
        for i in forms:
            a = layers[i]
            if a.size == 0:
                continue
            if a.dtype == object:
                for v in a:
                    g = math.gcd(g, int(v))
            else:
                g = math.gcd(g, int(np.gcd.reduce(a)))
            if g == 1:
                break
        if g > 1:
            for i in forms:
                layers[i] = layers[i] // g
            den //= g
    return DBCochain(cover, k, l, tuple(layers), den)


# ----------------------------------------------------------------------------
# Differential and gauge transformations
# ----------------------------------------------------------------------------


def db_differential(k: int, l: int, x: DBCochain) -> DBCochain:
    """``D^[k,l] x``: a cochain of diagonal ``l+1``."""
    if (x.k, x.l) != (k, l):
        raise LayerShapeError(f"cochain has (k={x.k}, l={x.l}), operator expects (k={k}, l={l})")
    lay = x.cover.layout
    spec = operator_spec(k, l)
    src = {qp: arr for qp, arr in zip(spec.cols, x.layers)}
    exact = x.exact
    out = []
    for r, (q, p) in enumerate(spec.rows):
        n = lay.size(q, p)
        integer = p < 0
        acc = np.zeros(n, dtype=np.int64 if (exact or integer) else float)
        for c, sym in enumerate(spec.blocks[r]):
            if sym == "0" or n == 0:
                continue
            a = src[spec.cols[c]]
            if sym == "cech":
                for sign, idx in lay.cech_gather(q, p):
                    acc = acc + sign * a[idx]
            else:
                sgn = -1 if sym == "-d" else 1
                from_int = spec.cols[c][1] < 0
                part = 0
                for sign, idx in lay.d_gather(q, p):
                    part = part + sign * a[idx]
                if from_int:
                    part = _rescale(part, x.denominator) if exact else part * TWO_PI
                acc = acc + sgn * part
        out.append(acc)
    return _make(x.cover, k, l + 1, out, x.denominator)


def is_cocycle(x: DBCochain, tol: float = 1e-9) -> tuple[bool, float]:
    """Whether ``D^[k,l] x = 0``; the residual is a max-abs norm in radians."""
    res = db_differential(x.k, x.l, x).norm()
    return (res == 0.0 if x.exact else res <= tol), res


def gauge_transform(x: DBCochain, q: DBCochain) -> DBCochain:
    """``x + D^[k,l-1] q``."""
    if q.cover is not x.cover or (q.k, q.l) != (x.k, x.l - 1):
        raise LayerShapeError("gauge parameter must share the cover and sit one diagonal lower")
    return x + db_differential(q.k, q.l, q)


def random_db_cochain(cover: GoodCover, k: int, l: int, rng: np.random.Generator,
                      max_num: int = 9, max_den: int = 6, int_range: int = 4,
                      exact: bool = True) -> DBCochain:
    """Random cochain: rational forms ``a/den`` turns and integers in
    ``[-int_range, int_range]``."""
    lay = cover.layout
    den = int(rng.integers(1, max_den + 1)) if exact else None
    layers = []
    for q in layer_range(k, l):
        p = l - q
        n = lay.size(q, p)
        if p < 0:
            layers.append(rng.integers(-int_range, int_range + 1, n).astype(np.int64))
        elif exact:
            layers.append(rng.integers(-max_num, max_num + 1, n).astype(np.int64))
        else:
            layers.append(rng.uniform(-1.0, 1.0, n))
    return _make(cover, k, l, layers, den)


def restrict_to_stratum(x: DBCochain, stratum_cover: GoodCover) -> DBCochain:
    """Pull back to the induced cover of an embedded stratum (same chart labels)."""
    cpx = stratum_cover.complex
    if cpx.parent is not x.cover.complex:
        raise ValueError("stratum cover is not induced from this cochain's cover")
    parent_lay, lay = x.cover.layout, stratum_cover.layout
    out = []
    for q in layer_range(x.k, x.l):
        p = x.l - q
        owner, gid = lay.entries(q, p)
        level = stratum_cover.nerve.level(q)
        plevel_idx = {s: i for i, s in enumerate(x.cover.nerve.level(q))}
        try:
            pown = np.array([plevel_idx[s] for s in level], dtype=np.int64)[owner] if len(owner) \
                else owner
        except KeyError as exc:
            raise ValueError("stratum nerve is not a subcomplex of the cover nerve") from exc
        pgid = gid if p < 0 else cpx.embedding[p][gid]
        idx = parent_lay._locate(q, p, pown, pgid) if len(owner) else owner
        out.append(x.layers[q - x.qs.start][idx])
    return _make(stratum_cover, x.k, x.l, out, x.denominator)

