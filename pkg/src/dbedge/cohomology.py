"""Integer cohomology via Smith normal form, Deligne–Beilinson class maps and
exactness checks."""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

_OVERFLOW = 2 ** 40
_SNF_CACHE: OrderedDict = OrderedDict()
_SNF_CACHE_SIZE = 64


@dataclass(frozen=True)
class SNFResult:
    """``left @ M @ right == diagonal`` with unimodular ``left``, ``right``.

    ``factors`` lists the nonzero invariant factors ``d1 | d2 | …``.
    """

    diagonal: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_inv: np.ndarray
    right_inv: np.ndarray
    factors: tuple

    @property
    def rank(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class CohomologyGroup:
    free_rank: int
    torsion: tuple = ()

    def __post_init__(self):
        t = list(self.torsion)
        assert all(x > 1 for x in t), "torsion coefficients must exceed 1"
        assert all(t[i + 1] % t[i] == 0 for i in range(len(t) - 1))

    def is_zero(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def to_json(self) -> dict:
        return {"free_rank": self.free_rank, "torsion": list(self.torsion)}

    def __str__(self) -> str:
        parts = ["Z"] * min(self.free_rank, 1)
        if self.free_rank > 1:
            parts = [f"Z^{self.free_rank}"]
        parts += [f"Z/{t}" for t in self.torsion]
        return " + ".join(parts) or "0"


def _as_int_matrix(M) -> np.ndarray:
    M = np.asarray(M)
    if M.dtype == object:
        return M.copy()
    if M.size and np.abs(M).max() >= _OVERFLOW:
        return M.astype(object)
    return M.astype(np.int64).copy()


def smith_normal_form(M, track: bool = True) -> SNFResult:
    """Smith normal form by exact elimination, pivoting on the entry of
    smallest absolute value.

    Works in ``int64`` and switches to Python integers if entries grow past
    2**40.  With ``track=False`` the transforms are not accumulated (they are
    returned as empty arrays), which is much cheaper for rank computations.
    """
    A = _as_int_matrix(M)
    if A.ndim != 2:
        A = A.reshape(len(A), -1)
    key = None
    if A.dtype != object:
        key = (A.shape, track, hashlib.sha1(A.tobytes()).hexdigest())
        if key in _SNF_CACHE:
            _SNF_CACHE.move_to_end(key)
            return _SNF_CACHE[key]
    res = _smith(A, track)
    if key is not None:
        for arr in (res.diagonal, res.left, res.right, res.left_inv, res.right_inv):
            arr.setflags(write=False)
        _SNF_CACHE[key] = res
        if len(_SNF_CACHE) > _SNF_CACHE_SIZE:
            _SNF_CACHE.popitem(last=False)
    return res


def _smith(A: np.ndarray, track: bool) -> SNFResult:
    m, n = A.shape
    dt = A.dtype
    if track:
        U, V = np.eye(m, dtype=dt), np.eye(n, dtype=dt)
        Ui, Vi = np.eye(m, dtype=dt), np.eye(n, dtype=dt)
    else:
        U = V = Ui = Vi = np.zeros((0, 0), dtype=dt)

    def widen():
        nonlocal A, U, V, Ui, Vi
        A, U, V, Ui, Vi = (x.astype(object) for x in (A, U, V, Ui, Vi))

    factors = []
    for t in range(min(m, n)):
        while True:
            sub = A[t:, t:]
            nz = np.argwhere(sub != 0)
            if len(nz) == 0:
                break
            mags = np.abs(sub[nz[:, 0], nz[:, 1]])
            i, j = nz[int(np.argmin(mags))] + t
            if i != t:
                A[[t, i]] = A[[i, t]]
                if track:
                    U[[t, i]] = U[[i, t]]
                    Ui[:, [t, i]] = Ui[:, [i, t]]
            if j != t:
                A[:, [t, j]] = A[:, [j, t]]
                if track:
                    V[:, [t, j]] = V[:, [j, t]]
                    Vi[[t, j]] = Vi[[j, t]]
            piv = A[t, t]
            rows = np.flatnonzero(A[t + 1:, t]) + t + 1
            if len(rows):
                q = A[rows, t] // piv
                A[rows, t:] -= q[:, None] * A[t, t:]
                if track:
                    U[rows] -= q[:, None] * U[t]
                    Ui[:, t] += Ui[:, rows] @ q
                if A.dtype != object and np.abs(A[rows, t:]).max() >= _OVERFLOW:
                    widen()
                if np.any(A[t + 1:, t] != 0):
                    continue
            cols = np.flatnonzero(A[t, t + 1:]) + t + 1
            if len(cols):
                q = A[t, cols] // piv
                A[t:, cols] -= A[t:, t][:, None] * q[None, :]
                if track:
                    V[:, cols] -= V[:, t][:, None] * q[None, :]
                    Vi[t] += q @ Vi[cols]
                if A.dtype != object and np.abs(A[t:, cols]).max() >= _OVERFLOW:
                    widen()
                if np.any(A[t, t + 1:] != 0):
                    continue
            rest = A[t + 1:, t + 1:]
            bad = np.argwhere(rest % piv != 0) if rest.size else np.zeros((0, 2))
            if len(bad):
                r = int(bad[0][0]) + t + 1
                A[t] += A[r]
                if track:
                    U[t] += U[r]
                    Ui[:, r] -= Ui[:, t]
                continue
            break
        if t >= min(m, n) or A[t, t] == 0:
            break
        if A[t, t] < 0:
            A[t] = -A[t]
            if track:
                U[t] = -U[t]
                Ui[:, t] = -Ui[:, t]
        if track and U.dtype != object and max(
                np.abs(U).max(initial=0), np.abs(V).max(initial=0),
                np.abs(Ui).max(initial=0), np.abs(Vi).max(initial=0)) >= _OVERFLOW:
            widen()
        factors.append(int(A[t, t]))
    return SNFResult(A, U, V, Ui, Vi, tuple(factors))


def invariant_factors(M) -> tuple:
    return smith_normal_form(M, track=False).factors


def _cohomology_from_factors(n_q: int, f_q: tuple, f_prev: tuple) -> CohomologyGroup:
    free = n_q - len(f_q) - len(f_prev)
    return CohomologyGroup(free, tuple(d for d in f_prev if d > 1))


def cochain_cohomology(coboundaries: Sequence[np.ndarray], sizes: Sequence[int], degree: int) -> CohomologyGroup:
    """H^degree of a cochain complex given ``coboundaries[q] : C^q → C^{q+1}``."""
    if degree < 0 or degree >= len(sizes):
        return CohomologyGroup(0)
    f_q = invariant_factors(coboundaries[degree]) if degree < len(coboundaries) else ()
    f_prev = invariant_factors(coboundaries[degree - 1]) if degree >= 1 else ()
    return _cohomology_from_factors(sizes[degree], f_q, f_prev)


def integral_cohomology(nerve, degree: int) -> CohomologyGroup:
    """H^degree(nerve; Z) from the integer Čech coboundaries."""
    sizes = nerve.counts()
    mats = [nerve.cech_matrix(q) for q in range(len(sizes))]
    return cochain_cohomology(mats, sizes, degree)


def simplicial_cohomology(cpx, degree: int) -> CohomologyGroup:
    sizes = [cpx.n_simplices(p) for p in range(cpx.dim + 1)]
    mats = [cpx.coboundary_matrix(p) for p in range(cpx.dim + 1)]
    return cochain_cohomology(mats, sizes, degree)


def is_acyclic(sub) -> bool:
    """True iff the subcomplex has vanishing reduced integral homology."""
    dim = sub.complex.dim
    sizes = [sub.n_simplices(p) for p in range(dim + 1)]
    if sizes[0] == 0:
        return False
    facs = [()] + [invariant_factors(sub.boundary_matrix(p)) if sizes[p] and sizes[p - 1] else ()
                   for p in range(1, dim + 1)] + [()]
    if sizes[0] - len(facs[1]) != 1:
        return False
    for p in range(1, dim + 1):
        if sizes[p] - len(facs[p]) - len(facs[p + 1]) != 0:
            return False
    return all(d == 1 for f in facs for d in f)


# ----------------------------------------------------------------------------
# Linear systems over Z and Q
# ----------------------------------------------------------------------------


def solve_integer(M, b) -> np.ndarray | None:
    """An integer solution of ``M x = b``, or ``None`` if there is none."""
    M = np.asarray(M)
    m, n = M.shape
    b = np.array([int(v) for v in b], dtype=object)
    if n == 0:
        return np.zeros(0, dtype=object) if not np.any(b) else None
    snf = smith_normal_form(M)
    c = snf.left.astype(object) @ b if m else b
    y = np.zeros(n, dtype=object)
    for i, d in enumerate(snf.factors):
        if c[i] % d:
            return None
        y[i] = c[i] // d
    if np.any(c[len(snf.factors):] != 0):
        return None
    return snf.right.astype(object) @ y


def solve_rational(M, b, tol: float | None = None):
    """A solution of ``M x = b`` over Q (exact) or R (when ``tol`` is given).

    Exact mode takes Fractions/ints and returns a list of Fractions, or
    ``None`` if inconsistent.  Numeric mode uses least squares and returns
    ``None`` when the residual exceeds ``tol``.
    """
    M = np.asarray(M)
    m, n = M.shape
    if tol is not None:
        b = np.asarray(b, dtype=float)
        if n == 0:
            return np.zeros(0) if np.max(np.abs(b), initial=0) <= tol else None
        x = np.linalg.lstsq(M.astype(float), b, rcond=None)[0]
        return x if np.max(np.abs(M @ x - b), initial=0) <= tol else None
    b = [Fraction(v) for v in b]
    if n == 0:
        return [] if not any(b) else None
    snf = smith_normal_form(M)
    L = snf.left
    c = [sum((Fraction(int(L[i, j])) * b[j] for j in range(m) if L[i, j]), Fraction(0))
         for i in range(m)]
    r = snf.rank
    if any(c[i] != 0 for i in range(r, m)):
        return None
    y = [c[i] / snf.factors[i] for i in range(r)] + [Fraction(0)] * (n - r)
    R = snf.right
    return [sum((int(R[i, j]) * y[j] for j in range(r) if R[i, j]), Fraction(0)) for i in range(n)]


def homology_free_generators(bd_q: np.ndarray, bd_q1: np.ndarray, n_q: int) -> np.ndarray:
    """Integer cycles whose classes form a basis of the free part of H_q.

    ``bd_q : C_q → C_{q-1}`` and ``bd_q1 : C_{q+1} → C_q``.  Columns of the
    result are the cycles.
    """
    if n_q == 0:
        return np.zeros((0, 0), dtype=object)
    bd_q = np.asarray(bd_q).reshape(-1, n_q)
    bd_q1 = np.asarray(bd_q1).reshape(n_q, -1)
    r_q = len(invariant_factors(bd_q)) if bd_q.size else 0
    r_q1 = len(invariant_factors(bd_q1)) if bd_q1.size else 0
    if n_q - r_q - r_q1 == 0:
        return np.zeros((n_q, 0), dtype=object)
    if bd_q.shape[0] == 0:
        K = np.eye(n_q, dtype=object)
        Kinv = K
        r = 0
    else:
        s = smith_normal_form(bd_q)
        r = s.rank
        K = s.right.astype(object)[:, r:]
        Kinv = s.right_inv.astype(object)
    if K.shape[1] == 0:
        return np.zeros((n_q, 0), dtype=object)
    X = _int_matmul(Kinv[r:, :], bd_q1) if bd_q1.shape[1] else np.zeros((K.shape[1], 0), dtype=object)
    if X.shape[1] == 0:
        return K
    s2 = smith_normal_form(X)
    basis = _int_matmul(K, s2.left_inv)
    return basis[:, s2.rank:]


def _int_matmul(A, B) -> np.ndarray:
    """Exact integer product, in int64 when the entries are small enough."""
    a = np.asarray(A)
    b = np.asarray(B)

    def bound(x):
        if x.size == 0:
            return 0
        if x.dtype == object:
            return max(abs(int(v)) for v in x.ravel())
        return int(np.abs(x).max())

    if bound(a) * bound(b) * max(a.shape[-1], 1) < 2 ** 62:
        return (a.astype(np.int64) @ b.astype(np.int64)).astype(object)
    return a.astype(object) @ b.astype(object)


def nerve_cycle_basis(nerve) -> np.ndarray:
    """Free generators of H_1(nerve; Z) as integer 1-chains (columns).

    For a cycle-graph nerve the single generator runs through the charts in
    cyclic order, starting at the lowest index towards its lower neighbour
    index being last.
    """
    order = nerve.cycle_order()
    if order is not None:
        z = np.zeros(nerve.n_simplices(1), dtype=object)
        for a, b in zip(order, order[1:] + order[:1]):
            sign = 1 if a < b else -1
            z[nerve.index_of((min(a, b), max(a, b)))] += sign
        return z[:, None]
    bd1 = nerve.cech_matrix(0).T
    bd2 = nerve.cech_matrix(1).T
    return homology_free_generators(bd1, bd2, nerve.n_simplices(1))


def _dual_cocycles(bd_q, bd_q1, cob_q, n: int) -> tuple[np.ndarray, np.ndarray]:
    gens = homology_free_generators(bd_q, bd_q1, n)
    if n == 0:
        return gens, np.zeros((0, 0), dtype=object)
    cob = np.asarray(cob_q).astype(object).reshape(-1, n)
    M = np.vstack([cob, gens.T.astype(object)])
    cols = []
    for j in range(gens.shape[1]):
        target = [0] * cob.shape[0] + [1 if i == j else 0 for i in range(gens.shape[1])]
        x = solve_integer(M, target)
        if x is None:
            raise ArithmeticError("no integral cocycle dual to a homology generator")
        cols.append(x)
    coc = np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=object)
    return gens, coc


def integral_cocycle_basis(cpx, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Free homology generators of ``cpx`` and integer cocycles dual to them
    (column ``j`` of the cocycles pairs to ``δ_ij`` with generator ``i``)."""
    return _dual_cocycles(cpx.boundary_matrix(degree), cpx.boundary_matrix(degree + 1),
                          cpx.coboundary_matrix(degree), cpx.n_simplices(degree))


def nerve_cocycle_basis(nerve, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Same as :func:`integral_cocycle_basis` for the Čech complex of a nerve."""
    n = nerve.n_simplices(degree)
    bd_q = nerve.cech_matrix(degree - 1).T if degree >= 1 else np.zeros((0, n), dtype=np.int64)
    bd_q1 = nerve.cech_matrix(degree).T
    return _dual_cocycles(bd_q, bd_q1, nerve.cech_matrix(degree), n)


def has_integral_periods(c, tol: float = 1e-8) -> bool:
    """Membership in Ω^p_Z: closed with integer periods on a homology basis.

    Exact cochains are in turns and checked exactly; numeric cochains are in
    radians and checked within ``tol`` (a numerical test, not a proof).
    """
    from .complex import coboundary
    dc = coboundary(c)
    if not dc.is_zero(tol):
        return False
    cpx, p = c.complex, c.degree
    gens = homology_free_generators(cpx.boundary_matrix(p), cpx.boundary_matrix(p + 1),
                                    cpx.n_simplices(p))
    for j in range(gens.shape[1]):
        z = gens[:, j]
        if c.exact:
            per = Fraction(int(sum(int(a) * int(b) for a, b in zip(z, c.values) if a)), c.denominator)
            if per.denominator != 1:
                return False
        else:
            per = float(np.dot(z.astype(float), c.values)) / (2 * np.pi)
            if abs(per - round(per)) > tol:
                return False
    return True


# ----------------------------------------------------------------------------
# Čech–de Rham helpers on flat layers
# ----------------------------------------------------------------------------

TWO_PI = 2.0 * np.pi


def _inject(ints: np.ndarray, den: int | None) -> np.ndarray:
    """Integer layer → constant functions (turns × den, or radians)."""
    if den is None:
        return np.asarray(ints, dtype=float) * TWO_PI
    from .complex import _rescale
    return _rescale(np.asarray(ints), den)


def _cech(cover, q: int, p: int, values: np.ndarray) -> np.ndarray:
    """δ̌ : layer (q, p) → layer (q+1, p)."""
    lay = cover.layout
    out = np.zeros(lay.size(q + 1, p), dtype=values.dtype)
    for sign, idx in lay.cech_gather(q + 1, p):
        out = out + sign * values[idx]
    return out


def _local_d(cover, q: int, p: int, values: np.ndarray) -> np.ndarray:
    """Local coboundary : layer (q, p) → layer (q, p+1), for ``p >= 0``."""
    lay = cover.layout
    out = np.zeros(lay.size(q, p + 1), dtype=values.dtype)
    for sign, idx in lay.d_gather(q, p + 1):
        out = out + sign * values[idx]
    return out


def _chart_counts(cover, p: int) -> np.ndarray:
    key = ("counts", p)
    cache = cover.layout._cache
    if key not in cache:
        cnt = np.zeros(cover.complex.n_simplices(p), dtype=np.int64)
        for ch in cover.charts:
            cnt[ch.simplices[p]] += 1
        cache[key] = cnt
    return cache[key]


def homotopy(cover, q: int, p: int, values: np.ndarray, den: int | None):
    """Partition-of-unity contraction K : layer (q, p) → layer (q-1, p).

    ``(Kc)_τ(s) = Σ_j ρ_j(s) c_{τ j}(s)`` with ``ρ_j(s) = [s ∈ U_j] / #charts ∋ s``
    and ``τ j`` re-sorted with its permutation sign.  With the Čech sign
    convention used here ``δ̌K + Kδ̌ = id``.  Returns ``(values, den)``.
    """
    from .complex import _lcm, _rescale
    lay = cover.layout
    owner, gid = lay.entries(q - 1, p)
    level = cover.nerve.level(q - 1)
    cnt = _chart_counts(cover, p)[gid] if len(gid) else np.zeros(0, dtype=np.int64)
    if den is None:
        out = np.zeros(len(gid))
        scale_num = None
    else:
        L = 1
        for c in np.unique(cnt):
            L = _lcm(L, int(c))
        out = np.zeros(len(gid), dtype=values.dtype if values.dtype == object else np.int64)
        scale_num = L // cnt if len(cnt) else cnt
    for j in range(cover.n_charts):
        inside = np.zeros(len(gid), dtype=bool)
        if len(gid):
            member = np.zeros(cover.complex.n_simplices(p), dtype=bool)
            member[cover.charts[j].simplices[p]] = True
            inside = member[gid]
        tau_ok = np.array([j not in t for t in level], dtype=bool)
        if len(owner):
            inside &= tau_ok[owner]
        if not inside.any():
            continue
        rows = np.flatnonzero(inside)
        taus = [level[o] for o in owner[rows]]
        sig = [tuple(sorted(t + (j,))) for t in taus]
        sign = np.array([(-1) ** sum(1 for v in t if v > j) for t in taus], dtype=np.int64)
        pos_level = {s: i for i, s in enumerate(cover.nerve.level(q))}
        src_owner = np.array([pos_level[s] for s in sig], dtype=np.int64)
        src = lay._locate(q, p, src_owner, gid[rows])
        v = values[src] * sign
        if den is None:
            out[rows] += v / cnt[rows]
        else:
            out[rows] += _rescale(v, 1) * scale_num[rows]
    if den is None:
        return out, None
    return out, den * L


def local_potential(cover, q: int, values: np.ndarray):
    """Solve ``d f = ω`` on every (q+1)-fold intersection at once.

    ``values`` is a (q, 1) layer in any mode; ``f`` vanishes at the smallest
    vertex of each intersection.  Returns ``None`` when some ω is not closed
    there (no solution on a contractible set).
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import breadth_first_order, connected_components
    lay = cover.layout
    n0 = lay.size(q, 0)
    (s_head, head), (s_tail, tail) = lay.d_gather(q, 1)
    assert s_head == 1 and s_tail == -1
    f = np.zeros(n0, dtype=values.dtype if values.dtype == object else
                 (float if values.dtype.kind == "f" else np.int64))
    if len(head):
        g = coo_matrix((np.arange(1, len(head) + 1), (tail, head)), shape=(n0, n0)).tocsr()
        sym = g + g.T
        ncomp, labels = connected_components(sym, directed=False)
        seen = np.zeros(n0, dtype=bool)
        edge_of = {}
        for e, (a, b) in enumerate(zip(tail, head)):
            edge_of[(int(a), int(b))] = e
        for root in range(n0):
            if seen[root]:
                continue
            order, pred = breadth_first_order(sym, root, directed=False)
            seen[order] = True
            for node in order[1:]:
                par = int(pred[node])
                e = edge_of.get((par, int(node)))
                if e is not None:
                    f[node] = f[par] + values[e]
                else:
                    f[node] = f[par] - values[edge_of[(int(node), par)]]
    check = _local_d(cover, q, 0, f) - values
    if values.dtype.kind == "f":
        if check.size and np.max(np.abs(check)) > 1e-9 * max(1.0, float(np.max(np.abs(values)))):
            return None
    elif np.any(check != 0):
        return None
    return f


# ----------------------------------------------------------------------------
# Circle strata: arc decomposition and holonomy
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ArcDecomposition:
    """Counter-clockwise walk around a circle split into chart arcs.

    ``edge_chart[e]`` is the chart used for ccw edge ``e`` (from vertex e to
    e+1), ``edge_index``/``edge_sign`` give its stored index and the sign of
    the ccw orientation relative to the stored one, and ``transitions`` lists
    ``(vertex, from_chart, to_chart)``.
    """

    edge_chart: tuple
    edge_index: np.ndarray
    edge_sign: np.ndarray
    transitions: tuple


def arc_decomposition(cover) -> ArcDecomposition:
    cpx = cover.complex
    if cpx.kind != "circle" or cpx.dim != 1:
        raise ValueError("arc decomposition needs a circle stratum")
    n = cpx.n_vertices
    tails = np.arange(n)
    heads = (tails + 1) % n
    idx = np.array([cpx.index_of((int(a), int(b))) for a, b in zip(tails, heads)])
    sign = np.where(tails < heads, 1, -1)
    member = [set(ch.simplices[1].tolist()) for ch in cover.charts]
    order = cover.nerve.cycle_order() or list(range(cover.n_charts))
    rank = {c: i for i, c in enumerate(order)}
    cur = next(c for c in order if idx[0] in member[c])
    first = cur
    charts, trans = [], []
    for e in range(n):
        if idx[e] not in member[cur]:
            cands = [c for c, m in enumerate(member) if idx[e] in m]
            nxt = order[(rank[cur] + 1) % len(order)]
            new = nxt if nxt in cands else cands[0]
            trans.append((e, cur, new))
            cur = new
        charts.append(cur)
    if cur != first:
        trans.append((0, cur, first))
    return ArcDecomposition(tuple(charts), idx, sign, tuple(trans))


def _pair_sign(a: int, b: int) -> tuple[tuple, int]:
    return ((a, b), 1) if a < b else ((b, a), -1)


def holonomy(x):
    """Holonomy of a DB 1-cocycle on a circle stratum, modulo one turn.

    Exact cochains give a ``Fraction`` in ``[0, 1)`` turns, numeric ones a
    float in ``[0, 2π)``.
    """
    if (x.k, x.l) != (1, 1):
        raise ValueError("holonomy needs a U(1) connection (k=1, l=1)")
    arcs = arc_decomposition(x.cover)
    lay = x.cover.layout
    A = x.layers[0]
    owners = np.array(arcs.edge_chart, dtype=np.int64)
    pos = lay._locate(0, 1, owners, arcs.edge_index)
    total = A[pos] * arcs.edge_sign
    acc = sum(int(v) for v in total) if x.exact else float(np.sum(total))
    lam = x.layers[1]
    for v, a, b in arcs.transitions:
        key, s = _pair_sign(a, b)
        o = x.cover.nerve.level(1).index(key)
        p = lay._locate(1, 0, np.array([o]), np.array([v]))[0]
        val = int(lam[p]) if x.exact else float(lam[p])
        acc -= s * val
    if x.exact:
        return Fraction(acc, x.denominator) % 1
    return acc % TWO_PI


# ----------------------------------------------------------------------------
# Short exact sequence maps
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegerClass:
    """Class of an integer Čech cocycle of the nerve.

    ``coordinates`` pair the representative with the free homology
    generators of :func:`nerve_homology_basis`.
    """

    representative: tuple
    degree: int
    coordinates: tuple
    group: CohomologyGroup
    trivial: bool

    def is_zero(self) -> bool:
        return self.trivial

    def to_json(self) -> dict:
        return {"degree": self.degree, "coordinates": list(self.coordinates),
                "group": self.group.to_json(), "trivial": self.trivial}


def _glue(cover, p: int, values: np.ndarray, exact: bool) -> np.ndarray:
    """Global cochain from chart values that agree on overlaps."""
    lay = cover.layout
    _, gid = lay.entries(0, p)
    first = lay.glue_index(p)
    glued = values[first]
    back = glued[gid]
    bad = (back != values) if exact else np.abs(back - values) > 1e-9
    if np.any(bad):
        raise ValueError("chart values disagree on overlaps; not a global cochain")
    return glued


def curvature(x):
    """Glued curvature ``(dA_i)_i`` of a DB cocycle as a global cochain.

    Exact cochains give turns, numeric ones radians.
    """
    from .complex import Cochain, _reduce
    from .db import is_cocycle
    ok, res = is_cocycle(x)
    if not ok:
        raise ValueError(f"curvature needs a DB cocycle (residual {res:.3g})")
    cover, k = x.cover, x.k
    cpx = cover.complex
    if k + 1 > cpx.dim:
        return Cochain(cpx, k + 1, np.zeros(0, dtype=np.int64 if x.exact else float), x.denominator)
    dA = _local_d(cover, 0, k, x.layers[0])
    glued = _glue(cover, k + 1, dA, x.exact)
    if x.exact:
        glued, den = _reduce(glued, x.denominator)
        return Cochain(cpx, k + 1, glued, den)
    return Cochain(cpx, k + 1, glued)


def nerve_homology_basis(cover, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Free homology generators of the nerve with integer dual cocycles.

    In the top degree of a closed manifold the single generator is oriented
    so that a DB cocycle with integer layer ``n`` has total curvature
    ``⟨n, z⟩`` turns.
    """
    key = ("hbasis", degree)
    cache = cover.layout._cache
    if key in cache:
        return cache[key]
    gens, coc = nerve_cocycle_basis(cover.nerve, degree)
    cpx = cover.complex
    if degree == cpx.dim and gens.shape[1] == 1 and degree >= 1:
        from .complex import integrate
        n = np.array([int(v) for v in coc[:, 0]], dtype=np.int64)
        x = cocycle_from_integer_class(cover, n)
        flux = integrate(curvature(x))
        if flux == -1:
            gens, coc = -gens, -coc
        elif flux != 1:
            raise ArithmeticError(f"unexpected flux {flux} for a unit class")
    cache[key] = (gens, coc)
    return gens, coc


def cocycle_from_integer_class(cover, n, k: int = 1):
    """Exact DB cocycle of truncation ``k`` whose integer layer is ``n``.

    Layers are filled downwards with the partition-of-unity contraction,
    ``x_q = (-1)^(k+1) K d x_{q+1}``, where d of the integer layer is the
    injection of constants.  ``n`` must be an integer Čech cocycle.
    """
    from .complex import CechFamily
    from .db import DBCochain, is_cocycle
    n = np.asarray([int(v) for v in n], dtype=np.int64)
    if len(n) != cover.nerve.n_simplices(k + 1):
        raise ValueError(f"need one integer per nerve {k + 1}-simplex")
    if cover.nerve.n_simplices(k + 2) and np.any(_cech(cover, k + 1, -1, n) != 0):
        raise ValueError("integer layer is not a Čech cocycle")
    sign = (-1) ** (k + 1)
    fams = {k + 1: CechFamily(cover, k + 1, -1, n)}
    vals, den = _inject(n, 1)[cover.layout.entries(k + 1, 0)[0]], 1
    for q in range(k, -1, -1):
        p = k - q
        if q < k:
            vals = _local_d(cover, q + 1, p - 1, vals)
        vals, den = homotopy(cover, q + 1, p, vals, den)
        vals = sign * vals
        fams[q] = CechFamily(cover, q, p, vals, den)
    x = DBCochain.from_layers(cover, k, k, fams)
    ok, res = is_cocycle(x)
    assert ok, f"construction failed (residual {res})"
    return x


def delta_check_map(omega, cover):
    """``[ω] ↦ [(ω|U_i, 0, …, 0)]`` for a global k-form."""
    from .complex import CechFamily
    from .db import DBCochain
    if omega.complex is not cover.complex:
        raise ValueError("form and cover live on different complexes")
    k = omega.degree
    fam = CechFamily.restrict_global(omega, cover, 0)
    if not omega.exact:
        fam = CechFamily(cover, 0, k, np.asarray(fam.values, dtype=float), None)
    return DBCochain.from_layers(cover, k, k, {0: fam})


def u_map(x) -> IntegerClass:
    """The integer (characteristic) class of a DB cocycle."""
    from .db import is_cocycle
    ok, res = is_cocycle(x)
    if not ok:
        raise ValueError(f"u needs a DB cocycle (residual {res:.3g})")
    deg = x.k + 1
    n = x.integer_layer()
    nerve = x.cover.nerve
    gens, _ = nerve_homology_basis(x.cover, deg)
    coords = tuple(int(sum(int(a) * int(b) for a, b in zip(gens[:, j], n)))
                   for j in range(gens.shape[1]))
    trivial = solve_integer(nerve.cech_matrix(deg - 1), n) is not None if len(n) else True
    return IntegerClass(tuple(int(v) for v in n), deg, coords,
                        integral_cohomology(nerve, deg), trivial)


def v_map(m, cover, k: int = 1):
    """Flat class ``[(m_σ)]`` (Čech k-cochain of constants, in turns, with
    integral δ̌m) ↦ ``[(0, …, 0, m, ±δ̌m)]``."""
    from .complex import CechFamily, _as_exact_array
    from .db import DBCochain, is_cocycle
    lay = cover.layout
    m = list(m)
    if len(m) != cover.nerve.n_simplices(k):
        raise ValueError(f"need one constant per nerve {k}-simplex")
    exact = all(isinstance(v, (int, Fraction, np.integer)) for v in m)
    owner, _ = lay.entries(k, 0)
    if exact:
        nums, den = _as_exact_array(m)
        dm = _cech(cover, k, -1, nums) if cover.nerve.n_simplices(k + 1) else np.zeros(0, np.int64)
        if np.any(dm % den != 0):
            raise ValueError("δ̌m is not integral; m is not an R/Z cocycle")
        n = (-1) ** (k + 1) * (dm // den)
        fam = CechFamily(cover, k, 0, nums[owner], den)
    else:
        mv = np.asarray(m, dtype=float)
        dm = _cech(cover, k, -1, mv) if cover.nerve.n_simplices(k + 1) else np.zeros(0)
        if np.any(np.abs(dm - np.round(dm)) > 1e-9):
            raise ValueError("δ̌m is not integral; m is not an R/Z cocycle")
        n = (-1) ** (k + 1) * np.round(dm).astype(np.int64)
        fam = CechFamily(cover, k, 0, mv[owner] * TWO_PI, None)
    x = DBCochain.from_layers(cover, k, k, {k: fam, k + 1: CechFamily(cover, k + 1, -1, n.astype(np.int64))})
    ok, res = is_cocycle(x, tol=1e-9)
    assert ok, f"v-image is not a cocycle (residual {res})"
    return x


def apply_ses_map(map_id: str, x, cover=None, k: int = 1):
    """Evaluate one of the maps ``delta_check``, ``u``, ``v``, ``d``."""
    if map_id == "delta_check":
        return delta_check_map(x, cover if cover is not None else _need_cover())
    if map_id == "u":
        return u_map(x)
    if map_id == "v":
        return v_map(x, cover if cover is not None else _need_cover(), k)
    if map_id == "d":
        return curvature(x)
    raise ValueError(f"unknown map {map_id!r}")


def _need_cover():
    raise ValueError("this map needs the cover")


# ----------------------------------------------------------------------------
# Gauge equivalence
# ----------------------------------------------------------------------------


def integral_shift(nerve, q: int, r, tol: float | None = None):
    """Split a Čech q-cochain of constants ``r`` (turns, δ̌r integral) as
    ``r = δ̌c + z`` with ``z`` integral.

    Returns ``(z, c)`` or ``None`` when the class of ``r`` in
    ``H^q(nerve; R/Z)`` is nonzero.  Exact input is a list of Fractions;
    ``tol`` switches to floating point.
    """
    C = nerve.cech_matrix(q)
    if tol is None:
        r = [Fraction(v) for v in r]
        dr = [sum((int(C[i, j]) * r[j] for j in range(len(r)) if C[i, j]), Fraction(0))
              for i in range(C.shape[0])]
        if any(v.denominator != 1 for v in dr):
            return None
        dr = [int(v) for v in dr]
    else:
        r = np.asarray(r, dtype=float)
        dr = C @ r if C.size else np.zeros(C.shape[0])
        if np.any(np.abs(dr - np.round(dr)) > tol):
            return None
        dr = [int(round(v)) for v in dr]
    z0 = solve_integer(C, dr) if C.shape[0] else np.zeros(len(r), dtype=object)
    if z0 is None:
        return None
    w = [r[j] - int(z0[j]) for j in range(len(r))]
    gens, coc = nerve_cocycle_basis(nerve, q)
    z = np.array([int(v) for v in z0], dtype=object)
    for j in range(gens.shape[1]):
        per = sum((int(a) * b for a, b in zip(gens[:, j], w) if a), 0)
        if tol is None:
            per = Fraction(per)
            if per.denominator != 1:
                return None
            per = int(per)
        else:
            if abs(per - round(per)) > tol:
                return None
            per = int(round(per))
        z = z + per * coc[:, j]
    rest = [r[j] - int(z[j]) for j in range(len(r))]
    B = nerve.cech_matrix(q - 1) if q >= 1 else np.zeros((len(r), 0), dtype=np.int64)
    if tol is None:
        c = solve_rational(B, rest)
    else:
        c = solve_rational(B, rest, tol=tol)
    if c is None:
        return None
    return np.array([int(v) for v in z], dtype=np.int64), c


def _per_owner_constant(values, owner, n_owner, exact: bool, tol: float):
    """The common value of ``values`` on each owner, or ``None``."""
    out = [None] * n_owner
    for v, o in zip(values, owner):
        if out[o] is None:
            out[o] = v
        elif (out[o] != v) if exact else abs(out[o] - v) > tol:
            return None
    return [0 if v is None else v for v in out]


def gauge_equivalence(x, y, tol: float = 1e-9):
    """A gauge parameter ``q`` with ``y = x + D q``, or ``None``.

    Solved layer by layer: local potentials for the top forms, constant
    residuals on overlaps, then an integer Čech shift found by Smith normal
    form.  Supports U(1) connections (k = l = 1) and (−1)-gerbe connections
    (k = l = 0).
    """
    from .complex import CechFamily
    from .db import DBCochain, gauge_transform
    if x.cover is not y.cover or (x.k, x.l) != (y.k, y.l):
        raise ValueError("cochains differ in cover or degrees")
    cover, nerve, lay = x.cover, x.cover.nerve, x.cover.layout
    diff = y - x
    exact = diff.exact
    den = diff.denominator
    unit = den if exact else TWO_PI
    if (x.k, x.l) == (0, 0):
        owner, _ = lay.entries(0, 0)
        consts = _per_owner_constant(diff.layers[0], owner, nerve.n_simplices(0), exact, tol)
        if consts is None:
            return None
        n = []
        for c in consts:
            if exact:
                if int(c) % den:
                    return None
                n.append(-(int(c) // den))
            else:
                if abs(c / unit - round(c / unit)) > tol:
                    return None
                n.append(-int(round(c / unit)))
        q = DBCochain.from_layers(cover, 0, -1, {0: CechFamily(cover, 0, -1, np.array(n, dtype=np.int64))})
    elif (x.k, x.l) == (1, 1):
        f = local_potential(cover, 0, diff.layers[0])
        if f is None:
            return None
        r = diff.layers[1] - _cech(cover, 0, 0, f)
        owner, _ = lay.entries(1, 0)
        consts = _per_owner_constant(r, owner, nerve.n_simplices(1), exact, tol * unit)
        if consts is None:
            return None
        turns = [Fraction(int(c), den) for c in consts] if exact else [c / unit for c in consts]
        split = integral_shift(nerve, 1, turns, None if exact else tol)
        if split is None:
            return None
        m, c = split
        own0, _ = lay.entries(0, 0)
        if exact:
            from .complex import _as_exact_array
            cn, cd = _as_exact_array(c)
            fam0 = CechFamily(cover, 0, 0, f * cd + cn[own0] * den, den * cd)
        else:
            fam0 = CechFamily(cover, 0, 0, f + np.asarray(c, dtype=float)[own0] * unit, None)
        q = DBCochain.from_layers(cover, 1, 0, {0: fam0, 1: CechFamily(cover, 1, -1, m)})
    else:
        raise NotImplementedError("gauge equivalence is implemented for k = l ∈ {0, 1}")
    if not exact and q.exact:
        q = q.to_float()
    if not gauge_transform(x, q).equals(y, 0.0 if exact else 10 * tol * max(1.0, y.norm())):
        return None
    return q


# ----------------------------------------------------------------------------
# Exactness of the two short exact sequences (U(1) connections)
# ----------------------------------------------------------------------------


def _rand_fracs(rng, n, den=6, span=9):
    return [Fraction(int(a), den) for a in rng.integers(-span, span + 1, n)]


def random_cocycle(cover, rng, flat: bool = False, form_class: bool = True):
    """A random exact DB 1-cocycle built from every kind of generator:
    a monopole part, a global form, a flat part and a gauge shift."""
    from .complex import Cochain
    from .db import DBCochain, gauge_transform, random_db_cochain
    cpx, nerve = cover.complex, cover.nerve
    x = DBCochain.zeros(cover, 1, 1)
    if not flat and nerve.n_simplices(2):
        _, coc = nerve_homology_basis(cover, 2)
        if coc.shape[1]:
            n = sum(int(rng.integers(-2, 3)) * coc[:, j] for j in range(coc.shape[1]))
            x = x + cocycle_from_integer_class(cover, n)
    if form_class and not flat:
        x = x + delta_check_map(Cochain.from_fractions(cpx, 1, _rand_fracs(rng, cpx.n_simplices(1))), cover)
    x = x + v_map(random_flat_cocycle(nerve, rng), cover)
    return gauge_transform(x, random_db_cochain(cover, 1, 0, rng))


def random_flat_cocycle(nerve, rng, twist: Fraction | None = None):
    """Constants ``m = δ̌c + z (+ twist·y)`` with ``z`` integral and ``y`` an
    integer cocycle dual to the first H^1 generator."""
    c = _rand_fracs(rng, nerve.n_simplices(0))
    C0 = nerve.cech_matrix(0)
    m = [sum((int(C0[i, j]) * c[j] for j in range(len(c)) if C0[i, j]), Fraction(0))
         + int(rng.integers(-2, 3)) for i in range(C0.shape[0])]
    if twist is not None:
        _, coc = nerve_cocycle_basis(nerve, 1)
        m = [a + twist * int(b) for a, b in zip(m, coc[:, 0])]
    return m


def reduce_to_global_form(x):
    """For a cocycle with trivial integer class, a global form ω with
    ``x ~ δ̌ω``; ``None`` if the integer class is nonzero."""
    from .complex import CechFamily, Cochain, _reduce
    from .db import DBCochain, db_differential
    cover = x.cover
    n = x.integer_layer()
    m0 = solve_integer(cover.nerve.cech_matrix(1), n) if len(n) else \
        np.zeros(cover.nerve.n_simplices(1), dtype=object)
    if m0 is None:
        return None
    q1 = DBCochain.from_layers(cover, 1, 0, {1: CechFamily(cover, 1, -1, np.array([int(v) for v in m0], dtype=np.int64))})
    x1 = x - db_differential(1, 0, q1)
    h, hden = homotopy(cover, 1, 0, x1.layers[1], x1.denominator)
    q2 = DBCochain.from_layers(cover, 1, 0, {0: CechFamily(cover, 0, 0, h, hden)})
    x2 = x1 - db_differential(1, 0, q2)
    if np.any(x2.layers[1] != 0) or np.any(x2.layers[2] != 0):
        raise ArithmeticError("reduction left transition data behind")
    vals, den = _reduce(_glue(cover, 1, x2.layers[0], True), x2.denominator)
    return Cochain(cover.complex, 1, vals, den)


def verify_exactness(cover, rng=None, samples: int = 3) -> dict:
    """Check both sequences at every node on exact random data.

    Returns ``{node: bool}`` for the nodes ``ses1.Omega1``, ``ses1.H1DB``,
    ``ses1.H2``, ``ses2.H1RZ``, ``ses2.H1DB``, ``ses2.Omega2``.
    """
    from .complex import Cochain, coboundary, integrate
    from .db import DBCochain
    rng = rng or np.random.default_rng(0)
    cpx, nerve = cover.complex, cover.nerve
    zero = DBCochain.zeros(cover, 1, 1)
    trivial = lambda y: gauge_equivalence(zero, y) is not None  # noqa: E731
    out = {}

    # 0 → Ω¹/Ω¹_Z → H¹_DB: δ̌ω trivial exactly when ω ∈ Ω¹_Z
    _, coc = integral_cocycle_basis(cpx, 1)
    ok = True
    for _ in range(samples):
        f = Cochain.from_fractions(cpx, 0, _rand_fracs(rng, cpx.n_vertices))
        w = [int(rng.integers(-2, 3)) for _ in range(coc.shape[1])]
        base = coboundary(f)
        integral = base + Cochain.from_fractions(cpx, 1, [sum((a * int(b) for a, b in zip(w, row)), 0)
                                                          for row in coc]) if coc.shape[1] else base
        ok &= trivial(delta_check_map(integral, cover)) and has_integral_periods(integral)
        rand = Cochain.from_fractions(cpx, 1, _rand_fracs(rng, cpx.n_simplices(1), den=7))
        ok &= trivial(delta_check_map(rand, cover)) == has_integral_periods(rand)
        if coc.shape[1]:
            half = base + Cochain.from_fractions(cpx, 1, [Fraction(int(b), 2) for b in coc[:, 0]])
            ok &= not trivial(delta_check_map(half, cover))
    out["ses1.Omega1"] = bool(ok)

    # im δ̌ = ker u
    ok = True
    for _ in range(samples):
        om = Cochain.from_fractions(cpx, 1, _rand_fracs(rng, cpx.n_simplices(1)))
        ok &= u_map(delta_check_map(om, cover)).is_zero()
        x = random_cocycle(cover, rng, flat=False)
        if u_map(x).is_zero():
            w = reduce_to_global_form(x)
            ok &= w is not None and gauge_equivalence(delta_check_map(w, cover), x) is not None
        y = random_cocycle(cover, rng, flat=True)
        w = reduce_to_global_form(y)
        ok &= w is not None and gauge_equivalence(delta_check_map(w, cover), y) is not None
    out["ses1.H1DB"] = bool(ok)

    # u onto H²: every generator is hit
    grp = integral_cohomology(nerve, 2)
    gens, ncoc = nerve_homology_basis(cover, 2)
    ok = gens.shape[1] == grp.free_rank and not grp.torsion
    for j in range(ncoc.shape[1]):
        cls = u_map(cocycle_from_integer_class(cover, ncoc[:, j]))
        ok &= cls.coordinates == tuple(1 if i == j else 0 for i in range(ncoc.shape[1]))
    out["ses1.H2"] = bool(ok)

    # 0 → H¹(R/Z) → H¹_DB: v(m) trivial exactly when [m] = 0
    ok = True
    h1 = integral_cohomology(nerve, 1).free_rank
    for _ in range(samples):
        ok &= trivial(v_map(random_flat_cocycle(nerve, rng), cover))
        if h1:
            ok &= not trivial(v_map(random_flat_cocycle(nerve, rng, Fraction(1, 2)), cover))
            ok &= not trivial(v_map(random_flat_cocycle(nerve, rng, Fraction(1, 3)), cover))
    out["ses2.H1RZ"] = bool(ok)

    # im v = ker d
    ok = True
    for _ in range(samples):
        m = random_flat_cocycle(nerve, rng, Fraction(1, 5) if h1 else None)
        ok &= curvature(v_map(m, cover)).is_zero()
        x = random_cocycle(cover, rng, flat=True)
        ok &= curvature(x).is_zero()
        f = local_potential(cover, 0, x.layers[0])
        if f is None:
            ok = False
            continue
        lam = x.layers[1] - _cech(cover, 0, 0, f)
        owner, _ = cover.layout.entries(1, 0)
        consts = _per_owner_constant(lam, owner, nerve.n_simplices(1), True, 0)
        ok &= consts is not None
        if consts is not None:
            m2 = [Fraction(int(c), x.denominator) for c in consts]
            ok &= gauge_equivalence(v_map(m2, cover), x) is not None
    out["ses2.H1DB"] = bool(ok)

    # d onto Ω²_Z
    ok = True
    if cpx.dim >= 2:
        unit = ncoc[:, 0] if ncoc.shape[1] else None
        for _ in range(samples):
            beta0 = Cochain.from_fractions(cpx, 1, _rand_fracs(rng, cpx.n_simplices(1)))
            c = int(rng.integers(-3, 4))
            F = coboundary(beta0)
            if unit is not None:
                F = F + curvature(cocycle_from_integer_class(cover, unit)).scale(c)
            ok &= has_integral_periods(F)
            if unit is not None:
                xc = cocycle_from_integer_class(cover, int(integrate(F)) * unit)
            else:
                xc = DBCochain.zeros(cover, 1, 1)
            rest = F - curvature(xc)
            beta = solve_rational(cpx.coboundary_matrix(1), rest.fractions())
            if beta is None:
                ok = False
                continue
            x = xc + delta_check_map(Cochain.from_fractions(cpx, 1, beta), cover)
            ok &= (curvature(x) - F).is_zero()
            ok &= has_integral_periods(curvature(random_cocycle(cover, rng)))
    out["ses2.Omega2"] = bool(ok)
    return out
