"""Integral cellular chains: sparse integer combinations of oriented cells.

A chain stores {cell_id: coefficient} plus its dimension and a reference
to the ambient complex.  Coefficients are ints, masses and distances are
Fractions; nothing here ever rounds.
"""

from __future__ import annotations

import csv
import heapq
import json
from fractions import Fraction

from .exact import frac


class Chain:
    __slots__ = ("complex", "dim", "terms")

    def __init__(self, X, dim, terms=None):
        self.complex = X
        self.dim = dim
        self.terms = {c: v for c, v in (terms or {}).items() if v}

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, X, dim):
        return cls(X, dim, {})

    @classmethod
    def unit(cls, X, cid, sign=1):
        return cls(X, X.dim_of(cid), {cid: sign})

    @classmethod
    def vertex(cls, X, vid, coeff=1):
        return cls(X, 0, {vid: coeff})

    def copy(self):
        return Chain(self.complex, self.dim, dict(self.terms))

    # -- algebra ------------------------------------------------------------
    def _assert_compatible(self, other):
        if self.complex is not other.complex or self.dim != other.dim:
            raise ValueError("chain mismatch: different complex or dimension")

    def __add__(self, other):
        self._assert_compatible(other)
        out = dict(self.terms)
        for c, v in other.terms.items():
            w = out.get(c, 0) + v
            if w:
                out[c] = w
            else:
                out.pop(c, None)
        return Chain(self.complex, self.dim, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Chain(self.complex, self.dim, {c: -v for c, v in self.terms.items()})

    def __mul__(self, k):
        if not isinstance(k, int):
            raise TypeError("chains scale by integers only")
        if k == 0:
            return Chain.zero(self.complex, self.dim)
        return Chain(self.complex, self.dim, {c: k * v for c, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, Chain) and self.complex is other.complex
                and self.dim == other.dim and self.terms == other.terms)

    def __hash__(self):
        raise TypeError("chains are mutable containers; not hashable")

    def is_zero(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        k = len(self.terms)
        return f"<Chain dim={self.dim} cells={k} mass={float(self.mass()):.4g}>"

    # -- geometry ------------------------------------------------------------
    def boundary(self):
        X = self.complex
        acc = {}
        for cid, co in self.terms.items():
            for f, sg in X.boundary(cid):
                w = acc.get(f, 0) + co * sg
                if w:
                    acc[f] = w
                else:
                    acc.pop(f, None)
        return Chain(X, self.dim - 1, acc)

    def mass(self) -> Fraction:
        X = self.complex
        return sum((abs(v) * X.volume(c) for c, v in self.terms.items()),
                   Fraction(0))

    def norm1(self) -> int:
        """Coefficient l1 norm, ignoring cell volumes."""
        return sum(abs(v) for v in self.terms.values())

    def support(self):
        return set(self.terms)

    def support_vertices(self):
        return self.complex.support_vertices(self.terms)

    def restrict(self, cells):
        """T restricted to the given cell set."""
        return Chain(self.complex, self.dim,
                     {c: v for c, v in self.terms.items() if c in cells})

    def diam_sq(self) -> Fraction:
        """Exact squared diameter of the support (model metric between
        support vertices; path-metric upper bound on custom complexes)."""
        verts = sorted(self.support_vertices())
        best = Fraction(0)
        for i in range(len(verts)):
            for j in range(i + 1, len(verts)):
                d = self.complex.vertex_dist_sq(verts[i], verts[j])
                if d > best:
                    best = d
        return best

    def diam(self) -> float:
        from .exact import float_sqrt
        return float_sqrt(self.diam_sq())


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

def geodesic_path(X, p, q):
    """1-chain G with boundary [q] - [p] along a shortest skeleton path."""
    from .complexes import geodesic_edges
    acc = {}
    for eid, sg in geodesic_edges(X, p, q):
        w = acc.get(eid, 0) + sg
        if w:
            acc[eid] = w
        else:
            acc.pop(eid, None)
    return Chain(X, 1, acc)


# ---------------------------------------------------------------------------
# slicing
# ---------------------------------------------------------------------------

class SliceResult:
    """Outcome of slice_min: the level r, the restriction T_in = T to the
    sublevel cells, the slice S = boundary(T_in) - boundary(T) restricted,
    and the exact coarea ratio over the band."""

    def __init__(self, r, inside, sliced, coarea_ratio, band_mass):
        self.r = r
        self.inside = inside
        self.sliced = sliced
        self.coarea_ratio = coarea_ratio
        self.band_mass = band_mass

    def __repr__(self):
        return (f"<Slice r={float(self.r):.4g} |S|={len(self.sliced)} "
                f"coarea={float(self.coarea_ratio):.3f}>")


def _cell_levels(X, cid, rho):
    vals = [rho(v) for v in X.vertices_of(cid)]
    return min(vals), max(vals)


def check_lipschitz(X, cells, rho):
    """rho must be 1-Lipschitz along every edge of the closure."""
    for cid in X.closure(cells):
        if X.dim_of(cid) != 1:
            continue
        verts = X.vertices_of(cid)
        if len(verts) < 2:
            continue
        if abs(rho(verts[0]) - rho(verts[1])) > X.volume(cid):
            raise ValueError(
                f"level function is not 1-Lipschitz across edge {cid}")


def slice_min(T, rho, a, b):
    """Slice T by the sublevel sets of rho at the best level in (a, b).

    B_r consists of the cells whose vertices all satisfy rho <= r.  The
    slice is S_r = boundary(T | B_r) - boundary(T) | B_r.  Candidate
    levels are the critical values (max vertex level of support-closure
    cells) inside the open interval; the one of least slice mass wins,
    ties to the smaller level.  An empty band returns the slice at r = a.

    rho must be 1-Lipschitz along skeleton edges (checked exactly).
    """
    X = T.complex
    a, b = frac(a), frac(b)
    if not a < b:
        raise ValueError("slicing needs a < b")
    check_lipschitz(X, T.support(), rho)

    closure = X.closure(T.support())
    levels = sorted({_cell_levels(X, c, rho)[1] for c in closure
                     if a < _cell_levels(X, c, rho)[1] < b})

    def slice_at(r):
        inside = {c for c in closure if _cell_levels(X, c, rho)[1] <= r}
        t_in = T.restrict(inside)
        s = t_in.boundary() - T.boundary().restrict(inside)
        return t_in, s

    if not levels:
        t_in, s = slice_at(a)
        return SliceResult(a, t_in, s, Fraction(0), Fraction(0))

    best = None
    segs = []          # (start, end, slice_mass) for the exact coarea integral
    prev_r = a
    _, s_prev = slice_at(a)
    prev_mass = s_prev.mass()
    for r in levels:
        segs.append((prev_r, r, prev_mass))
        t_in, s = slice_at(r)
        m = s.mass()
        if best is None or m < best[0]:
            best = (m, r, t_in, s)
        prev_r, prev_mass = r, m
    segs.append((prev_r, b, prev_mass))

    band = {c for c in T.support()
            if _cell_levels(X, c, rho)[1] > a and _cell_levels(X, c, rho)[0] < b}
    band_mass = T.restrict(band).mass()
    integral = sum(((e - s0) * m for s0, e, m in segs), Fraction(0))
    ratio = integral / band_mass if band_mass else Fraction(0)

    _, r, t_in, s = best
    return SliceResult(r, t_in, s, ratio, band_mass)


def truncated_distance_field(X, sources, radius, targets=None):
    """Exact path distances from a vertex set, out to ``radius``.

    Returns a dict; vertices beyond the radius are absent.  Clamping the
    lookup at ``radius`` keeps the function 1-Lipschitz, so
    ``lambda v: field.get(v, radius)`` is a valid level function whose
    sublevels below ``radius`` agree with the true distance.

    ``targets``, when given, are the only vertices whose values will be
    read; the search stops once all of them in range are settled, so
    callers slicing a small chain in a huge complex never pay for the
    full ball.  Values at non-target vertices are then unreliable.
    """
    radius = frac(radius)
    dist = {v: Fraction(0) for v in sources}
    pq = [(Fraction(0), v) for v in sources]
    heapq.heapify(pq)
    pending = set(targets) - set(sources) if targets is not None else None
    if pending is not None and not pending:
        return dist
    done = set()
    while pq:
        d, v = heapq.heappop(pq)
        if v in done:
            continue
        done.add(v)
        if pending is not None:
            pending.discard(v)
            if not pending:
                break
        for eid, w, _ in X.vertex_edges(v):
            nd = d + X.volume(eid)
            if nd <= radius and (w not in dist or nd < dist[w]):
                dist[w] = nd
                heapq.heappush(pq, (nd, w))
    return dist


# ---------------------------------------------------------------------------
# cellular pushforward
# ---------------------------------------------------------------------------

def _vertex_step(X, u, w):
    """Classify w - u in the 1-skeleton: None if u == w, else
    (axis_key, direction, edge_id); raises if not a single edge step."""
    if u == w:
        return None
    if X.family == "grid":
        bu, bw = X.lattice(u), X.lattice(w)
        diff = [(a, bw[a] - bu[a]) for a in range(X.n) if bw[a] != bu[a]]
        if len(diff) != 1 or abs(diff[0][1]) != 1:
            raise ValueError("image corners do not span a cell")
        a, d = diff[0]
        base = list(bu)
        if d < 0:
            base[a] -= 1
        eid = X.encode(1 << a, tuple(base))
        return a, d, eid
    if X.family == "tree_product":
        ua, ub = X.split(u)
        wa, wb = X.split(w)
        if ua != wa and ub != wb:
            raise ValueError("image corners do not span a cell")
        if ua != wa:
            ta = X.tree_a
            if ta.parent[wa] == ua:
                return 0, 1, X.join(ta.V + wa - 1, ub)
            if ta.parent[ua] == wa:
                return 0, -1, X.join(ta.V + ua - 1, ub)
            raise ValueError("image corners do not span a cell")
        tb = X.tree_b
        if tb.parent[wb] == ub:
            return 1, 1, X.join(ua, tb.V + wb - 1)
        if tb.parent[ub] == wb:
            return 1, -1, X.join(ua, tb.V + ub - 1)
        raise ValueError("image corners do not span a cell")
    raise ValueError("pushforward needs a structured target complex")


def _perm_sign(keys):
    sign = 1
    ks = list(keys)
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            if ks[i] > ks[j]:
                sign = -sign
    return sign


def pushforward_cell(X, Y, vmap, cid):
    """Image of one oriented cell under a vertex map that is affine on
    cells; returns (target_cell, sign) or None when the image degenerates."""
    verts = X.vertices_of(cid)
    d = X.dim_of(cid)
    if d == 0:
        return vmap(verts[0]), 1
    w0 = vmap(verts[0])
    steps = []
    for j in range(d):
        wj = vmap(verts[1 << j])
        st = _vertex_step(Y, w0, wj)
        if st is not None:
            steps.append((j, st))
    if not steps:
        return None
    axes = [st[0] for _, st in steps]
    if len(set(axes)) != len(axes):
        raise ValueError("image corners fold onto a shared axis")
    # affine consistency on every corner
    if Y.family == "grid":
        b0 = Y.lattice(w0)
        for corner in range(1 << d):
            expect = list(b0)
            for j, (axis, dr, _) in steps:
                if (corner >> j) & 1:
                    expect[axis] += dr
            if vmap(verts[corner]) != Y.encode(0, tuple(expect)):
                raise ValueError("vertex map is not affine on a cell")
    else:
        # rebuild each box corner from the recorded edge endpoints
        corner_img = {}
        pa0, pb0 = Y.split(w0)
        for corner in range(1 << d):
            ca, cb = pa0, pb0
            for j, (axis, dr, eid) in steps:
                if (corner >> j) & 1:
                    ea, eb = Y.split(eid)
                    if axis == 0:
                        tail, head = Y._tends(Y.tree_a, ea)
                        ca = head if dr == 1 else tail
                    else:
                        tail, head = Y._tends(Y.tree_b, eb)
                        cb = head if dr == 1 else tail
            corner_img[corner] = Y.join(ca, cb)
        for corner in range(1 << d):
            if vmap(verts[corner]) != corner_img[corner]:
                raise ValueError("vertex map is not affine on a cell")
    if len(steps) < d:
        return None          # collapsed along some axis
    # target cell: span from the least corner
    if Y.family == "grid":
        base = list(Y.lattice(w0))
        mask = 0
        for _, (axis, dr, _) in steps:
            mask |= 1 << axis
            if dr < 0:
                base[axis] -= 1
        target = Y.encode(mask, tuple(base))
    else:
        pa, pb = Y.split(w0)
        a_cell, b_cell = pa, pb
        for _, (axis, dr, eid) in steps:
            ea, eb = Y.split(eid)
            if axis == 0:
                a_cell = ea
            else:
                b_cell = eb
        target = Y.join(a_cell, b_cell)
    sign = _perm_sign([st[0] for _, st in steps])
    for _, (_, dr, _) in steps:
        sign *= dr
    return target, sign


def pushforward_cellular(T, vmap, Y=None):
    """Pushforward of T under a vertex map affine on cells.  Degenerate
    images drop out; non-cellular images raise."""
    X = T.complex
    Y = Y or X
    acc = {}
    for cid, co in T.terms.items():
        img = pushforward_cell(X, Y, vmap, cid)
        if img is None:
            continue
        tc, sg = img
        w = acc.get(tc, 0) + co * sg
        if w:
            acc[tc] = w
        else:
            acc.pop(tc, None)
    return Chain(Y, T.dim, acc)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def chain_to_json(T, path=None):
    doc = {"dim": T.dim, "terms": sorted([c, v] for c, v in T.terms.items())}
    if path is None:
        return doc
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return doc


def chain_from_json(X, src):
    if isinstance(src, str):
        with open(src) as fh:
            doc = json.load(fh)
    else:
        doc = src
    terms = {int(c): int(v) for c, v in doc["terms"]}
    dim = int(doc["dim"])
    for c in terms:
        if X.dim_of(c) != dim:
            raise ValueError(f"cell {c} has dim {X.dim_of(c)}, chain says {dim}")
    return Chain(X, dim, terms)


def chain_to_csv(T, path):
    X = T.complex
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id", "coeff", "volume"])
        for c in sorted(T.terms):
            w.writerow([c, T.terms[c], str(X.volume(c))])


def chain_from_csv(X, path):
    terms = {}
    dim = None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            c = int(row["cell_id"])
            terms[c] = int(row["coeff"])
            if "volume" in row and row["volume"]:
                if frac(row["volume"]) != X.volume(c):
                    raise ValueError(f"volume mismatch for cell {c}")
            d = X.dim_of(c)
            if dim is None:
                dim = d
            elif d != dim:
                raise ValueError("mixed dimensions in chain file")
    return Chain(X, dim if dim is not None else 0, terms)
