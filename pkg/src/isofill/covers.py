"""Bounded covers at a scale, and the nerve they span.

A covering at scale s is a family of vertex sets (members) with
  * coverage: every vertex lies in some member,
  * bounded members: diam(member) <= c * s for the recorded c,
  * bounded multiplicity: any ball of radius s/2 meets at most m members.

Grid construction: n+1 diagonally shifted families of closed lattice
cubes of side n*sigma, period (n+1)*sigma + 1, where sigma = ceil(s/h)
lattice units.  Per axis at most one family's cube pattern misses a
vertex, so some family covers it; same-family cubes sit sigma+1 > s/h
units apart, so an s/2-ball meets at most one cube per family.

Tree product construction: per tree factor, depth bands of width W =
sigma'+1 edges, each band split along the components of a dip reaching
U = floor(sigma'/2)+1 levels above the band; distinct components are
more than 2U > sigma' edges apart.  Product members are pairs, giving
multiplicity at most 4.

The nerve carries the scaled simplicial metric (edge scale s/sqrt 2);
psi sends a vertex to rational barycentric coordinates built from
dyadically rounded member distances, rounding chosen so the image stays
inside the nerve.
"""

from __future__ import annotations

import json
from fractions import Fraction
from itertools import combinations, product

from .exact import frac, sqrt_ceil, float_sqrt
from .complexes import UnsupportedOperationError


class CoverMember:
    """A member: finite vertex set with a distance oracle and an anchor."""

    __slots__ = ("ids", "anchor", "_box", "_X")

    def __init__(self, X, ids, box=None):
        self.ids = frozenset(ids)
        if not self.ids:
            raise ValueError("empty cover member")
        self.anchor = min(self.ids)
        self._box = box           # grid fast path: (lo, hi) lattice tuples
        self._X = X

    def dist_sq(self, v) -> Fraction:
        """Exact squared model distance from vertex v to the member."""
        if v in self.ids:
            return Fraction(0)
        X = self._X
        if self._box is not None:
            return self._box_dist_sq(tuple(Fraction(b) for b in X.lattice(v)))
        return min(X.vertex_dist_sq(v, w) for w in self.ids)

    def _box_dist_sq(self, pt):
        X = self._X
        lo, hi = self._box
        acc = Fraction(0)
        for a in range(X.n):
            d = max(lo[a] - pt[a], pt[a] - hi[a], 0)
            acc += d * d
        return acc * X.h * X.h

    def dist_sq_point(self, pt) -> Fraction:
        """Exact squared distance from a family point object (grid: tuple
        of lattice Fractions; tree product: factor point pair)."""
        X = self._X
        if self._box is not None:
            return self._box_dist_sq(pt)
        return min(X.point_cell_dist_sq(pt, w) for w in self.ids)

    def diam_sq(self) -> Fraction:
        ids = sorted(self.ids)
        X = self._X
        if self._box is not None:
            lo, hi = self._box
            return X.h * X.h * sum((hi[a] - lo[a]) ** 2 for a in range(X.n))
        best = Fraction(0)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                d = X.vertex_dist_sq(ids[i], ids[j])
                if d > best:
                    best = d
        return best

    def iter_ids(self):
        """Vertex ids in increasing order; lazy for large members."""
        return iter(sorted(self.ids))

    def __len__(self):
        return len(self.ids)


class _ProductIds:
    """Set view of a product member's vertices, never materialized.

    Supports the membership, iteration (in increasing id order) and size
    queries the rest of the cover machinery relies on.
    """

    __slots__ = ("ids_a", "ids_b", "_nb")

    def __init__(self, ids_a, ids_b, nb):
        self.ids_a = frozenset(ids_a)
        self.ids_b = frozenset(ids_b)
        self._nb = nb

    def __contains__(self, v):
        a, b = divmod(v, self._nb)
        return a in self.ids_a and b in self.ids_b

    def __iter__(self):
        # join is a-major, so nested sorted loops yield increasing ids
        for a in sorted(self.ids_a):
            base = a * self._nb
            for b in sorted(self.ids_b):
                yield base + b

    def __len__(self):
        return len(self.ids_a) * len(self.ids_b)


def _tree_set_distances(tree, ids):
    """Hop distance from every tree vertex to the vertex set, one BFS."""
    dist = {v: 0 for v in ids}
    frontier = list(dist)
    while frontier:
        nxt = []
        for v in frontier:
            d = dist[v] + 1
            around = list(tree.children[v])
            if v != 0:
                around.append(tree.parent[v])
            for w in around:
                if w not in dist:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    return dist


def _tree_set_diameter(tree, ids):
    """Exact diameter of a vertex set in the tree metric (double sweep;
    in a tree the farthest set vertex from any point ends a diameter)."""
    ids = list(ids)
    v0 = ids[0]
    u = max(ids, key=lambda x: tree.dist(v0, x))
    w = max(ids, key=lambda x: tree.dist(u, x))
    return tree.dist(u, w)


class ProductCoverMember(CoverMember):
    """Member of a tree product cover, Ia x Ib by factor vertex sets.

    Every metric query is answered from two per-factor distance maps, so
    members spanning millions of product vertices stay O(1) per query.
    The ids attribute is a lazy view with the same set semantics.
    """

    __slots__ = ("_da", "_db", "_diam")

    def __init__(self, X, ids_a, ids_b, dmap_a=None, dmap_b=None):
        if not ids_a or not ids_b:
            raise ValueError("empty cover member")
        self._X = X
        self._box = None
        self.ids = _ProductIds(ids_a, ids_b, X._nb)
        self._da = dmap_a if dmap_a is not None else \
            _tree_set_distances(X.tree_a, ids_a)
        self._db = dmap_b if dmap_b is not None else \
            _tree_set_distances(X.tree_b, ids_b)
        self._diam = None
        self.anchor = X.join(min(self.ids.ids_a), min(self.ids.ids_b))

    def dist_sq(self, v) -> Fraction:
        X = self._X
        a, b = X.split(v)
        da, db = self._da[a], self._db[b]
        return X.h * X.h * (da * da + db * db)

    @staticmethod
    def _factor_point_dist(tree, dmap, pt):
        if len(pt) == 1:
            return Fraction(dmap[pt[0]])
        child, t = pt
        return min(t + dmap[tree.parent[child]], (1 - t) + dmap[child])

    def dist_sq_point(self, pt) -> Fraction:
        X = self._X
        da = self._factor_point_dist(X.tree_a, self._da, pt[0])
        db = self._factor_point_dist(X.tree_b, self._db, pt[1])
        return X.h * X.h * (da * da + db * db)

    def diam_sq(self) -> Fraction:
        if self._diam is None:
            da = _tree_set_diameter(self._X.tree_a, self.ids.ids_a)
            db = _tree_set_diameter(self._X.tree_b, self.ids.ids_b)
            h = self._X.h
            self._diam = h * h * (da * da + db * db)
        return self._diam

    def iter_ids(self):
        return iter(self.ids)

    def __len__(self):
        return len(self.ids)


class Covering:
    def __init__(self, X, s, members, c_sq, mult_bound):
        self.complex = X
        self.s = frac(s)
        self.members = list(members)
        self.c_sq = frac(c_sq)          # declared (c*s)^2 >= member diam^2
        self.mult_bound = mult_bound
        # distinct anchors: clipped members can share their least vertex,
        # and the snap map must separate member labels.  Smallest members
        # choose first so a one-vertex clip is never starved of its id.
        used = set()
        order = sorted(range(len(self.members)),
                       key=lambda i: len(self.members[i]))
        for i in order:
            M = self.members[i]
            pick = next((w for w in M.iter_ids() if w not in used), None)
            if pick is None:
                raise AssertionError("cannot assign distinct member anchors")
            M.anchor = pick
            used.add(pick)

    @property
    def c(self) -> float:
        return float_sqrt(self.c_sq)

    def __len__(self):
        return len(self.members)

    def members_near(self, v, r_sq):
        """Indices of members strictly within sqrt(r_sq) of vertex v."""
        return [i for i, M in enumerate(self.members) if M.dist_sq(v) < r_sq]

    def to_json(self, path=None):
        doc = {
            "s": str(self.s),
            "c_sq": str(self.c_sq),
            "mult_bound": self.mult_bound,
            "members": [sorted(M.ids) for M in self.members],
        }
        if path:
            with open(path, "w") as fh:
                json.dump(doc, fh)
        return doc

    @classmethod
    def from_json(cls, X, src):
        if isinstance(src, str):
            with open(src) as fh:
                doc = json.load(fh)
        else:
            doc = src
        members = [CoverMember(X, ids) for ids in doc["members"]]
        return cls(X, frac(str(doc["s"])), members,
                   frac(str(doc["c_sq"])), int(doc["mult_bound"]))


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

def _ceil_div_frac(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def _grid_cover(X, s):
    n, e, h = X.n, X.extent, X.h
    sigma = max(1, _ceil_div_frac(s / h))
    side = n * sigma
    period = (n + 1) * sigma + 1
    members = []
    for color in range(n + 1):
        off = color * sigma
        # cube lower corners congruent to off mod period, clipped to the box
        starts = []
        first = off % period - period
        axis_starts = [z for z in range(first, e + 1, period)]
        for corner in product(axis_starts, repeat=n):
            lo = tuple(max(0, c) for c in corner)
            hi = tuple(min(e, c + side) for c in corner)
            if any(l > hgt for l, hgt in zip(lo, hi)):
                continue
            box = (lo, hi)
            ids = []
            for v in product(*[range(l, hgt + 1) for l, hgt in zip(lo, hi)]):
                ids.append(X.encode(0, v))
            members.append(CoverMember(X, ids, box=box))
    c_sq = Fraction(n) * (Fraction(side) * h) ** 2 / (s * s)
    return Covering(X, s, members, c_sq, n + 1)


def _tree_factor_members(tree, s_units):
    """Members of one tree factor, as vertex-id lists."""
    sigma = max(1, _ceil_div_frac(s_units))
    W = sigma + 1
    U = sigma // 2 + 1
    maxd = max(tree.depth)
    out = []
    for j in range(maxd // W + 1):
        lo, hi = j * W, (j + 1) * W
        dip = max(0, lo - U)
        # components of {depth >= dip}: subtrees rooted at depth == dip
        roots = [v for v in range(tree.V) if tree.depth[v] == dip]
        for r in roots:
            ids = []
            stack = [r]
            while stack:
                v = stack.pop()
                if tree.depth[v] > hi:
                    continue
                if lo <= tree.depth[v] <= hi:
                    ids.append(v)
                stack.extend(tree.children[v])
            if ids:
                out.append(ids)
    return out, W, U


def _tree_product_cover(X, s):
    s_units = s / X.h
    mem_a, Wa, Ua = _tree_factor_members(X.tree_a, s_units)
    mem_b, Wb, Ub = _tree_factor_members(X.tree_b, s_units)
    dmaps_a = [_tree_set_distances(X.tree_a, ia) for ia in mem_a]
    dmaps_b = [_tree_set_distances(X.tree_b, ib) for ib in mem_b]
    members = []
    for ia, da in zip(mem_a, dmaps_a):
        for ib, db in zip(mem_b, dmaps_b):
            members.append(ProductCoverMember(X, ia, ib, da, db))
    # member diam^2 <= (diam_a^2 + diam_b^2) with factor diam <= 2(W+U-1)h
    da = 2 * (Wa + Ua) * X.h
    db = 2 * (Wb + Ub) * X.h
    c_sq = (da * da + db * db) / (s * s)
    return Covering(X, s, members, c_sq, 4)


def build_cover(X, s):
    """Covering of X at scale s; see the module docstring for the
    constructions and their certificates."""
    s = frac(s)
    if s <= 0:
        raise ValueError("scale must be positive")
    if X.family == "grid":
        cov = _grid_cover(X, s)
    elif X.family == "tree_product":
        cov = _tree_product_cover(X, s)
    else:
        raise UnsupportedOperationError(
            "covers are built for grid and tree product families only")
    return cov


def verify_cover(cov, vertices=None):
    """Certificate check by exhaustion: coverage, member diameter, and
    s/2-ball multiplicity over the given vertices (default: all).

    Returns a report dict; raises AssertionError on any violation.
    """
    X = cov.complex
    if vertices is None:
        vertices = list(X.cells(0))
    s_sq4 = cov.s * cov.s / 4
    diam_bound = cov.c_sq * cov.s * cov.s
    worst_mult = 0
    for M in cov.members:
        if M.diam_sq() > diam_bound:
            raise AssertionError(
                f"member diameter exceeds declared bound: "
                f"{float(M.diam_sq())} > {float(diam_bound)}")
    for v in vertices:
        hits = 0
        covered = False
        for M in cov.members:
            d = M.dist_sq(v)
            if d == 0:
                covered = True
            if d < s_sq4:
                hits += 1
        if not covered:
            raise AssertionError(f"vertex {v} not covered")
        if hits > cov.mult_bound:
            raise AssertionError(
                f"ball at vertex {v} meets {hits} members, "
                f"bound is {cov.mult_bound}")
        worst_mult = max(worst_mult, hits)
    return {
        "vertices_checked": len(vertices),
        "members": len(cov.members),
        "max_multiplicity": worst_mult,
        "mult_bound": cov.mult_bound,
        "c": cov.c,
    }


# ---------------------------------------------------------------------------
# nerve
# ---------------------------------------------------------------------------

class NerveComplex:
    """Nerve simplices spanned by the member sets seen from a vertex set.

    Simplices are sorted member-index tuples.  The nerve metric puts the
    vertices of a simplex at mutual distance s/sqrt(2); squared distances
    between barycentric points are (s^2/2) * |u - u'|_2^2, kept exact.
    """

    def __init__(self, cov, support_vertices):
        self.cov = cov
        X = cov.complex
        s = cov.s
        self.s = s
        r_sq = s * s / 4
        self._tau = {}            # vertex -> {member: rounded tau}
        simplices = set()
        for v in support_vertices:
            taus = {}
            for i, M in enumerate(cov.members):
                dsq = M.dist_sq(v)
                if dsq >= r_sq:
                    continue
                d_up = sqrt_ceil(dsq)
                t = s - 2 * d_up
                if t > 0:
                    taus[i] = t
            if not any(cov.members[i].dist_sq(v) == 0 for i in taus):
                raise AssertionError(f"vertex {v} has no containing member")
            self._tau[v] = taus
            idx = sorted(taus)
            for k in range(1, len(idx) + 1):
                simplices.update(combinations(idx, k))
        self.simplices = simplices

    def contains(self, simplex):
        return tuple(sorted(simplex)) in self.simplices

    def dim(self):
        return max((len(sx) - 1 for sx in self.simplices), default=-1)

    def absorb_cell_stars(self, cells):
        """Check the star condition against cell barycenters.

        For each cell, the dominant members of its corners must all lie
        strictly within s/2 of the barycenter; their index set is then a
        face of that point's member simplex, which joins the nerve.
        Returns False (leaving the nerve unchanged beyond prior cells) as
        soon as some cell fails, signalling the caller to subdivide.
        """
        X = self.cov.complex
        r_sq = self.s * self.s / 4
        for c in cells:
            verts = X.vertices_of(c)
            snap = {self.chi(v) for v in verts}
            bc = X.barycenter(c)
            idx = []
            for i, M in enumerate(self.cov.members):
                if M.dist_sq_point(bc) < r_sq:
                    idx.append(i)
            if not snap.issubset(idx):
                return False
            idx.sort()
            for k in range(1, len(idx) + 1):
                self.simplices.update(combinations(idx, k))
        return True

    # -- maps ---------------------------------------------------------------
    def psi(self, v):
        """Barycentric coordinates {member: Fraction}, summing to 1."""
        taus = self._tau[v]
        total = sum(taus.values())
        if total < self.s:
            raise AssertionError("rounded weights lost the containing member")
        return {i: t / total for i, t in taus.items()}

    def chi(self, v):
        """Dominant member at v: largest rounded weight, least index."""
        taus = self._tau[v]
        best = max(taus.values())
        return min(i for i, t in taus.items() if t == best)

    def anchor_map(self):
        """The vertex map x -> anchor of the dominant member."""
        cov = self.cov
        return lambda v: cov.members[self.chi(v)].anchor

    def metric_sq(self, u1, u2) -> Fraction:
        keys = set(u1) | set(u2)
        acc = Fraction(0)
        for i in keys:
            d = u1.get(i, Fraction(0)) - u2.get(i, Fraction(0))
            acc += d * d
        return acc * self.s * self.s / 2

    def to_json(self, path=None):
        doc = {
            "s": str(self.s),
            "simplices": sorted(list(sx) for sx in self.simplices),
            "anchors": [M.anchor for M in self.cov.members],
        }
        if path:
            with open(path, "w") as fh:
                json.dump(doc, fh)
        return doc


def psi_lipschitz_report(nerve, edges):
    """Exact worst ratio of nerve to model displacement over skeleton
    edges, as a squared Fraction; compare against 32 * mult^2."""
    X = nerve.cov.complex
    worst = Fraction(0)
    for u, v in edges:
        duv = X.vertex_dist_sq(u, v)
        if duv == 0:
            continue
        dn = nerve.metric_sq(nerve.psi(u), nerve.psi(v))
        r = dn / duv
        if r > worst:
            worst = r
    return worst


def displacement_report(nerve, vertices):
    """Exact worst squared displacement of the anchor-snap map, to be
    compared with ((1/2 + c) * s)^2."""
    X = nerve.cov.complex
    f = nerve.anchor_map()
    worst = Fraction(0)
    for v in vertices:
        d = X.vertex_dist_sq(v, f(v))
        if d > worst:
            worst = d
    return worst
