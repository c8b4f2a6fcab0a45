"""Computable CAT(0) model complexes.

Three families share one interface:

* grid(n, extent, h): the cubical complex of an n-dimensional box,
  ``extent`` cells per axis, edge length ``h``.  Model metric: Euclidean
  on the box; path metric on the 1-skeleton is h * l1.  kappa = sqrt(n).
* tree products: the square complex T_a x T_b of two rooted trees with
  unit-length (possibly subdivided) edges.  Model metric: l2 combination
  of the two tree metrics.  kappa = sqrt(2).
* custom cube complexes loaded from JSON with explicit boundary lists.

Grid and tree-product cells are never stored: a cell id encodes its
combinatorial data and boundaries/volumes are computed arithmetically,
so large products (millions of cells) cost nothing until a chain
actually touches them.  All coordinates and volumes are Fractions.
"""

from __future__ import annotations

import heapq
import json
import warnings
from fractions import Fraction
from itertools import combinations, product

from .exact import frac

DEFAULT_CELL_BUDGET = 20_000_000     # id-space size a builder will accept
DEFAULT_ENUM_BUDGET = 2_000_000      # cells a global enumeration will visit


class ResourceBudgetError(RuntimeError):
    pass


class LinkConditionError(ValueError):
    pass


class UnsupportedOperationError(NotImplementedError):
    pass


# ---------------------------------------------------------------------------
# base interface
# ---------------------------------------------------------------------------

class MetricComplex:
    """Shared interface; see family subclasses for the encodings."""

    family = "abstract"
    top_dim = 0
    kappa_sq = Fraction(1)

    # -- combinatorics -----------------------------------------------------
    def dim_of(self, cid):
        raise NotImplementedError

    def volume(self, cid) -> Fraction:
        raise NotImplementedError

    def boundary(self, cid):
        """List of (face_id, sign) with sign in {+1, -1}."""
        raise NotImplementedError

    def vertices_of(self, cid):
        """Corner vertex ids.

        For cubical families the order is the canonical corner order: bit j
        of the corner index selects the upper end of the j-th interval axis.
        """
        raise NotImplementedError

    def num_cells(self, d) -> int:
        raise NotImplementedError

    def cells(self, d, budget=DEFAULT_ENUM_BUDGET):
        """Iterate all d-cells; refuses to enumerate past ``budget``."""
        n = self.num_cells(d)
        if n > budget:
            raise ResourceBudgetError(
                f"enumeration of {n} cells of dim {d} exceeds budget {budget}")
        return self._iter_cells(d)

    def _iter_cells(self, d):
        raise NotImplementedError

    # -- metric ------------------------------------------------------------
    def vertex_dist_sq(self, u, v) -> Fraction:
        """Exact squared model-metric distance between vertices."""
        raise NotImplementedError

    def vertex_path_dist(self, u, v) -> Fraction:
        """Exact 1-skeleton path distance between vertices."""
        raise NotImplementedError

    def vertex_edges(self, v):
        """Edges at vertex v as (edge_id, other_vertex, sign_at_v).

        sign_at_v is the coefficient of v in boundary(edge): -1 when v is
        the tail, +1 when v is the head.
        """
        raise NotImplementedError

    def point_cell_dist_sq(self, pt, cid) -> Fraction:
        """Squared model distance from a point to the closed cell."""
        raise NotImplementedError

    def barycenter(self, cid):
        """Barycenter as a family-specific point object."""
        raise NotImplementedError

    # -- generic helpers ---------------------------------------------------
    def closure(self, cids):
        """All faces of the given cells, the cells included."""
        out = set()
        stack = list(cids)
        while stack:
            c = stack.pop()
            if c in out:
                continue
            out.add(c)
            if self.dim_of(c) > 0:
                stack.extend(f for f, _ in self.boundary(c))
        return out

    def support_vertices(self, cids):
        verts = set()
        for c in self.closure(cids):
            if self.dim_of(c) == 0:
                verts.add(c)
        return verts


# ---------------------------------------------------------------------------
# grid complexes
# ---------------------------------------------------------------------------

class GridComplex(MetricComplex):
    """Cubical complex of [0, extent*h]^n on the h-lattice.

    Cell encoding: (mask, base) where mask is the set of interval axes and
    base the lattice corner; id = mask * (extent+1)^n + mixed-radix(base).
    Vertices are the mask = 0 cells; their lattice coordinates are base.
    """

    family = "grid"

    def __init__(self, n, extent, h=1):
        if n < 1 or extent < 1:
            raise ValueError("grid needs n >= 1 and extent >= 1")
        self.n = n
        self.extent = extent
        self.h = frac(h)
        if self.h <= 0:
            raise ValueError("edge length must be positive")
        self.top_dim = n
        self.kappa_sq = Fraction(n)
        self._radix = extent + 1
        self._vmax = self._radix ** n
        total = sum(self.num_cells(d) for d in range(n + 1))
        if (1 << n) * self._vmax > DEFAULT_CELL_BUDGET or total > DEFAULT_CELL_BUDGET:
            raise ResourceBudgetError(
                f"grid({n},{extent}) has {total} cells, over budget")

    # -- encoding ----------------------------------------------------------
    def encode(self, mask, base):
        idx = 0
        for a in range(self.n - 1, -1, -1):
            idx = idx * self._radix + base[a]
        return mask * self._vmax + idx

    def decode(self, cid):
        mask, idx = divmod(cid, self._vmax)
        base = []
        for _ in range(self.n):
            idx, r = divmod(idx, self._radix)
            base.append(r)
        return mask, tuple(base)

    def is_valid(self, cid):
        if cid < 0 or cid >= (1 << self.n) * self._vmax:
            return False
        mask, base = self.decode(cid)
        for a in range(self.n):
            hi = self.extent - 1 if (mask >> a) & 1 else self.extent
            if base[a] > hi:
                return False
        return True

    def dim_of(self, cid):
        mask, _ = self.decode(cid)
        return bin(mask).count("1")

    def volume(self, cid):
        return self.h ** self.dim_of(cid)

    def boundary(self, cid):
        mask, base = self.decode(cid)
        axes = [a for a in range(self.n) if (mask >> a) & 1]
        out = []
        sign = 1
        for a in axes:
            fmask = mask & ~(1 << a)
            lower = self.encode(fmask, base)
            upper_base = list(base)
            upper_base[a] += 1
            upper = self.encode(fmask, tuple(upper_base))
            out.append((upper, sign))
            out.append((lower, -sign))
            sign = -sign
        return out

    def vertices_of(self, cid):
        mask, base = self.decode(cid)
        axes = [a for a in range(self.n) if (mask >> a) & 1]
        verts = []
        for corner in range(1 << len(axes)):
            b = list(base)
            for j, a in enumerate(axes):
                if (corner >> j) & 1:
                    b[a] += 1
            verts.append(self.encode(0, tuple(b)))
        return tuple(verts)

    def num_cells(self, d):
        if d < 0 or d > self.n:
            return 0
        from math import comb
        return comb(self.n, d) * (self.extent + 1) ** (self.n - d) * self.extent ** d

    def _iter_cells(self, d):
        masks = [m for m in range(1 << self.n) if bin(m).count("1") == d]
        for mask in masks:
            ranges = [range(self.extent if (mask >> a) & 1 else self.extent + 1)
                      for a in range(self.n)]
            for base in product(*ranges):
                yield self.encode(mask, base)

    # -- metric ------------------------------------------------------------
    def lattice(self, vid):
        _, base = self.decode(vid)
        return base

    def coords(self, vid):
        return tuple(self.h * b for b in self.lattice(vid))

    def vertex_dist_sq(self, u, v):
        bu, bv = self.lattice(u), self.lattice(v)
        return self.h * self.h * sum((a - b) ** 2 for a, b in zip(bu, bv))

    def vertex_path_dist(self, u, v):
        bu, bv = self.lattice(u), self.lattice(v)
        return self.h * sum(abs(a - b) for a, b in zip(bu, bv))

    def vertex_edges(self, v):
        base = self.lattice(v)
        out = []
        for a in range(self.n):
            if base[a] < self.extent:
                b = list(base)
                eid = self.encode(1 << a, tuple(b))
                b[a] += 1
                out.append((eid, self.encode(0, tuple(b)), -1))
            if base[a] > 0:
                b = list(base)
                b[a] -= 1
                eid = self.encode(1 << a, tuple(b))
                out.append((eid, self.encode(0, tuple(b)), 1))
        return out

    def cell_box(self, cid):
        """Closed box of a cell in lattice units: (lo, hi) tuples."""
        mask, base = self.decode(cid)
        lo = base
        hi = tuple(b + (1 if (mask >> a) & 1 else 0) for a, b in enumerate(base))
        return lo, hi

    def point_cell_dist_sq(self, pt, cid):
        # pt: tuple of Fractions in lattice units
        lo, hi = self.cell_box(cid)
        acc = Fraction(0)
        for a in range(self.n):
            d = max(lo[a] - pt[a], pt[a] - hi[a], 0)
            acc += d * d
        return acc * self.h * self.h

    def barycenter(self, cid):
        lo, hi = self.cell_box(cid)
        return tuple(Fraction(l + u, 2) for l, u in zip(lo, hi))

    # -- refinement ----------------------------------------------------
    def refine(self, t):
        """Dyadic refinement by 2**t per axis; returns (fine, RefineMap)."""
        if t == 0:
            return self, RefineMap(self, self, 1)
        f = 1 << t
        fine = GridComplex(self.n, self.extent * f, self.h / f)
        return fine, RefineMap(self, fine, f)


class RefineMap:
    """Chain map from a complex into its dyadic refinement."""

    def __init__(self, coarse, fine, factor):
        self.coarse = coarse
        self.fine = fine
        self.factor = factor

    def vertex(self, vid):
        if self.factor == 1:
            return vid
        X, F = self.coarse, self.fine
        if X.family == "grid":
            base = X.lattice(vid)
            return F.encode(0, tuple(b * self.factor for b in base))
        a, b = X.split(vid)
        return F.join(X.tree_a.refined_vertex(a, self.factor),
                      X.tree_b.refined_vertex(b, self.factor))

    def cell_image(self, cid):
        """List of (fine_cell, sign) tiling the coarse cell."""
        if self.factor == 1:
            return [(cid, 1)]
        X, F, f = self.coarse, self.fine, self.factor
        if X.family == "grid":
            mask, base = X.decode(cid)
            axes = [a for a in range(X.n) if (mask >> a) & 1]
            ranges = [range(f) if (mask >> a) & 1 else range(1) for a in range(X.n)]
            out = []
            for off in product(*ranges):
                b = tuple(base[a] * f + off[a] for a in range(X.n))
                out.append((F.encode(mask, b), 1))
            return out
        return X._refined_product_cell(cid, F, f)

    def chain(self, T):
        from .chains import Chain
        acc = {}
        for cid, co in T.terms.items():
            for fc, sg in self.cell_image(cid):
                acc[fc] = acc.get(fc, 0) + co * sg
        return Chain(self.fine, T.dim, {c: v for c, v in acc.items() if v})


# ---------------------------------------------------------------------------
# rooted trees and their products
# ---------------------------------------------------------------------------

class RootedTree:
    """Rooted tree with explicit parent array; vertex 0 is the root."""

    def __init__(self, parent):
        self.parent = list(parent)
        if self.parent[0] != -1:
            raise ValueError("vertex 0 must be the root (parent -1)")
        self.V = len(self.parent)
        self.depth = [0] * self.V
        self.children = [[] for _ in range(self.V)]
        for v in range(1, self.V):
            p = self.parent[v]
            if not 0 <= p < v:
                raise ValueError("parents must precede children")
            self.depth[v] = self.depth[p] + 1
            self.children[p].append(v)

    @classmethod
    def uniform(cls, branching, depth):
        parent = [-1]
        frontier = [0]
        for _ in range(depth):
            nxt = []
            for p in frontier:
                for _ in range(branching):
                    parent.append(p)
                    nxt.append(len(parent) - 1)
            frontier = nxt
        return cls(parent)

    def lca_depth(self, u, v):
        while u != v:
            if self.depth[u] < self.depth[v]:
                u, v = v, u
            u = self.parent[u]
        return self.depth[u]

    def dist(self, u, v):
        return self.depth[u] + self.depth[v] - 2 * self.lca_depth(u, v)

    def subdivided(self, factor):
        """Each edge split into ``factor`` unit steps; originals keep ids
        scaled positionally (see refined_vertex)."""
        if factor == 1:
            return self
        parent = [-1]
        self._sub_map = {0: 0}
        for v in range(1, self.V):
            p = self.parent[v]
            prev = self._sub_map[p]
            for _ in range(factor - 1):
                parent.append(prev)
                prev = len(parent) - 1
            parent.append(prev)
            self._sub_map[v] = len(parent) - 1
        t = RootedTree(parent)
        t._orig_map = dict(self._sub_map)
        return t

    def refined_vertex(self, v, factor):
        if factor == 1:
            return v
        return self._sub_map[v]


class TreeProductComplex(MetricComplex):
    """Square complex T_a x T_b with edge length ``h`` on both factors.

    Tree cells: vertex v has id v; the edge from parent(v) to v has id
    V + v - 1.  Product cell id = a_id * (2 V_b - 1) + b_id.
    """

    family = "tree_product"

    def __init__(self, tree_a, tree_b, h=1):
        self.tree_a = tree_a
        self.tree_b = tree_b
        self.h = frac(h)
        self.top_dim = 2
        self.kappa_sq = Fraction(2)
        self._nb = 2 * tree_b.V - 1
        total = (2 * tree_a.V - 1) * self._nb
        if total > DEFAULT_CELL_BUDGET:
            raise ResourceBudgetError(
                f"tree product with {total} cells is over budget")

    # -- per-factor cells ----------------------------------------------
    @staticmethod
    def _tdim(tree, tcid):
        return 0 if tcid < tree.V else 1

    @staticmethod
    def _tends(tree, tcid):
        """(tail, head) = (parent, child) of a tree edge."""
        child = tcid - tree.V + 1
        return tree.parent[child], child

    def split(self, cid):
        return divmod(cid, self._nb)

    def join(self, a_id, b_id):
        return a_id * self._nb + b_id

    def dim_of(self, cid):
        a, b = self.split(cid)
        return self._tdim(self.tree_a, a) + self._tdim(self.tree_b, b)

    def volume(self, cid):
        return self.h ** self.dim_of(cid)

    def boundary(self, cid):
        a, b = self.split(cid)
        da = self._tdim(self.tree_a, a)
        db = self._tdim(self.tree_b, b)
        out = []
        if da == 1:
            tail, head = self._tends(self.tree_a, a)
            out.append((self.join(head, b), 1))
            out.append((self.join(tail, b), -1))
        if db == 1:
            sg = -1 if da == 1 else 1
            tail, head = self._tends(self.tree_b, b)
            out.append((self.join(a, head), sg))
            out.append((self.join(a, tail), -sg))
        return out

    def vertices_of(self, cid):
        a, b = self.split(cid)
        ends_a = (a,) if a < self.tree_a.V else self._tends(self.tree_a, a)
        ends_b = (b,) if b < self.tree_b.V else self._tends(self.tree_b, b)
        # corner bit 0 -> a factor, bit 1 -> b factor (when both are edges)
        verts = []
        for vb in ends_b:
            for va in ends_a:
                verts.append(self.join(va, vb))
        if len(ends_a) == 1 or len(ends_b) == 1:
            return tuple(verts)
        return (verts[0], verts[1], verts[2], verts[3])

    def num_cells(self, d):
        Va, Vb = self.tree_a.V, self.tree_b.V
        Ea, Eb = Va - 1, Vb - 1
        if d == 0:
            return Va * Vb
        if d == 1:
            return Va * Eb + Ea * Vb
        if d == 2:
            return Ea * Eb
        return 0

    def _iter_cells(self, d):
        Va, Vb = self.tree_a.V, self.tree_b.V
        if d == 0:
            for a in range(Va):
                for b in range(Vb):
                    yield self.join(a, b)
        elif d == 1:
            for a in range(Va):
                for b in range(Vb, 2 * Vb - 1):
                    yield self.join(a, b)
            for a in range(Va, 2 * Va - 1):
                for b in range(Vb):
                    yield self.join(a, b)
        elif d == 2:
            for a in range(Va, 2 * Va - 1):
                for b in range(Vb, 2 * Vb - 1):
                    yield self.join(a, b)

    # -- metric ----------------------------------------------------------
    def vertex_dist_sq(self, u, v):
        ua, ub = self.split(u)
        va, vb = self.split(v)
        da = self.tree_a.dist(ua, va)
        db = self.tree_b.dist(ub, vb)
        return self.h * self.h * (da * da + db * db)

    def vertex_path_dist(self, u, v):
        ua, ub = self.split(u)
        va, vb = self.split(v)
        return self.h * (self.tree_a.dist(ua, va) + self.tree_b.dist(ub, vb))

    def vertex_edges(self, v):
        va, vb = self.split(v)
        out = []
        ta, tb = self.tree_a, self.tree_b
        # a-direction edges
        if va != 0:
            eid = self.join(ta.V + va - 1, vb)
            out.append((eid, self.join(ta.parent[va], vb), 1))
        for ch in ta.children[va]:
            eid = self.join(ta.V + ch - 1, vb)
            out.append((eid, self.join(ch, vb), -1))
        # b-direction edges
        if vb != 0:
            eid = self.join(va, tb.V + vb - 1)
            out.append((eid, self.join(va, tb.parent[vb]), 1))
        for ch in tb.children[vb]:
            eid = self.join(va, tb.V + ch - 1)
            out.append((eid, self.join(va, ch), -1))
        return out

    # tree points: (vertex,) or (edge_child, t) with t in [0,1] from parent
    def _tree_point_vertex_dist(self, tree, pt, w):
        if len(pt) == 1:
            return Fraction(tree.dist(pt[0], w))
        child, t = pt
        par = tree.parent[child]
        return min(t + tree.dist(par, w), (1 - t) + tree.dist(child, w))

    def _tree_point_cell_dist(self, tree, pt, tcid):
        if tcid < tree.V:
            return self._tree_point_vertex_dist(tree, pt, tcid)
        tail, head = self._tends(tree, tcid)
        if len(pt) == 2 and pt[0] == head:
            return Fraction(0)
        return min(self._tree_point_vertex_dist(tree, pt, tail),
                   self._tree_point_vertex_dist(tree, pt, head))

    def point_cell_dist_sq(self, pt, cid):
        a, b = self.split(cid)
        da = self._tree_point_cell_dist(self.tree_a, pt[0], a)
        db = self._tree_point_cell_dist(self.tree_b, pt[1], b)
        return self.h * self.h * (da * da + db * db)

    def barycenter(self, cid):
        a, b = self.split(cid)
        pa = (a,) if a < self.tree_a.V else (a - self.tree_a.V + 1, Fraction(1, 2))
        pb = (b,) if b < self.tree_b.V else (b - self.tree_b.V + 1, Fraction(1, 2))
        return (pa, pb)

    def refine(self, t):
        if t == 0:
            return self, RefineMap(self, self, 1)
        f = 1 << t
        fa = self.tree_a.subdivided(f)
        fb = self.tree_b.subdivided(f)
        fine = TreeProductComplex(fa, fb, self.h / f)
        fine._coarse_maps = (self.tree_a._sub_map, self.tree_b._sub_map)
        return fine, RefineMap(self, fine, f)

    def _refined_product_cell(self, cid, fine, f):
        a, b = self.split(cid)
        out = []
        for fa, sa in self._refined_tree_cell(self.tree_a, fine.tree_a, a, f):
            da = self._tdim(fine.tree_a, fa)
            for fb, sb in self._refined_tree_cell(self.tree_b, fine.tree_b, b, f):
                out.append((fine.join(fa, fb), sa * sb))
        return out

    def _refined_tree_cell(self, tree, ftree, tcid, f):
        if tcid < tree.V:
            return [(tree.refined_vertex(tcid, f), 1)]
        tail, head = self._tends(tree, tcid)
        # the chain of f fine edges from refined(tail) down to refined(head)
        cur = tree.refined_vertex(head, f)
        stop = tree.refined_vertex(tail, f)
        out = []
        while cur != stop:
            out.append((ftree.V + cur - 1, 1))
            cur = ftree.parent[cur]
        return out


def build_grid(n, extent, h=1):
    return GridComplex(n, extent, h)


def build_tree_product(branching_a, branching_b, depth, h=1):
    ta = RootedTree.uniform(branching_a, depth)
    tb = RootedTree.uniform(branching_b, depth)
    return TreeProductComplex(ta, tb, h)


# ---------------------------------------------------------------------------
# custom cube complexes (explicit JSON)
# ---------------------------------------------------------------------------

class CustomCubeComplex(MetricComplex):
    family = "custom_cube"

    def __init__(self, cells, kappa=None, kappa_sq=None):
        """cells: dict cid -> (dim, volume, [(face, sign), ...])."""
        self._cells = cells
        if kappa_sq is not None:
            self.kappa_sq = frac(kappa_sq)
        elif kappa is not None:
            self.kappa_sq = frac(kappa) ** 2
        else:
            self.kappa_sq = Fraction(1)
        if self.kappa_sq < 1:
            raise ValueError("comparability constant must be >= 1")
        self.top_dim = max((d for d, _, _ in cells.values()), default=0)
        if len(cells) > DEFAULT_CELL_BUDGET:
            raise ResourceBudgetError("custom complex over cell budget")
        self._validate()
        self._dist_cache = {}

    def _validate(self):
        for cid, (d, vol, bdry) in self._cells.items():
            if vol <= 0:
                raise ValueError(f"cell {cid} has nonpositive volume")
            for f, sg in bdry:
                if f not in self._cells:
                    raise ValueError(f"cell {cid} references unknown face {f}")
                fd = self._cells[f][0]
                if fd != d - 1:
                    raise ValueError(f"cell {cid} (dim {d}) has face of dim {fd}")
                if sg not in (1, -1):
                    raise ValueError("boundary signs must be +-1")
        # del o del = 0, explicitly
        for cid, (d, _, bdry) in self._cells.items():
            if d < 2:
                continue
            acc = {}
            for f, sg in bdry:
                for g, sg2 in self._cells[f][2]:
                    acc[g] = acc.get(g, 0) + sg * sg2
            if any(acc.values()):
                raise ValueError(f"boundary of boundary nonzero at cell {cid}")
        self._check_links()

    def _check_links(self):
        """Gromov link condition, checked for dim <= 3; higher dims warned."""
        if self.top_dim > 3:
            warnings.warn("link condition not checked above dimension 3; "
                          "complex accepted on trust", stacklevel=3)
            return
        edges_at = {}
        for cid, (d, _, bdry) in self._cells.items():
            if d != 1:
                continue
            for v, _ in bdry:
                edges_at.setdefault(v, set()).add(cid)
        link_edges = {}   # vertex -> {frozenset(e1,e2): [squares]}
        for cid, (d, _, bdry) in self._cells.items():
            if d != 2:
                continue
            es = [f for f, _ in bdry]
            for v in self.support_vertices([cid]):
                at_v = [e for e in es if e in edges_at.get(v, ())]
                if len(at_v) != 2:
                    raise LinkConditionError(
                        f"square {cid} has {len(at_v)} edges at vertex {v}")
                key = frozenset(at_v)
                bucket = link_edges.setdefault(v, {})
                if key in bucket:
                    raise LinkConditionError(
                        f"doubled corner at vertex {v}: squares "
                        f"{bucket[key]} and {cid} share edges {sorted(key)}")
                bucket[key] = cid
        # triangles in each link must bound a cube corner
        cube_corners = {}
        for cid, (d, _, bdry) in self._cells.items():
            if d != 3:
                continue
            sqs = [f for f, _ in bdry]
            for v in self.support_vertices([cid]):
                at_v = [s for s in sqs if v in self.support_vertices([s])]
                cube_corners.setdefault(v, set()).add(frozenset(at_v))
        for v, bucket in link_edges.items():
            incident = sorted({e for key in bucket for e in key})
            adj = {e: set() for e in incident}
            for key in bucket:
                e1, e2 = sorted(key)
                adj[e1].add(e2)
                adj[e2].add(e1)
            for trio in combinations(incident, 3):
                if all(b in adj[a] for a, b in combinations(trio, 2)):
                    sq_trio = frozenset(bucket[frozenset(p)]
                                        for p in combinations(trio, 2))
                    if sq_trio not in cube_corners.get(v, ()):
                        raise LinkConditionError(
                            f"link of vertex {v} has an empty triangle "
                            f"{trio}: flag condition fails")

    def dim_of(self, cid):
        return self._cells[cid][0]

    def volume(self, cid):
        return self._cells[cid][1]

    def boundary(self, cid):
        return list(self._cells[cid][2])

    def vertices_of(self, cid):
        return tuple(sorted(self.support_vertices([cid])))

    def num_cells(self, d):
        return sum(1 for dd, _, _ in self._cells.values() if dd == d)

    def _iter_cells(self, d):
        return (c for c, (dd, _, _) in self._cells.items() if dd == d)

    def vertex_edges(self, v):
        if not hasattr(self, "_edge_adj"):
            adj = {}
            for cid, (d, _, bdry) in self._cells.items():
                if d != 1:
                    continue
                for w, sg in bdry:
                    other = [x for x, _ in bdry if x != w]
                    if not other:      # degenerate loop edge
                        continue
                    adj.setdefault(w, []).append((cid, other[0], sg))
            self._edge_adj = adj
        return self._edge_adj.get(v, [])

    def _path_dists_from(self, u):
        if u in self._dist_cache:
            return self._dist_cache[u]
        dist = {u: Fraction(0)}
        pq = [(Fraction(0), u)]
        while pq:
            d, v = heapq.heappop(pq)
            if d > dist[v]:
                continue
            for eid, w, _ in self.vertex_edges(v):
                nd = d + self.volume(eid)
                if w not in dist or nd < dist[w]:
                    dist[w] = nd
                    heapq.heappush(pq, (nd, w))
        if len(self._dist_cache) < 512:
            self._dist_cache[u] = dist
        return dist

    def vertex_path_dist(self, u, v):
        d = self._path_dists_from(u).get(v)
        if d is None:
            raise ValueError(f"vertices {u}, {v} are not connected")
        return d

    def vertex_dist_sq(self, u, v):
        # no embedding: the path metric is the upper bound; callers wanting
        # the certified interval use distance_bounds
        d = self.vertex_path_dist(u, v)
        return d * d

    def distance_bounds(self, u, v):
        """(lower, upper) for the model metric: path/kappa and path."""
        d = self.vertex_path_dist(u, v)
        return d * d / self.kappa_sq, d * d

    def point_cell_dist_sq(self, pt, cid):
        raise UnsupportedOperationError(
            "custom cube complexes carry no embedding; "
            "use vertex path distances")

    def barycenter(self, cid):
        raise UnsupportedOperationError(
            "custom cube complexes carry no embedding")


def load_custom_complex(path):
    with open(path) as fh:
        doc = json.load(fh)
    metric = doc.get("metric", {})
    if metric.get("kind") not in ("custom_cube", None):
        raise ValueError(f"unsupported metric kind {metric.get('kind')!r}")
    cells = {}
    for rec in doc["cells"]:
        cells[int(rec["id"])] = (
            int(rec["dim"]),
            frac(str(rec["volume"])),
            [(int(f), int(sg)) for f, sg in rec.get("boundary", [])],
        )
    ksq = metric.get("kappa_sq")
    if ksq is not None:
        return CustomCubeComplex(cells, kappa_sq=frac(str(ksq)))
    return CustomCubeComplex(cells, kappa=metric.get("kappa", 1))


def save_custom_complex(X, path):
    recs = []
    for d in range(X.top_dim + 1):
        for cid in X.cells(d):
            recs.append({
                "id": cid,
                "dim": d,
                "volume": str(X.volume(cid)),
                "boundary": [[f, sg] for f, sg in X.boundary(cid)],
            })
    with open(path, "w") as fh:
        json.dump({"cells": recs,
                   "metric": {"kind": "custom_cube",
                              "kappa_sq": str(X.kappa_sq)}}, fh)


# ---------------------------------------------------------------------------
# shared geometric operations
# ---------------------------------------------------------------------------

def distance_sq(X, u, v):
    """Exact squared model distance between vertices."""
    return X.vertex_dist_sq(u, v)


def distance(X, u, v):
    """Model distance between vertices (float view; exact core is
    distance_sq).  For custom complexes this is the path-metric upper
    bound; distance_bounds gives the certified interval."""
    from .exact import float_sqrt
    return float_sqrt(X.vertex_dist_sq(u, v))


def geodesic_edges(X, p, q):
    """Shortest 1-skeleton path from p to q as [(edge_id, sign)], where
    sign +1 means the edge is traversed tail->head.  Among shortest paths
    the lexicographically least edge-id sequence is returned."""
    if p == q:
        return []
    # Dijkstra from q, then greedy walk from p picking the least edge id
    # that stays on a shortest path.
    dist = {q: Fraction(0)}
    pq = [(Fraction(0), q)]
    seen = set()
    while pq:
        d, v = heapq.heappop(pq)
        if v in seen:
            continue
        seen.add(v)
        if v == p:
            pass  # keep relaxing; full distances are cheap at desk scale
        for eid, w, _ in X.vertex_edges(v):
            nd = d + X.volume(eid)
            if w not in dist or nd < dist[w]:
                dist[w] = nd
                heapq.heappush(pq, (nd, w))
    if p not in dist:
        raise ValueError("no path between the given vertices")
    out = []
    v = p
    while v != q:
        best = None
        for eid, w, sg in X.vertex_edges(v):
            if w in dist and dist[w] + X.volume(eid) == dist[v]:
                if best is None or eid < best[0]:
                    # sign at v is -1 when v is the tail; traversal sign is
                    # +1 exactly in that case
                    best = (eid, w, -sg)
        if best is None:
            raise RuntimeError("geodesic walk lost the shortest-path field")
        out.append((best[0], best[2]))
        v = best[1]
    return out


def neighborhood(X, cids, r):
    """Cells whose barycenter lies within model distance r of the closed
    input set; r = 0 gives the face closure.  r may be int/Fraction."""
    r = frac(r)
    base = X.closure(cids)
    if r == 0:
        return base
    if X.family == "custom_cube":
        # no embedding: 1-skeleton distance between vertex sets
        src = X.support_vertices(cids)
        out = set(base)
        for d in range(X.top_dim + 1):
            for cid in X.cells(d):
                verts = X.vertices_of(cid)
                ok = False
                for v in verts:
                    for u in src:
                        if X.vertex_path_dist(u, v) <= r:
                            ok = True
                            break
                    if ok:
                        break
                if ok:
                    out.add(cid)
        return X.closure(out)

    rsq = r * r
    out = set(base)
    targets = list(base)
    if X.family == "grid":
        # inflate the lattice bounding box by ceil(r/h) + 1
        pad = int((r / X.h).__ceil__()) + 1
        los = [min(X.cell_box(c)[0][a] for c in targets) for a in range(X.n)]
        his = [max(X.cell_box(c)[1][a] for c in targets) for a in range(X.n)]
        los = [max(0, l - pad) for l in los]
        ranges_hi = [min(X.extent, h0 + pad) for h0 in his]
        for mask in range(1 << X.n):
            axes_rngs = []
            for a in range(X.n):
                hi = ranges_hi[a] - (1 if (mask >> a) & 1 else 0)
                axes_rngs.append(range(los[a], hi + 1))
            for bb in product(*axes_rngs):
                cid = X.encode(mask, bb)
                if cid in out:
                    continue
                b = X.barycenter(cid)
                if any(X.point_cell_dist_sq(b, tc) <= rsq for tc in targets):
                    out.add(cid)
    else:
        # tree product: walk outward from the support through the vertex
        # graph, testing cells incident to visited vertices
        verts = set()
        for c in targets:
            verts.update(X.vertices_of(c))
        frontier = set(verts)
        seen = set(verts)
        steps = int((r / X.h).__ceil__()) + 2
        for _ in range(steps):
            nxt = set()
            for v in frontier:
                for _, w, _ in X.vertex_edges(v):
                    if w not in seen:
                        seen.add(w)
                        nxt.add(w)
            frontier = nxt
        cand = set()
        for v in seen:
            cand.update(_cells_at_vertex(X, v))
        for cid in cand:
            if cid in out:
                continue
            b = X.barycenter(cid)
            if any(X.point_cell_dist_sq(b, tc) <= rsq for tc in targets):
                out.add(cid)
    return X.closure(out)


def _cells_at_vertex(X, v):
    """All cells having v among their corners (structured families)."""
    if X.family == "grid":
        base = X.lattice(v)
        out = []
        for mask in range(1 << X.n):
            lows = []
            ok = True
            for a in range(X.n):
                if (mask >> a) & 1:
                    lo = [base[a] - 1, base[a]]
                    lows.append([x for x in lo if 0 <= x <= X.extent - 1])
                    if not lows[-1]:
                        ok = False
                        break
                else:
                    lows.append([base[a]])
            if not ok:
                continue
            for combo in product(*lows):
                out.append(X.encode(mask, tuple(combo)))
        return out
    va, vb = X.split(v)
    ta, tb = X.tree_a, X.tree_b
    cells_a = [va]
    if va != 0:
        cells_a.append(ta.V + va - 1)
    cells_a.extend(ta.V + ch - 1 for ch in ta.children[va])
    cells_b = [vb]
    if vb != 0:
        cells_b.append(tb.V + vb - 1)
    cells_b.extend(tb.V + ch - 1 for ch in tb.children[vb])
    return [X.join(a, b) for a in cells_a for b in cells_b]
