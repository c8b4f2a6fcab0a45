"""Filling constructors.

min_filling solves the minimal-mass filling problem as an integer
program over a bounded cell region: variables are coefficients of
(k+1)-cells split into positive and negative parts, constraints say the
boundary equals the target cycle, the objective is volume-weighted l1
mass.  The LP relaxation (HiGHS) is solved first; an integral optimum is
re-verified in exact arithmetic and accepted, otherwise a small branch
and bound on the net coefficients finishes the job.

cone_filling is the constructive route: axis sweeps toward a vertex in
grid complexes, stepwise geodesic combing in tree products.  Prism
operators satisfy the homotopy identity del P(c) + P(del c) =
collapse(c) - c, so the accumulated sweep fills exactly.

Minimizing simplices are built inductively through a shared store keyed
on sorted vertex tuples; shared faces are therefore literally shared,
which makes alternating sums over simplices telescope exactly.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import permutations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .exact import frac, sqrt_ceil, float_sqrt
from .chains import Chain, geodesic_path
from .complexes import UnsupportedOperationError


class HomologyObstructionError(ValueError):
    """The cycle bounds nothing inside the allowed region."""


class FillingBudgetError(RuntimeError):
    def __init__(self, msg, best_bound=None, best_chain=None):
        super().__init__(msg)
        self.best_bound = best_bound
        self.best_chain = best_chain


class FillingResult:
    def __init__(self, chain, method, optimal, lower_bound=None, **extras):
        self.chain = chain
        self.mass = chain.mass()
        self.method = method
        self.optimal = optimal
        self.lower_bound = lower_bound
        self.extras = extras

    def __repr__(self):
        return (f"<Filling {self.method} mass={float(self.mass):.5g} "
                f"optimal={self.optimal}>")


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

def hull_region(X, cells):
    """A region guaranteed to admit a sweep filling of any cycle whose
    support closure lies in ``cells``: the box hull (grid), the product
    of spanning subtrees (tree product), or a path-radius neighborhood
    (custom)."""
    verts = X.support_vertices(cells)
    if X.family == "grid":
        from itertools import product as iproduct
        coords = [X.lattice(v) for v in verts]
        lo = [min(c[a] for c in coords) for a in range(X.n)]
        hi = [max(c[a] for c in coords) for a in range(X.n)]
        out = set()
        for mask in range(1 << X.n):
            rngs = []
            for a in range(X.n):
                top = hi[a] - 1 if (mask >> a) & 1 else hi[a]
                rngs.append(range(lo[a], top + 1))
            for b in iproduct(*rngs):
                out.add(X.encode(mask, b))
        return out
    if X.family == "tree_product":
        va = {X.split(v)[0] for v in verts}
        vb = {X.split(v)[1] for v in verts}
        ha = _tree_hull(X.tree_a, va)
        hb = _tree_hull(X.tree_b, vb)
        ca = sorted(ha) + [X.tree_a.V + v - 1 for v in sorted(ha) if
                           v != 0 and X.tree_a.parent[v] in ha and v in ha]
        cb = sorted(hb) + [X.tree_b.V + v - 1 for v in sorted(hb) if
                           v != 0 and X.tree_b.parent[v] in hb and v in hb]
        return {X.join(a, b) for a in ca for b in cb}
    # custom: everything within twice the path diameter
    from .complexes import neighborhood
    verts = sorted(verts)
    dmax = Fraction(0)
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            d = X.vertex_path_dist(verts[i], verts[j])
            if d > dmax:
                dmax = d
    return neighborhood(X, cells, 2 * dmax + 2 * min(
        X.volume(e) for e in X.cells(1)))


def _tree_hull(tree, verts):
    """Vertices of the minimal subtree spanning a vertex set."""
    verts = set(verts)
    if not verts:
        return {0}
    # lift everything to the shallowest common ancestor, marking paths
    hull = set(verts)
    while len(verts) > 1:
        deepest = max(verts, key=lambda v: tree.depth[v])
        verts.discard(deepest)
        p = tree.parent[deepest]
        hull.add(p)
        verts.add(p)
    return hull


# ---------------------------------------------------------------------------
# integer-program filling
# ---------------------------------------------------------------------------

def _lp_data(X, T, var_cells):
    rows = {}
    entries = []        # (row, col, sign)
    for j, c in enumerate(var_cells):
        for f, sg in X.boundary(c):
            r = rows.setdefault(f, len(rows))
            entries.append((r, j, sg))
    for f in T.support():
        rows.setdefault(f, len(rows))
    b = np.zeros(len(rows))
    for f, co in T.terms.items():
        b[rows[f]] = co
    n = len(var_cells)
    data = [sg for _, _, sg in entries] + [-sg for _, _, sg in entries]
    ri = [r for r, _, _ in entries] * 2
    ci = [j for _, j, _ in entries] + [j + n for _, j, _ in entries]
    A = sparse.coo_matrix((data, (ri, ci)), shape=(len(rows), 2 * n)).tocsc()
    vols = np.array([float(X.volume(c)) for c in var_cells])
    cost = np.concatenate([vols, vols])
    return A, b, cost


def _solve_node(A, b, cost, n, branches):
    """LP with extra bounds on net coefficients; branches is a list of
    (var, sense, value) with sense in ('le', 'ge')."""
    A_ub = None
    b_ub = None
    if branches:
        rows, cols, data, rhs = [], [], [], []
        for i, (j, sense, val) in enumerate(branches):
            sg = 1 if sense == "le" else -1
            rows += [i, i]
            cols += [j, j + n]
            data += [sg, -sg]
            rhs.append(sg * val)
        A_ub = sparse.coo_matrix((data, (rows, cols)),
                                 shape=(len(branches), 2 * n)).tocsc()
        b_ub = np.array(rhs, dtype=float)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A, b_eq=b,
                  bounds=(0, None), method="highs")
    return res


def _near_integral(x, n):
    net = x[:n] - x[n:]
    r = np.round(net)
    return (np.abs(net - r).max(initial=0.0) < 1e-6), r.astype(int)


def min_filling(T, region=None, node_budget=400, _retried=False):
    """Minimal-mass integer filling of the cycle T within a cell region.

    Returns a FillingResult whose chain V satisfies boundary(V) = T
    exactly; optimal=True comes with the LP lower-bound certificate.
    """
    X = T.complex
    if not T.boundary().is_zero():
        raise ValueError("min_filling needs a cycle")
    if T.is_zero():
        return FillingResult(Chain.zero(X, T.dim + 1), "trivial", True, 0.0)
    if region is None:
        region = hull_region(X, T.support())
        # box hulls and subtree-product hulls absorb a 1-Lipschitz
        # retraction of the whole space, so no optimum leans on their
        # frontier; the regrow pass would only repeat the solve
        if X.family in ("grid", "tree_product"):
            _retried = True
    var_cells = sorted(c for c in region if X.dim_of(c) == T.dim + 1)
    if not var_cells:
        raise HomologyObstructionError("region has no cells one dimension up")
    A, b, cost = _lp_data(X, T, var_cells)
    n = len(var_cells)
    res = _solve_node(A, b, cost, n, [])
    if res.status == 2:
        if not _retried:
            grown = _grow_region(X, region, T)
            return min_filling(T, grown, node_budget, _retried=True)
        raise HomologyObstructionError(
            "cycle is not a boundary within the search region")
    if res.status != 0:
        raise RuntimeError(f"LP solver failure: {res.message}")
    ok, net = _near_integral(res.x, n)
    if ok:
        V = Chain(X, T.dim + 1,
                  {c: int(v) for c, v in zip(var_cells, net) if v})
        if V.boundary() == T:
            result = FillingResult(V, "lp-integral", True,
                                   lower_bound=res.fun)
            return _frontier_check(result, T, region, var_cells,
                                   node_budget, _retried)
    result = _branch_and_bound(X, T, var_cells, A, b, cost, res,
                               node_budget)
    return _frontier_check(result, T, region, var_cells, node_budget,
                           _retried)


def _mesh_h(X):
    if hasattr(X, "h"):
        return X.h
    return min(X.volume(e) for e in X.cells(1))


def _grow_region(X, region, T):
    pad = sqrt_ceil(T.diam_sq()) + 2 * _mesh_h(X)
    from .complexes import neighborhood
    return neighborhood(X, region, pad)


def _frontier_check(result, T, region, var_cells, node_budget, _retried):
    """If the optimum leans on the region frontier, retry once, grown."""
    if _retried or result.chain.is_zero():
        return result
    X = T.complex
    var_set = set(var_cells)
    frontier = _frontier_cells(X, var_set)
    if not (result.chain.support() & frontier):
        return result
    grown = _grow_region(X, region, T)
    regrown = min_filling(T, grown, node_budget, _retried=True)
    return regrown if regrown.mass < result.mass else result


def _frontier_cells(X, var_set):
    out = set()
    for c in var_set:
        for f, _ in X.boundary(c):
            for g, _ in _cofaces(X, f):
                if g not in var_set:
                    out.add(c)
                    break
            else:
                continue
            break
    return out


def _cofaces(X, f):
    # only needed on small regions; structured families recompute locally
    if X.family == "grid":
        mask, base = X.decode(f)
        out = []
        for a in range(X.n):
            if (mask >> a) & 1:
                continue
            if base[a] < X.extent:
                out.append((X.encode(mask | (1 << a), base), 1))
            if base[a] > 0:
                nb = list(base)
                nb[a] -= 1
                out.append((X.encode(mask | (1 << a), tuple(nb)), 1))
        return out
    if X.family == "tree_product":
        a, bb = X.split(f)
        ta, tb = X.tree_a, X.tree_b
        out = []
        da = 0 if a < ta.V else 1
        db = 0 if bb < tb.V else 1
        if da == 0:
            others = ([ta.V + a - 1] if a != 0 else []) + \
                [ta.V + ch - 1 for ch in ta.children[a]]
            out += [(X.join(e, bb), 1) for e in others]
        if db == 0:
            others = ([tb.V + bb - 1] if bb != 0 else []) + \
                [tb.V + ch - 1 for ch in tb.children[bb]]
            out += [(X.join(a, e), 1) for e in others]
        return out
    out = []
    for cid in X.cells(X.dim_of(f) + 1):
        if any(g == f for g, _ in X.boundary(cid)):
            out.append((cid, 1))
    return out


def _branch_and_bound(X, T, var_cells, A, b, cost, root, node_budget):
    n = len(var_cells)
    best_chain = None
    best_mass = None
    nodes = [(root.fun, [])]
    visited = 0
    while nodes:
        nodes.sort(key=lambda t: t[0])
        bound, branches = nodes.pop(0)
        if best_mass is not None and bound >= float(best_mass) - 1e-9:
            continue
        visited += 1
        if visited > node_budget:
            raise FillingBudgetError(
                f"branch and bound exceeded {node_budget} nodes",
                best_bound=bound,
                best_chain=best_chain)
        res = _solve_node(A, b, cost, n, branches)
        if res.status != 0:
            continue
        ok, net = _near_integral(res.x, n)
        if ok:
            V = Chain(X, T.dim + 1,
                      {c: int(v) for c, v in zip(var_cells, net) if v})
            if V.boundary() == T:
                m = V.mass()
                if best_mass is None or m < best_mass:
                    best_mass, best_chain = m, V
            continue
        netv = res.x[:n] - res.x[n:]
        fracs = np.abs(netv - np.round(netv))
        j = int(np.argmax(fracs))
        lo = math.floor(netv[j])
        nodes.append((res.fun, branches + [(j, "le", lo)]))
        nodes.append((res.fun, branches + [(j, "ge", lo + 1)]))
    if best_chain is None:
        raise HomologyObstructionError(
            "no integer filling found in region (LP feasible)")
    return FillingResult(best_chain, "branch-and-bound", True,
                         lower_bound=float(best_mass))


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_filling(T, region=None, coeff_bound=2):
    """Exhaustive minimal filling over the coefficient box, by pruned DFS.

    Independent of the LP path on purpose: incidence is re-derived here
    and the search is plain enumeration.  Two passes: one ordered by
    coefficient magnitude to pin the optimal mass quickly, then one in
    ascending coefficient order that returns the lexicographically least
    optimum.  Intended for small regions.
    """
    X = T.complex
    if not T.boundary().is_zero():
        raise ValueError("needs a cycle")
    if region is None:
        region = hull_region(X, T.support())
    cells = sorted(c for c in region if X.dim_of(c) == T.dim + 1)
    faces = {}
    for c in cells:
        for f, sg in X.boundary(c):
            faces.setdefault(f, []).append((c, sg))
    for f in T.terms:
        if f not in faces:
            raise HomologyObstructionError(
                f"target face {f} touched by no region cell")
    target = {f: T.terms.get(f, 0) for f in faces}
    bdries = [X.boundary(c) for c in cells]
    vols = [X.volume(c) for c in cells]
    # rem[f]: cells not yet assigned that still touch f; a face whose
    # remaining room cannot absorb its deficit kills the branch early
    rem0 = {f: len(owners) for f, owners in faces.items()}

    def search(value_order, mass_cap, stop_first):
        best = {"mass": mass_cap, "coeffs": None}
        partial = {f: 0 for f in faces}
        rem = dict(rem0)
        coeffs = [0] * len(cells)

        def dfs(i, mass):
            if best["mass"] is not None:
                if stop_first and best["coeffs"] is not None:
                    return
                if (mass > best["mass"] or
                        (not stop_first and mass >= best["mass"]
                         and best["coeffs"] is not None)):
                    return
            if i == len(cells):
                if all(partial[f] == target[f] for f in faces):
                    best["mass"] = mass
                    best["coeffs"] = list(coeffs)
                return
            bdry = bdries[i]
            for f, _ in bdry:
                rem[f] -= 1
            for v in value_order:
                coeffs[i] = v
                ok = True
                for f, sg in bdry:
                    partial[f] += v * sg
                for f, _ in bdry:
                    if abs(target[f] - partial[f]) > coeff_bound * rem[f]:
                        ok = False
                        break
                if ok:
                    dfs(i + 1, mass + abs(v) * vols[i])
                for f, sg in bdry:
                    partial[f] -= v * sg
                if stop_first and best["coeffs"] is not None:
                    break
            coeffs[i] = 0
            for f, _ in bdry:
                rem[f] += 1

        dfs(0, Fraction(0))
        return best

    fast = sorted(range(-coeff_bound, coeff_bound + 1),
                  key=lambda v: (abs(v), v))
    first = search(fast, None, stop_first=False)
    if first["coeffs"] is None:
        raise HomologyObstructionError("no filling in coefficient box")
    lex = search(list(range(-coeff_bound, coeff_bound + 1)),
                 first["mass"], stop_first=True)
    V = Chain(X, T.dim + 1,
              {c: v for c, v in zip(cells, lex["coeffs"]) if v})
    assert V.boundary() == T
    return FillingResult(V, "brute-force", True, float(lex["mass"]))


# ---------------------------------------------------------------------------
# cone fillings by sweep
# ---------------------------------------------------------------------------

def _grid_axis_prism(X, T, a, za):
    """Prism P_a(T) and the collapsed pushforward along axis a."""
    prism = {}
    collapsed = {}
    for cid, co in T.terms.items():
        mask, base = X.decode(cid)
        if (mask >> a) & 1:
            # cells extended along the axis die; no prism term
            continue
        pos = bin(mask & ((1 << a) - 1)).count("1")
        ba = base[a]
        if ba != za:
            direction = 1 if ba < za else -1
            sgn = direction * (-1) ** pos
            lo, hi = (ba, za) if ba < za else (za, ba)
            nb = list(base)
            for t in range(lo, hi):
                nb[a] = t
                pc = X.encode(mask | (1 << a), tuple(nb))
                w = prism.get(pc, 0) + sgn * co
                if w:
                    prism[pc] = w
                else:
                    prism.pop(pc, None)
        nb = list(base)
        nb[a] = za
        cc = X.encode(mask, tuple(nb))
        w = collapsed.get(cc, 0) + co
        if w:
            collapsed[cc] = w
        else:
            collapsed.pop(cc, None)
    return (Chain(X, T.dim + 1, prism), Chain(X, T.dim, collapsed))


def _grid_cone(X, T, z):
    zb = X.lattice(z)
    best = None
    for order in permutations(range(X.n)):
        V = Chain.zero(X, T.dim + 1)
        cur = T
        for a in order:
            P, nxt = _grid_axis_prism(X, cur, a, zb[a])
            V = V - P
            cur = nxt
        if not cur.is_zero():
            raise RuntimeError("sweep failed to collapse the cycle")
        if best is None or V.mass() < best.mass():
            best = V
    return best


def _tree_step_map(tree, target):
    """vertex -> one step along the tree geodesic toward target."""
    anc = set()
    v = target
    while True:
        anc.add(v)
        if v == 0:
            break
        v = tree.parent[v]

    def step(v):
        if v == target:
            return v
        if v in anc:
            # descend: the child of v on the target's ancestor path
            w = target
            while tree.parent[w] != v:
                w = tree.parent[w]
            return w
        return tree.parent[v]
    return step


def _acc(d, key, val):
    w = d.get(key, 0) + val
    if w:
        d[key] = w
    else:
        d.pop(key, None)


def _treeprod_factor_sweep(X, T, factor, target):
    """One combing step of every cell along the given factor.

    Returns (prism chain, stepped chain).  Factor edges shift or die and
    carry no prism; factor vertices sweep out the edge to their step.
    Signs follow the product rule with the moving factor first.
    """
    tree = X.tree_a if factor == 0 else X.tree_b
    step = _tree_step_map(tree, target)
    prism = {}
    stepped = {}
    for cid, co in T.terms.items():
        a, b = X.split(cid)
        fc, oc = (a, b) if factor == 0 else (b, a)
        if fc >= tree.V:
            tail, head = X._tends(tree, fc)
            nt, nh = step(tail), step(head)
            if nt == nh:
                continue
            if tree.parent[nh] == nt:
                ne, sg = tree.V + nh - 1, 1
            elif tree.parent[nt] == nh:
                ne, sg = tree.V + nt - 1, -1
            else:
                raise RuntimeError("tree step broke an edge")
            ncid = X.join(ne, oc) if factor == 0 else X.join(oc, ne)
            _acc(stepped, ncid, sg * co)
            continue
        w1 = step(fc)
        if w1 == fc:
            _acc(stepped, cid, co)
            continue
        if tree.parent[w1] == fc:
            e, direction = tree.V + w1 - 1, 1
        else:
            e, direction = tree.V + fc - 1, -1
        if factor == 0:
            pc = X.join(e, oc)
            sgn = direction
        else:
            pc = X.join(oc, e)
            sgn = direction * (-1) ** X._tdim(X.tree_a, oc)
        _acc(prism, pc, sgn * co)
        ncid = X.join(w1, oc) if factor == 0 else X.join(oc, w1)
        _acc(stepped, ncid, co)
    return Chain(X, T.dim + 1, prism), Chain(X, T.dim, stepped)


def _treeprod_cone(X, T, z):
    za, zb = X.split(z)
    best = None
    for first, second, ta, tb in ((0, 1, za, zb), (1, 0, zb, za)):
        V = Chain.zero(X, T.dim + 1)
        cur = T
        for factor, tgt in ((first, ta), (second, tb)):
            guard = 0
            while True:
                P, nxt = _treeprod_factor_sweep(X, cur, factor, tgt)
                V = V - P
                if nxt == cur:
                    break
                cur = nxt
                guard += 1
                if guard > 4 * (max(X.tree_a.depth) + max(X.tree_b.depth) + 2):
                    raise RuntimeError("combing did not terminate")
        if not cur.is_zero():
            raise RuntimeError("combing failed to collapse the cycle")
        if best is None or V.mass() < best.mass():
            best = V
    return best


def cone_filling(T, z):
    """Sweep filling of the cycle T toward vertex z; exact boundary."""
    X = T.complex
    if T.is_zero():
        return FillingResult(Chain.zero(X, T.dim + 1), "cone", False, 0.0)
    if not T.boundary().is_zero():
        raise ValueError("cone_filling needs a cycle")
    if X.family == "grid":
        if not X.is_valid(z) or X.dim_of(z) != 0:
            raise ValueError("cone vertex not in the complex")
        V = _grid_cone(X, T, z)
    elif X.family == "tree_product":
        V = _treeprod_cone(X, T, z)
    else:
        raise UnsupportedOperationError(
            "sweep cones need a structured family; use min_filling")
    if V.boundary() != T:
        raise AssertionError("sweep filling has the wrong boundary")
    r_path = max(X.vertex_path_dist(z, v) for v in T.support_vertices())
    r_model_sq = max(X.vertex_dist_sq(z, v) for v in T.support_vertices())
    r = float_sqrt(r_model_sq)
    ratio = float(V.mass()) / (r * float(T.mass())) if r > 0 else 0.0
    return FillingResult(V, "cone", False, None,
                         radius_path=r_path, radius=r, kappa_ratio=ratio)


def cone_point(T):
    """Default cone vertex: the least support vertex."""
    return min(T.support_vertices())


# ---------------------------------------------------------------------------
# euclidean-type absolute filling
# ---------------------------------------------------------------------------

def _fill_zero_cycle(T):
    """Fill a 0-cycle by geodesic paths pairing negatives to positives."""
    X = T.complex
    if sum(T.terms.values()) != 0:
        raise HomologyObstructionError("0-cycle has nonzero degree")
    pos, neg = [], []
    for v in sorted(T.terms):
        c = T.terms[v]
        (pos if c > 0 else neg).extend([v] * abs(c))
    V = Chain.zero(X, 1)
    for p, q in zip(neg, pos):
        V = V + geodesic_path(X, p, q)
    return V


def euclidean_filling(T, _depth=0):
    """Absolute filling with Euclidean-type mass growth: round pieces are
    split off greedily and each is coned from a support vertex."""
    X = T.complex
    if T.is_zero():
        return FillingResult(Chain.zero(X, T.dim + 1), "euclidean", False, 0.0)
    if T.dim == 0:
        V = _fill_zero_cycle(T)
        assert V.boundary() == T
        return FillingResult(V, "euclidean", False, None)
    if not T.boundary().is_zero():
        raise ValueError("euclidean_filling needs a cycle")
    if _depth > 8:
        raise RuntimeError("euclidean filling recursion ran away")
    from .driver import round_decompose
    V = Chain.zero(X, T.dim + 1)
    cur = T
    guard = 0
    while not cur.is_zero():
        residual, rounds = round_decompose(cur)
        if not rounds:
            rounds = [residual]
            residual = Chain.zero(X, T.dim)
        for R in rounds:
            V = V + _cone_or_solve(R, _depth)
        if residual == cur:
            raise RuntimeError("round decomposition made no progress")
        cur = residual
        guard += 1
        if guard > 64:
            raise RuntimeError("euclidean filling loop cap hit")
    assert V.boundary() == T
    k = T.dim
    ratio = float(V.mass()) / float(T.mass()) ** (1 + 1 / k)
    return FillingResult(V, "euclidean", False, None, gamma_ratio=ratio)


def _cone_or_solve(R, _depth):
    X = R.complex
    if X.family in ("grid", "tree_product"):
        return cone_filling(R, cone_point(R)).chain
    return min_filling(R).chain


# ---------------------------------------------------------------------------
# minimizing simplices
# ---------------------------------------------------------------------------

MAX_SIMPLEX_DIM = 4


class SimplexStore:
    """Shared memo of simplex chains keyed by sorted vertex tuples.

    Chains are built inductively: geodesic edges, then minimal fillings
    of the alternating face sums.  A shared face is a shared object, so
    alternating sums over adjacent simplices cancel exactly.
    """

    def __init__(self, X, node_budget=400, rule="min"):
        if rule not in ("min", "cone"):
            raise ValueError("rule must be 'min' or 'cone'")
        self.X = X
        self.node_budget = node_budget
        self.rule = rule
        self._chains = {}
        self.non_minimizing = set()

    def simplex(self, verts):
        """Chain of the oriented simplex; repeated vertices give zero."""
        verts = tuple(verts)
        k = len(verts) - 1
        if k > MAX_SIMPLEX_DIM:
            raise ValueError(f"simplex dimension {k} above cap")
        if len(set(verts)) != len(verts):
            return Chain.zero(self.X, k)
        key = tuple(sorted(verts))
        sign = _parity(verts, key)
        base = self._get(key)
        return base if sign == 1 else -base

    def _get(self, key):
        if key in self._chains:
            return self._chains[key]
        k = len(key) - 1
        if k == 0:
            C = Chain.vertex(self.X, key[0])
        elif k == 1:
            C = geodesic_path(self.X, key[0], key[1])
        else:
            B = Chain.zero(self.X, k - 1)
            for i in range(len(key)):
                face = key[:i] + key[i + 1:]
                B = B + (-1) ** i * self._get(face)
            if B.is_zero():
                C = Chain.zero(self.X, k)
            elif self.rule == "cone":
                # geodesic-cone realization: the computable stand-in for
                # the affine image of the simplex
                C = _cone_or_solve(B, 0)
            else:
                try:
                    region = hull_region(self.X, set(B.support()) | set(key))
                    C = min_filling(B, region,
                                    node_budget=self.node_budget).chain
                except FillingBudgetError:
                    C = _cone_or_solve(B, 0)
                    self.non_minimizing.add(key)
        self._chains[key] = C
        return C

    def is_minimizing(self, verts):
        return tuple(sorted(verts)) not in self.non_minimizing


def _parity(seq, sorted_seq):
    seq = list(seq)
    sign = 1
    for i in range(len(sorted_seq)):
        if seq[i] != sorted_seq[i]:
            j = seq.index(sorted_seq[i], i + 1)
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


class MinimizingSimplex:
    def __init__(self, store, vertices):
        self.store = store
        self.vertices = tuple(vertices)
        self.chain = store.simplex(self.vertices)
        self.minimizing = store.is_minimizing(self.vertices)

    @property
    def mass(self):
        return self.chain.mass()

    def mesh(self) -> Fraction:
        """Largest geodesic edge length among the vertex pairs."""
        vs = sorted(set(self.vertices))
        out = Fraction(0)
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                m = self.store.simplex((vs[i], vs[j])).mass()
                if m > out:
                    out = m
        return out

    def boundary_identity_holds(self):
        B = Chain.zero(self.store.X, len(self.vertices) - 2)
        for i in range(len(self.vertices)):
            face = self.vertices[:i] + self.vertices[i + 1:]
            B = B + (-1) ** i * self.store.simplex(face)
        return self.chain.boundary() == B


def minimizing_simplex(X, vertices, store=None):
    store = store or SimplexStore(X)
    return MinimizingSimplex(store, vertices)


def fill_piecewise_minimizing(store, pieces, z):
    """Fill a piecewise-minimizing cycle P = sum m_i [verts_i] by coning
    every simplex to z through the shared store; exact boundary.

    pieces: list of (multiplicity, vertex tuple).  The formal simplicial
    boundary must vanish, which makes the cone faces telescope.
    """
    formal = {}
    for m, verts in pieces:
        key = tuple(sorted(verts))
        if len(set(verts)) != len(verts):
            continue
        sgn = _parity(verts, key)
        for i in range(len(key)):
            face = key[:i] + key[i + 1:]
            w = formal.get(face, 0) + m * sgn * (-1) ** i
            if w:
                formal[face] = w
            else:
                formal.pop(face, None)
    if formal:
        raise ValueError("piecewise chain is not a formal cycle")
    X = store.X
    k = max((len(v) - 1 for _, v in pieces), default=0)
    P = Chain.zero(X, k)
    Q = Chain.zero(X, k + 1)
    for m, verts in pieces:
        P = P + m * store.simplex(verts)
        Q = Q + m * store.simplex((z,) + tuple(verts))
    if Q.boundary() != P:
        raise AssertionError("cone filling of piecewise chain failed")
    norm1 = sum(abs(m) for m, _ in pieces)
    mesh = max((MinimizingSimplex(store, v).mesh() for _, v in pieces),
               default=Fraction(0))
    vs = sorted({v for _, verts in pieces for v in verts} | {z})
    diam_sq = Fraction(0)
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            d = X.vertex_dist_sq(vs[i], vs[j])
            if d > diam_sq:
                diam_sq = d
    denom = float_sqrt(diam_sq) * float(mesh) ** max(k - 1, 0) * norm1 \
        if norm1 and mesh > 0 and diam_sq > 0 else None
    ratio = float(Q.mass()) / denom if denom else None
    return FillingResult(Q, "piecewise-minimizing-cone", False, None,
                         norm1=norm1, mesh=mesh, cone_ratio=ratio)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def density_profile(V, x, radii):
    """Normalized densities ||V||(B(x, r)) / r^k at the given radii,
    with a monotonicity report above twice the cell diameter."""
    X = V.complex
    if X.family not in ("grid", "tree_product"):
        raise UnsupportedOperationError(
            "density profiles need barycenter geometry")
    k = V.dim
    rows = []
    cell_diam_sq = X.kappa_sq * X.h * X.h
    for r in radii:
        r = frac(r)
        inside = Fraction(0)
        for cid, co in V.terms.items():
            b = X.barycenter(cid)
            if X.family == "grid":
                pt = tuple(Fraction(c) for c in X.lattice(x))
                d_sq = sum((pb - pp) ** 2 for pb, pp in zip(b, pt)) \
                    * X.h * X.h
            else:
                xa, xb = X.split(x)
                da = X._tree_point_vertex_dist(X.tree_a, b[0], xa)
                db = X._tree_point_vertex_dist(X.tree_b, b[1], xb)
                d_sq = (da * da + db * db) * X.h * X.h
            if d_sq <= r * r:
                inside += abs(co) * X.volume(cid)
        rows.append((r, inside / r**k if r > 0 else Fraction(0)))
    # the ratio is only expected to grow while the ball stays clear of
    # the boundary of V; past that reach a flat chain dilutes
    bverts = V.boundary().support_vertices()
    reach_sq = min((X.vertex_dist_sq(x, w) for w in bverts),
                   default=None)
    violations = []
    for (r1, q1), (r2, q2) in zip(rows, rows[1:]):
        in_window = reach_sq is None or r2 * r2 <= reach_sq
        if r1 * r1 >= 4 * cell_diam_sq and in_window and q2 < q1:
            violations.append((float(r1), float(r2)))
    return {"rows": [(float(r), float(q)) for r, q in rows],
            "monotone_violations": violations,
            "boundary_reach_sq": reach_sq}


def slimness_report(simplex: MinimizingSimplex):
    """Distances from a minimizing simplex to its boundary; diagnostics."""
    X = simplex.store.X
    P = simplex.chain
    B = P.boundary()
    if P.is_zero():
        return {"hausdorff_to_boundary": 0.0, "mass_ratio": 0.0}
    bverts = sorted(B.support_vertices()) or sorted(
        simplex.vertices)
    worst = Fraction(0)
    for v in P.support_vertices():
        d = min(X.vertex_dist_sq(v, w) for w in bverts)
        if d > worst:
            worst = d
    bmass = B.mass()
    return {
        "hausdorff_to_boundary": float_sqrt(worst),
        "mass_ratio": float(P.mass() / bmass) if bmass else float("inf"),
        "minimizing": simplex.minimizing,
    }
