"""Approximation of a cycle by a piecewise-minimizing cycle at a scale.

Given a k-cycle T and a scale s, the pipeline covers the support at
scale s, triangulates T (Kuhn staircase simplices), snaps triangulation
vertices to dominant cover members, and realizes the snapped simplicial
cycle P' by minimizing simplices with shared faces.  The output cycle P
has O(s^-k) simplices and mesh O(s), and the defect T - P is returned
as an explicit finite list of small cycles:

  * gap cycles, one per simplex of P', from the filling telescope that
    compares the minimizing realization with the geodesic-cone one;
  * displacement cycles, from the discrete homotopy between the
    identity and the snap round trip, localized by iterated slicing
    along distance fields to the cover members.

Every identity below is an equation between integer cellular chains and
is checked exactly; the quantitative ratios (mesh, counts, masses,
diameters against powers of s) are measured and reported, never assumed.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

from .exact import frac
from .chains import (Chain, geodesic_path, pushforward_cell, slice_min,
                     truncated_distance_field, chain_to_json)
from .covers import (NerveComplex, build_cover, verify_cover,
                     displacement_report)
from .minfill import (FillingBudgetError, MinimizingSimplex, SimplexStore,
                      min_filling, _cone_or_solve, _parity)
from . import affine

log = logging.getLogger(__name__)

__all__ = [
    "ApproxStageError", "ApproxResult", "CellHomotopy", "DisplacementResult",
    "kuhn_simplices", "triangulate_chain", "snap_chain", "simplicial_boundary",
    "realize_simplicial", "displacement_decompose", "pm_approximate",
    "unit_simplex_volume",
]


class ApproxStageError(RuntimeError):
    """Pipeline failure carrying the stage that raised it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# ---------------------------------------------------------------------------
# staircase triangulation and formal simplicial chains
# ---------------------------------------------------------------------------

def _perm_sign(perm):
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def kuhn_simplices(X, cid):
    """Oriented vertex tuples of the staircase triangulation of a cell.

    Corner order follows vertices_of: bit a of the corner index selects
    the upper end of the cell's a-th axis.  The simplex of a permutation
    starts at the low corner and raises one bit per step; weighting it
    by the permutation sign makes the triangulation commute with the
    cubical boundary (restriction to a face is the face's own staircase
    triangulation, and interior faces cancel in pairs).
    """
    corners = X.vertices_of(cid)
    d = X.dim_of(cid)
    if d == 0:
        return [((corners[0],), 1)]
    out = []
    for perm in permutations(range(d)):
        bits = 0
        verts = [corners[0]]
        for a in perm:
            bits |= 1 << a
            verts.append(corners[bits])
        out.append((tuple(verts), _perm_sign(perm)))
    return out


def _add_simplex(acc, verts, co):
    """Accumulate an oriented simplex under sort normalization.

    Keys are sorted vertex tuples; the sign of the sorting permutation
    folds into the coefficient.  Tuples with a repeated vertex are
    degenerate and drop.
    """
    if co == 0 or len(set(verts)) != len(verts):
        return
    key = tuple(sorted(verts))
    co = co * _parity(verts, key)
    w = acc.get(key, 0) + co
    if w:
        acc[key] = w
    else:
        acc.pop(key, None)


def simplicial_boundary(P):
    out = {}
    for sx, co in P.items():
        for i in range(len(sx)):
            _add_simplex(out, sx[:i] + sx[i + 1:], co * (-1) ** i)
    return out


def triangulate_chain(T):
    """Formal simplicial chain of the staircase triangulation of T."""
    acc = {}
    for cid, co in T.terms.items():
        for verts, sg in kuhn_simplices(T.complex, cid):
            _add_simplex(acc, verts, co * sg)
    return acc


def snap_chain(T, vmap):
    """Triangulate T and push every simplex through the vertex map.

    Simplices whose vertex images collide drop out; this is the usual
    simplicial pushforward, so the result of a cycle is a formal cycle.
    """
    acc = {}
    for cid, co in T.terms.items():
        for verts, sg in kuhn_simplices(T.complex, cid):
            _add_simplex(acc, tuple(vmap(v) for v in verts), co * sg)
    return acc


def realize_simplicial(store, P, vmap, dim):
    """Sum of store simplices over a formal chain, vertices mapped by vmap.

    Linear over the formal terms; the store canonicalizes vertex order,
    so equal keys always contribute the identical chain object.
    """
    out = Chain.zero(store.X, dim)
    for sx, co in P.items():
        out = out + co * store.simplex(tuple(vmap(i) for i in sx))
    return out


def unit_simplex_volume(k):
    """Volume of the regular k-simplex with unit edge length."""
    return math.sqrt(k + 1) / (math.factorial(k) * 2 ** (k / 2))


def _fill(R, node_budget=400, fallbacks=None):
    """Filling chain of a cycle: minimal when the budget allows, geodesic
    cone otherwise.  Fallbacks are counted, not hidden."""
    if R.is_zero():
        return Chain.zero(R.complex, R.dim + 1)
    try:
        return min_filling(R, node_budget=node_budget).chain
    except FillingBudgetError:
        if fallbacks is not None:
            fallbacks[0] += 1
        return _cone_or_solve(R, 0)


# ---------------------------------------------------------------------------
# discrete homotopy
# ---------------------------------------------------------------------------

class CellHomotopy:
    """Discrete homotopy from the identity to a vertex self-map.

    The image of a cell is either its cellwise pushforward (when no
    store is given; the map must then send cells to cells, as the
    identity does) or the sum of store simplices over the staircase
    triangulation with mapped vertices.  Both routes are chain maps.

    The cylinder memo fills the prism equation

        boundary(Cyl(c)) = image(c) - c - Cyl(boundary(c))

    cell by cell: geodesic paths at dimension zero, fillings of the
    right-hand side above.  The right-hand side is a cycle by induction,
    and both memos are linear, so the homotopy identity holds exactly
    for every chain, not just for single cells.
    """

    def __init__(self, X, vmap, store=None, node_budget=400, fallbacks=None):
        self.X = X
        self.vmap = vmap
        self.store = store
        self.node_budget = node_budget
        self.fallbacks = fallbacks if fallbacks is not None else [0]
        self._img = {}
        self._cyl = {}

    def image_cell(self, cid):
        try:
            return self._img[cid]
        except KeyError:
            pass
        X = self.X
        d = X.dim_of(cid)
        if self.store is None:
            res = pushforward_cell(X, X, self.vmap, cid)
            out = Chain.zero(X, d) if res is None else Chain(X, d, {res[0]: res[1]})
        else:
            out = Chain.zero(X, d)
            for verts, sg in kuhn_simplices(X, cid):
                out = out + sg * self.store.simplex(
                    tuple(self.vmap(v) for v in verts))
        self._img[cid] = out
        return out

    def image_chain(self, T):
        out = Chain.zero(self.X, T.dim)
        for cid, co in T.terms.items():
            out = out + co * self.image_cell(cid)
        return out

    def cylinder_cell(self, cid):
        try:
            return self._cyl[cid]
        except KeyError:
            pass
        X = self.X
        if X.dim_of(cid) == 0:
            # vertex cells carry their own id
            out = geodesic_path(X, cid, self.vmap(cid))
        else:
            c = Chain.unit(X, cid)
            rim = self.image_cell(cid) - c - self.cylinder_chain(c.boundary())
            out = _fill(rim, self.node_budget, self.fallbacks)
        self._cyl[cid] = out
        return out

    def cylinder_chain(self, T):
        out = Chain.zero(self.X, T.dim + 1)
        for cid, co in T.terms.items():
            out = out + co * self.cylinder_cell(cid)
        return out


# ---------------------------------------------------------------------------
# displacement decomposition
# ---------------------------------------------------------------------------

@dataclass
class DisplacementResult:
    pieces: list        # T_i, summing to T exactly
    images: list        # image of each piece under the homotopy map
    cycles: list        # R_i = T_i - image(T_i) + Cyl(boundary(T_i))
    levels: list        # (member index, slicing level) per piece
    info: dict

    def total_cycle(self):
        if not self.cycles:
            return None
        out = self.cycles[0]
        for C in self.cycles[1:]:
            out = out + C
        return out


def displacement_decompose(T, cov, homotopy, nerve=None):
    """Split a cycle into member-local pieces and their homotopy defects.

    The pieces come from iterated slicing of the remaining chain along
    the truncated path-distance field to each member, at a level chosen
    by slice_min inside the band (k*h, s/2).  The lower end sits at the
    cell-path diameter rather than 0 so that every cell touching a
    member is absorbed when that member is processed; this is what makes
    exhaustion a theorem instead of a hope.

    Returns the pieces T_i, their images, and the defect cycles
    R_i = T_i - f(T_i) + Cyl(boundary T_i), whose sum telescopes to
    T - f(T) exactly.
    """
    X = T.complex
    if not T.boundary().is_zero():
        raise ValueError("displacement decomposition needs a cycle")
    if T.is_zero():
        return DisplacementResult([], [], [], [], {"pieces": 0,
                                                   "mass_ratio": 0.0,
                                                   "diam_ratio": 0.0,
                                                   "boundary_mass_ratio": 0.0})
    s = cov.s
    band_lo = T.dim * X.h
    band_hi = s / 2
    if not band_lo < band_hi:
        raise ValueError("cell scale too coarse for the slicing band; "
                         "refine the complex first")
    support = X.closure(T.support())
    corners = sorted({v for c in support for v in X.vertices_of(c)})
    if nerve is not None:
        worst = displacement_report(nerve, corners)
        if worst > cov.c_sq * s * s:
            raise ValueError("displacement bound violated: snap moves a "
                             "vertex beyond the member diameter bound")

    rem = T
    pieces, levels = [], []
    for i, M in enumerate(cov.members):
        if rem.is_zero():
            break
        sources = [v for v in corners if v in M.ids]
        if not sources:
            continue
        field = truncated_distance_field(X, sources, band_hi, targets=corners)
        rho = lambda v, fld=field: fld.get(v, band_hi)
        res = slice_min(rem, rho, band_lo, band_hi)
        piece = res.inside
        if piece.is_zero():
            continue
        rem = rem - piece
        pieces.append(piece)
        levels.append((i, res.r))
    if not rem.is_zero():
        raise RuntimeError("cover failed to absorb the cycle support")

    images, cycles = [], []
    for piece in pieces:
        img = homotopy.image_chain(piece)
        Ri = piece - img + homotopy.cylinder_chain(piece.boundary())
        if not Ri.boundary().is_zero():
            raise RuntimeError("displacement cycle is not closed")
        images.append(img)
        cycles.append(Ri)

    mT = T.mass()
    info = {
        "pieces": len(pieces),
        "mass_ratio": float(sum((C.mass() for C in cycles), Fraction(0)) / mT),
        "diam_ratio": max((C.diam() for C in cycles), default=0.0) / float(s),
        "boundary_mass_ratio": float(
            sum((p.boundary().mass() for p in pieces), Fraction(0)) * s / mT),
    }
    return DisplacementResult(pieces, images, cycles, levels, info)


# ---------------------------------------------------------------------------
# the approximation pipeline
# ---------------------------------------------------------------------------

@dataclass
class ApproxResult:
    """Outcome of pm_approximate.  All chains live on ``complex``, the
    admissible refinement of the input complex; ``T`` is the input cycle
    pushed there (same mass, same boundary)."""

    complex: object
    refine_depth: int
    scale: Fraction
    T: Chain
    P: Chain
    simplicial: dict     # canonical snapped cycle {sorted member tuple: m}
    Z: list              # remainder cycles; T - P == sum(Z) exactly
    S: Chain             # bridge filling; boundary(S) == T - P exactly
    constants: dict
    trace: list
    anchors: list = None    # member index -> anchor vertex id
    store: object = None    # minimizing store that realized P; not serialized

    def verify(self):
        diff = self.T - self.P
        if not self.P.boundary().is_zero():
            raise AssertionError("output cycle is not closed")
        total = Chain.zero(self.complex, self.T.dim)
        for Zi in self.Z:
            if not Zi.boundary().is_zero():
                raise AssertionError("remainder cycle is not closed")
            total = total + Zi
        if total != diff:
            raise AssertionError("remainder cycles do not sum to T - P")
        if self.S.boundary() != diff:
            raise AssertionError("bridge filling does not bound T - P")
        return True

    def to_json(self, directory):
        os.makedirs(directory, exist_ok=True)
        chain_to_json(self.T, os.path.join(directory, "T.json"))
        chain_to_json(self.P, os.path.join(directory, "P.json"))
        chain_to_json(self.S, os.path.join(directory, "S.json"))
        names = []
        for idx, Zi in enumerate(self.Z):
            name = f"Z_{idx:03d}.json"
            chain_to_json(Zi, os.path.join(directory, name))
            names.append(name)
        bundle = {
            "scale": [self.scale.numerator, self.scale.denominator],
            "refine_depth": self.refine_depth,
            "T": "T.json", "P": "P.json", "S": "S.json", "Z": names,
            "simplicial": sorted([list(sx), m]
                                 for sx, m in self.simplicial.items()),
            "anchors": self.anchors,
            "constants": self.constants,
            "trace": self.trace,
        }
        with open(os.path.join(directory, "bundle.json"), "w") as fh:
            json.dump(bundle, fh, indent=1)
        return bundle


def pm_approximate(X, T, s, refine_cap=4, node_budget=400,
                   cover_factory=build_cover):
    """Approximate a k-cycle by a piecewise-minimizing cycle at scale s.

    Returns an ApproxResult whose identities hold exactly:
    T - P == sum(Z), boundary(S) == T - P, boundary(P) == 0, and every
    remainder cycle is closed.  Stage failures raise ApproxStageError
    with the stage tag; a defective decomposition is never returned.

    cover_factory(X_f, s) supplies the covering on the refined complex;
    it defaults to the family construction and exists so callers can
    study alternative covers.  Whatever it returns is still certified.
    """
    k = T.dim
    if k < 1:
        raise ValueError("approximation needs a cycle of positive dimension")
    if not T.boundary().is_zero():
        raise ValueError("input chain is not a cycle")
    s = frac(s)
    if s <= 0:
        raise ValueError("scale must be positive")
    trace = []
    if T.is_zero():
        trace.append({"stage": "trivial"})
        return ApproxResult(X, 0, s, T.copy(), Chain.zero(X, k), {}, [],
                            Chain.zero(X, k + 1), {}, trace)
    if not hasattr(X, "refine"):
        raise ApproxStageError("cover",
                               f"family {X.family!r} has no refinement")

    # -- cover: refine until the nerve absorbs the support stars ----------
    depth = 0
    while True:
        X_f, rmap = X.refine(depth)
        T_f = rmap.chain(T)
        if k * X_f.h < s / 2:
            support = sorted(X_f.closure(T_f.support()))
            corners = sorted({v for c in support
                              for v in X_f.vertices_of(c)})
            cov = cover_factory(X_f, s)
            report = verify_cover(cov, corners)
            nerve = NerveComplex(cov, corners)
            if nerve.absorb_cell_stars(support):
                break
        depth += 1
        if depth > refine_cap:
            raise ApproxStageError(
                "cover",
                f"no admissible refinement up to factor 2**{refine_cap} "
                f"at scale {s}")
    anchors = [M.anchor for M in cov.members]
    if len(set(anchors)) != len(anchors):
        # snap would not be injective on member labels
        raise ApproxStageError("cover", "member anchors collide")
    worst = displacement_report(nerve, corners)
    if worst > cov.c_sq * s * s:
        raise ApproxStageError("cover", "anchor displacement exceeds the "
                                        "member diameter bound")
    trace.append({"stage": "cover", "depth": depth,
                  "members": len(cov.members),
                  "max_multiplicity": report["max_multiplicity"],
                  "mesh": float(X_f.h)})
    log.info("cover stage: depth=%d members=%d", depth, len(cov.members))

    chi = nerve.chi
    amap = anchors.__getitem__
    mT = float(T_f.mass())
    sf = float(s)

    # -- snap: triangulate and push vertices to dominant members ----------
    P1 = snap_chain(T_f, chi)
    if simplicial_boundary(P1):
        raise ApproxStageError("snap", "snapped triangulation is not a cycle")
    for sx in P1:
        if not nerve.contains(sx):
            raise ApproxStageError("snap", f"simplex {sx} missing from nerve")
    norm1 = sum(abs(m) for m in P1.values())
    trace.append({"stage": "snap", "simplices": len(P1), "norm1": norm1})

    # -- skeleton: the snapped cycle must already be skeletal --------------
    mass_nerve = None
    if P1 and k <= 2:
        afc = affine.AffineChain.from_simplicial(nerve, P1)
        P2, _, zs, _ = affine.skeleton_reduce(nerve, afc, k)
        if zs or P2 != P1:
            raise ApproxStageError("skeleton",
                                   "snapped cycle is not skeletal")
        mass_nerve = affine.current_profile(afc)[0]
    trace.append({"stage": "skeleton",
                  "nerve_mass": mass_nerve if mass_nerve is not None else -1.0})

    # -- minimizing realization --------------------------------------------
    store_min = SimplexStore(X_f, node_budget=node_budget, rule="min")
    P = realize_simplicial(store_min, P1, amap, k)
    if not P.boundary().is_zero():
        raise ApproxStageError("lambda", "realized cycle has nonzero boundary")
    mesh_P = Fraction(0)
    for sx in P1:
        ms = MinimizingSimplex(store_min, tuple(amap(i) for i in sx))
        if not ms.boundary_identity_holds():
            raise ApproxStageError("lambda", f"face identity fails on {sx}")
        mesh_P = max(mesh_P, ms.mesh())
    trace.append({"stage": "lambda", "mass": float(P.mass()),
                  "mesh": float(mesh_P)})

    # -- gap cycles: telescope between cone and minimizing stores ----------
    store_phi = SimplexStore(X_f, node_budget=node_budget, rule="cone")
    fallbacks = [0]
    gmemo = {}

    def gap(key):
        if key in gmemo:
            return gmemo[key]
        j = len(key) - 1
        if j == 0:
            G = Chain.zero(X_f, 1)
        else:
            averts = tuple(amap(i) for i in key)
            R = (store_phi.simplex(averts) - store_min.simplex(averts)
                 - gap_apply(simplicial_boundary({key: 1}), j - 1))
            G = _fill(R, node_budget, fallbacks)
        gmemo[key] = G
        return G

    def gap_apply(formal, dim):
        out = Chain.zero(X_f, dim + 1)
        for kk, co in formal.items():
            out = out + co * gap(kk)
        return out

    Z_gap = []
    W = Chain.zero(X_f, k)
    for sx, m in sorted(P1.items()):
        averts = tuple(amap(i) for i in sx)
        phi_s = store_phi.simplex(averts)
        Zi = m * (phi_s - store_min.simplex(averts)
                  - gap_apply(simplicial_boundary({sx: 1}), k - 1))
        W = W + m * phi_s
        if not Zi.boundary().is_zero():
            raise ApproxStageError("gamma", f"gap cycle of {sx} is not closed")
        if not Zi.is_zero():
            Z_gap.append(Zi)
    total_gap = Chain.zero(X_f, k)
    for Zi in Z_gap:
        total_gap = total_gap + Zi
    if total_gap != W - P:
        raise ApproxStageError("gamma", "gap telescoping failed")
    trace.append({"stage": "gamma", "cycles": len(Z_gap),
                  "mass": float(sum((Zi.mass() for Zi in Z_gap),
                                    Fraction(0)))})

    # -- displacement cycles ------------------------------------------------
    homotopy = CellHomotopy(X_f, vmap=lambda v: amap(chi(v)), store=store_phi,
                            node_budget=node_budget, fallbacks=fallbacks)
    fwT = homotopy.image_chain(T_f)
    if fwT != W:
        # both are sums of the same store chains, so inequality means the
        # snap and the triangulation disagree somewhere
        raise ApproxStageError("displacement", "snap realization mismatch")
    disp = displacement_decompose(T_f, cov, homotopy, nerve=nerve)
    R_total = Chain.zero(X_f, k)
    for C in disp.cycles:
        R_total = R_total + C
    if R_total != T_f - fwT:
        raise ApproxStageError("displacement", "homotopy telescoping failed")
    R_cycles = [C for C in disp.cycles if not C.is_zero()]
    trace.append({"stage": "displacement", "pieces": disp.info["pieces"],
                  "mass_ratio": disp.info["mass_ratio"]})

    # -- exact total ---------------------------------------------------------
    Z_all = Z_gap + R_cycles
    total = Chain.zero(X_f, k)
    for Zi in Z_all:
        total = total + Zi
    if total != T_f - P:
        raise ApproxStageError("total", "exact decomposition failed")
    trace.append({"stage": "total", "cycles": len(Z_all)})

    # -- bridge filling by coning each remainder -----------------------------
    S = Chain.zero(X_f, k + 1)
    for C in Z_all:
        S = S + _cone_or_solve(C, 0)
    if S.boundary() != T_f - P:
        raise ApproxStageError("bridge", "bridge filling does not bound T - P")
    trace.append({"stage": "bridge", "mass": float(S.mass())})

    constants = {
        "mesh_ratio": float(mesh_P) / sf,
        "count_ratio": norm1 * sf ** k / mT,
        "diam_ratio": max((C.diam() for C in Z_all), default=0.0) / sf,
        "bridge_ratio": float(S.mass()) / (sf * mT),
        "displacement_ratio": disp.info["mass_ratio"],
        "gap_mass_ratio": float(sum((Zi.mass() for Zi in Z_gap),
                                    Fraction(0))) / mT,
        "fill_fallbacks": fallbacks[0] + len(store_min.non_minimizing),
        "cover_multiplicity": report["max_multiplicity"],
        "refine_depth": depth,
    }
    if mass_nerve is not None and norm1:
        constants["simplicial_mass_ratio"] = (
            mass_nerve / (unit_simplex_volume(k) * sf ** k * norm1))
    levels = [(i, float(r)) for i, r in disp.levels]
    trace.append({"stage": "constants", "levels": levels, **constants})
    log.info("approximation done: %s", constants)
    return ApproxResult(X_f, depth, s, T_f, P, dict(P1), Z_all, S,
                        constants, trace, anchors=list(anchors),
                        store=store_min)
