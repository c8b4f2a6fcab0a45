"""Top-level filling algorithms and the experiment harness.

Three layers sit on the approximation pipeline.  round_decompose splits
a cycle into pieces whose diameter is controlled by their mass, by
greedily slicing off high-density balls.  fill_round fills one such
round piece, either directly (small mass) or through a ladder of scales,
approximating the remainder cycles at each scale by piecewise-minimizing
cycles and coning what survives at the bottom scale.  fill_cycle drives
the decompose/fill loop until the residual is small enough to close off,
keeping a mass-weighted ledger.  experiment_exponent runs instance
families through these and fits the filling-mass exponent.

Every chain identity along the way is verified with exact arithmetic; a
filling with the wrong boundary is never returned.  Masses, ratios and
fits are reported as floats.
"""

from __future__ import annotations

import csv
import logging
import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .approx import pm_approximate
from .chains import (
    Chain,
    _cell_levels,
    slice_min,
    truncated_distance_field,
)
from .complexes import GridComplex, RootedTree, TreeProductComplex
from .constants import MeasuredConstants, load_default
from .exact import DYADIC_DENOM, frac, pow_ceil, sqrt_ceil
from .minfill import (
    cone_filling,
    cone_point,
    euclidean_filling,
    fill_piecewise_minimizing,
    min_filling,
)

log = logging.getLogger(__name__)


class DecompositionError(RuntimeError):
    """Round decomposition could not meet its postconditions; carries the
    best decomposition found and the violated clause."""

    def __init__(self, clause, residual, rounds):
        super().__init__(f"round decomposition failed: {clause}")
        self.clause = clause
        self.residual = residual
        self.rounds = rounds


class FillingIterationError(RuntimeError):
    """fill_cycle hit its iteration cap; carries the partial ledger."""

    def __init__(self, message, ledger):
        super().__init__(message)
        self.ledger = ledger


# ---------------------------------------------------------------------------
# roundness and the scale ladder
# ---------------------------------------------------------------------------

def is_round(R, beta) -> bool:
    """diam(R) <= beta * M(R)^{1/k}, exactly (both sides to the 2k-th power)."""
    k = R.dim
    M = R.mass()
    return R.diam_sq() ** k <= frac(beta) ** (2 * k) * M * M


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


@dataclass
class ScaleLadder:
    """Decreasing scales s_0 > ... > s_l interpolating M^{1/k} down to
    M^delta.  Irrational powers are replaced by their dyadic round-up at
    denominator 2^20; when the rounding breaks a ratio bound, the finer
    scale is raised by single ulps until it holds (count recorded)."""

    M: Fraction
    k: int
    delta: Fraction
    scales: list
    ulp_bumps: int = 0

    @classmethod
    def build(cls, M, k, delta) -> "ScaleLadder":
        M = frac(M)
        delta = frac(delta)
        if not 0 < delta < Fraction(1, k):
            raise ValueError("exponent must lie in (0, 1/k)")
        if M <= 1:
            raise ValueError("ladder needs mass above one")
        inv = Fraction(1, k)
        l = _ceil_frac(1 / (k * delta)) - 1
        step = (inv - delta) / l
        scales = [pow_ceil(M, inv - n * step) for n in range(l + 1)]
        p, q = delta.numerator, delta.denominator
        bumps = 0
        for n in range(1, l + 1):
            while (scales[n - 1] / scales[n]) ** q > M ** p:
                scales[n] += Fraction(1, DYADIC_DENOM)
                bumps += 1
                if scales[n] >= scales[n - 1]:
                    raise AssertionError("ladder ratio repair ran away")
        out = cls(M, k, delta, scales, bumps)
        out.verify()
        return out

    def verify(self) -> bool:
        p, q = self.delta.numerator, self.delta.denominator
        if self.scales[0] ** self.k < self.M:
            raise AssertionError("top scale underestimates M^{1/k}")
        if self.scales[-1] ** q < self.M ** p:
            raise AssertionError("bottom scale underestimates M^delta")
        for a, b in zip(self.scales, self.scales[1:]):
            if not a > b:
                raise AssertionError("scales must strictly decrease")
            if (a / b) ** q > self.M ** p:
                raise AssertionError("scale ratio exceeds M^delta")
        l = len(self.scales) - 1
        if not Fraction(l) * self.k * self.delta < 1:
            raise AssertionError("ladder is too long")
        return True

    def __len__(self):
        return len(self.scales) - 1


# ---------------------------------------------------------------------------
# round decomposition
# ---------------------------------------------------------------------------

def _find_extraction(T, rho0, kappa_slice, beta):
    """First greedy extraction candidate: a high-density ball sliced at
    a low-mass level, its slice filled one dimension down.  Returns
    (inside, filler, piece) or None when no admissible trigger fires."""
    X = T.complex
    k = T.dim
    h = X.h
    centers = sorted(T.support_vertices())
    total = T.mass()
    # the trigger rho0 * r^k <= mass caps useful radii; never explore past it
    jmax = k
    while rho0 * ((jmax + 1) * h) ** k <= total:
        jmax += 1
    diam_cap = _ceil_frac((sqrt_ceil(X.kappa_sq) * sqrt_ceil(T.diam_sq())
                           + 4 * h) / (2 * h))
    jmax = min(jmax, diam_cap)
    rcap = 2 * jmax * h + 2 * h
    closure_verts = {v for c in X.closure(T.support())
                     for v in X.vertices_of(c)}
    for x in centers:
        fld = truncated_distance_field(X, [x], rcap, targets=closure_verts)
        rho = lambda v, f=fld, c=rcap: f.get(v, c)
        graded = sorted((_cell_levels(X, c, rho)[1], abs(co) * X.volume(c))
                        for c, co in T.terms.items())
        for j in range(k, jmax + 1):
            r = j * h
            inside_mass = Fraction(0)
            for lev, m in graded:
                if lev > r:
                    break
                inside_mass += m
            if inside_mass < rho0 * r ** k:
                continue
            if inside_mass == total:
                break   # ball swallowed the cycle; no decomposition here
            res = slice_min(T, rho, r, 2 * r)
            if res.inside.is_zero() or res.inside == T:
                continue
            if res.sliced.mass() * r > kappa_slice * res.band_mass:
                continue
            if res.sliced.is_zero():
                F = Chain.zero(X, k)
            else:
                F = euclidean_filling(res.sliced).chain
            if 2 * F.mass() > res.inside.mass():
                continue    # the cut costs more than it frees
            piece = res.inside - F
            if piece.is_zero() or not is_round(piece, beta):
                continue
            return res.inside, F, piece
    return None


def round_decompose(T, beta=Fraction(6), eps=Fraction(1, 4),
                    lam=Fraction(1, 2), rho0=Fraction(1, 2),
                    kappa_slice=Fraction(2), retries=3, max_pieces=512):
    """Split the cycle T into round pieces and a light residual.

    Returns (T_residual, [R_i]) with every R_i a cycle satisfying
    diam(R_i) <= beta * M(R_i)^{1/k}, M(T_residual) <= (1-eps) M(T) and
    sum M(R_i) <= (1+lam) M(T), all checked exactly.  Extraction is
    greedy: while some support vertex carries a ball of density at least
    rho0 * r^k whose (r, 2r) band admits a slice of mass at most
    kappa_slice/r times the band mass, the sliced ball minus a filling
    of its slice comes off as one piece.  When the postconditions fail,
    the density threshold is doubled and the pass rerun, three times.
    """
    X = T.complex
    k = T.dim
    if k < 1:
        raise ValueError("decomposition needs a cycle of positive dimension")
    if not T.boundary().is_zero():
        raise ValueError("input chain is not a cycle")
    beta, eps, lam = frac(beta), frac(eps), frac(lam)
    kappa_slice = frac(kappa_slice)
    if T.is_zero():
        return T.copy(), []
    if is_round(T, beta):
        return Chain.zero(X, k), [T.copy()]
    MT = T.mass()
    rho = frac(rho0)
    best = None
    for attempt in range(retries):
        cur = T
        rounds = []
        while len(rounds) < max_pieces and not cur.is_zero():
            if is_round(cur, beta):
                rounds.append(cur)
                cur = Chain.zero(X, k)
                break
            hit = _find_extraction(cur, rho, kappa_slice, beta)
            if hit is None:
                break
            _, _, piece = hit
            rounds.append(piece)
            cur = cur - piece
        clause = None
        if cur.mass() > (1 - eps) * MT:
            clause = "residual-mass"
        extracted = sum((R.mass() for R in rounds), Fraction(0))
        if clause is None and extracted > (1 + lam) * MT:
            clause = "extracted-mass"
        if clause is None:
            return cur, rounds
        log.info("decomposition attempt %d violated %s (rho=%s)",
                 attempt, clause, rho)
        score = float(cur.mass() + extracted)
        if best is None or score < best[0]:
            best = (score, cur, rounds, clause)
        rho *= 2
    _, cur, rounds, clause = best
    raise DecompositionError(clause, cur, rounds)


# ---------------------------------------------------------------------------
# depth bookkeeping
# ---------------------------------------------------------------------------

def _push(T, t):
    """Chain pushed t dyadic refinement levels down its own complex."""
    if t == 0:
        return T
    _, rmap = T.complex.refine(t)
    return rmap.chain(T)


def _rebind(T, X):
    """Adopt X as the chain's complex; layouts must agree (same family
    and mesh), which holds for refinements built from equal bases."""
    if T.complex is X:
        return T
    if T.complex.family != X.family or T.complex.h != X.h:
        raise ValueError("cannot rebind chain across different layouts")
    return Chain(X, T.dim, dict(T.terms))


# ---------------------------------------------------------------------------
# filling a round cycle
# ---------------------------------------------------------------------------

@dataclass
class RoundFill:
    chain: Chain
    complex_out: object
    depth: int          # refinement depth relative to the input complex
    method: str
    ladder: ScaleLadder | None
    ledger: list


def fill_round(R, delta=Fraction(1, 4), beta=Fraction(6), r0=None,
               node_budget=400, pm_refine_cap=2):
    """Fill one round cycle; exact boundary on the returned complex.

    Below the small-mass threshold M <= r0^{1/delta} the absolute
    filling runs directly.  Above it, remainder cycles are pushed down a
    scale ladder: at each scale the approximation pipeline replaces a
    cycle by a piecewise-minimizing one (coned off from a vertex of the
    source cycle through the shared simplex store) plus controlled
    remainders, and whatever reaches the bottom scale is cone-filled.
    The decomposition identity R = sum(filled P) + sum(remaining Z) is
    checked exactly at every rung.
    """
    X = R.complex
    k = R.dim
    delta = frac(delta)
    if not R.boundary().is_zero():
        raise ValueError("input chain is not a cycle")
    if not 0 < delta < Fraction(1, k):
        raise ValueError("exponent must lie in (0, 1/k)")
    if R.is_zero():
        return RoundFill(Chain.zero(X, k + 1), X, 0, "zero", None, [])
    if not is_round(R, beta):
        raise ValueError("fill_round needs a round cycle for this beta")
    M = R.mass()
    r0 = frac(r0) if r0 is not None else 2 * k * X.h
    p, q = delta.numerator, delta.denominator
    if M ** p <= r0 ** q:
        fr = euclidean_filling(R)
        row = {"branch": "euclidean", "mass": float(M),
               "fill_mass": float(fr.chain.mass()),
               "gamma_ratio": fr.extras.get("gamma_ratio")}
        return RoundFill(fr.chain, X, 0, "euclidean", None, [row])

    if not hasattr(X, "refine"):
        raise RuntimeError("multi-scale filling needs a refinable family")
    ladder = ScaleLadder.build(M, k, delta)
    s_bottom = ladder.scales[-1]
    D = 0
    while Fraction(k) * X.h / (1 << D) >= s_bottom / 2:
        D += 1
        if D > 12:
            raise RuntimeError("bottom scale below any sane refinement")
    X_D, rmap = X.refine(D)
    R_D = rmap.chain(R)
    zs = [R_D]
    V = Chain.zero(X_D, k + 1)
    filled = Chain.zero(X_D, k)
    ledger = []
    for n, s_n in enumerate(ladder.scales[1:], 1):
        nxt = []
        p_mass = f_mass = Fraction(0)
        piece_count = 0
        queue = list(zs)
        while queue:
            Z = queue.pop(0)
            res = pm_approximate(X_D, Z, s_n, refine_cap=pm_refine_cap,
                                 node_budget=node_budget)
            if res.refine_depth:
                # a rung needed a finer mesh: drag the whole state down
                d = res.refine_depth
                X_new = res.complex
                V = _rebind(_push(V, d), X_new)
                filled = _rebind(_push(filled, d), X_new)
                R_D = _rebind(_push(R_D, d), X_new)
                queue = [_rebind(_push(W, d), X_new) for W in queue]
                nxt = [_rebind(_push(W, d), X_new) for W in nxt]
                X_D = X_new
                D += d
            if res.P.is_zero():
                nxt.extend(res.Z)
                continue
            z0 = cone_point(res.T)
            pieces = [(m, tuple(res.anchors[i] for i in sx))
                      for sx, m in sorted(res.simplicial.items())]
            fr = fill_piecewise_minimizing(res.store, pieces, z0)
            V = V + fr.chain
            filled = filled + res.P
            p_mass += res.P.mass()
            f_mass += fr.chain.mass()
            piece_count += len(pieces)
            nxt.extend(res.Z)
        zs = [Zc for Zc in nxt if not Zc.is_zero()]
        z_mass = sum((Zc.mass() for Zc in zs), Fraction(0))
        remains = Chain.zero(X_D, k)
        for Zc in zs:
            remains = remains + Zc
        if filled + remains != R_D:
            raise AssertionError("rung decomposition identity failed")
        ledger.append({"rung": n, "scale": float(s_n),
                       "pieces": piece_count, "p_mass": float(p_mass),
                       "fill_mass": float(f_mass), "z_count": len(zs),
                       "z_mass": float(z_mass),
                       "z_ratio": float(z_mass / M)})
    cone_mass = Fraction(0)
    for Zc in zs:
        if X_D.family in ("grid", "tree_product"):
            fr = cone_filling(Zc, cone_point(Zc))
        else:
            fr = min_filling(Zc)
        V = V + fr.chain
        cone_mass += fr.chain.mass()
    if V.boundary() != R_D:
        raise AssertionError("round filling has the wrong boundary")
    ledger.append({"rung": "final", "z_count": len(zs),
                   "cone_mass": float(cone_mass),
                   "total_mass": float(V.mass())})
    return RoundFill(V, X_D, D, "ladder", ladder, ledger)


# ---------------------------------------------------------------------------
# the mass-weighted iteration
# ---------------------------------------------------------------------------

@dataclass
class CycleFill:
    chain: Chain
    complex_out: object
    depth: int
    ledger: list                 # one row per iteration
    round_ledgers: list          # flattened rung rows of the sub-fillings
    methods: list
    violations: int

    @property
    def mass(self):
        return self.chain.mass()


def fill_cycle(T, delta=Fraction(1, 4), constants=None, max_iterations=64,
               node_budget=400):
    """Fill an arbitrary cycle through repeated round decomposition.

    Each iteration splits off round pieces, fills them with fill_round,
    and recurses on the residual; once the residual mass drops below the
    small threshold the absolute filling closes it.  The weighted ledger
    C' M(T')^{1+delta} + mu^{1+delta} M(V_iter) <= C' M(T)^{1+delta}
    is evaluated per iteration with the configured constants and
    violations are counted, never hidden.  The returned filling's
    boundary equals the input cycle (pushed to the output refinement),
    checked exactly.
    """
    X = T.complex
    k = T.dim
    delta = frac(delta)
    if k < 1:
        raise ValueError("filling needs a cycle of positive dimension")
    if not T.boundary().is_zero():
        raise ValueError("input chain is not a cycle")
    if not 0 < delta < Fraction(1, k):
        raise ValueError("exponent must lie in (0, 1/k)")
    cst = constants if constants is not None else load_default()
    mu = float(cst.mu)
    c_prime = cst.C_prime
    one_plus = 1 + float(delta)
    r0 = cst.r0_factor * k * X.h
    p, q = delta.numerator, delta.denominator

    X_cur = X
    depth = 0
    T_cur = T
    T_ref = T
    V = Chain.zero(X, k + 1)
    ledger, round_rows, methods = [], [], set()
    violations = 0
    done = False
    for it in range(max_iterations):
        if T_cur.is_zero():
            done = True
            break
        M_before = T_cur.mass()
        if M_before ** p <= r0 ** q:
            eu = euclidean_filling(T_cur)
            V = V + eu.chain
            methods.add("euclidean")
            lhs = mu ** one_plus * float(eu.chain.mass())
            rhs = c_prime * float(M_before) ** one_plus
            ok = lhs <= rhs * (1 + 1e-9)
            if not ok:
                violations += 1
            ledger.append({"iteration": it, "branch": "euclidean",
                           "mass": float(M_before), "residual_mass": 0.0,
                           "fill_mass": float(eu.chain.mass()),
                           "ledger_lhs": lhs, "ledger_rhs": rhs, "ok": ok})
            T_cur = Chain.zero(X_cur, k)
            done = True
            break
        residual, rounds = round_decompose(
            T_cur, beta=cst.beta, eps=cst.eps, lam=cst.lam, rho0=cst.rho0,
            kappa_slice=cst.kappa_slice)
        v_iter = Fraction(0)
        queue = list(rounds)
        while queue:
            R = queue.pop(0)
            rf = fill_round(R, delta, beta=cst.beta, r0=r0,
                            node_budget=node_budget)
            methods.add(rf.method)
            round_rows.extend(rf.ledger)
            if rf.depth:
                d = rf.depth
                X_cur = rf.complex_out
                depth += d
                V = _rebind(_push(V, d), X_cur)
                residual = _rebind(_push(residual, d), X_cur)
                T_ref = _rebind(_push(T_ref, d), X_cur)
                queue = [_rebind(_push(W, d), X_cur) for W in queue]
            V = V + _rebind(rf.chain, X_cur)
            v_iter += rf.chain.mass()
        lhs = (c_prime * float(residual.mass()) ** one_plus
               + mu ** one_plus * float(v_iter))
        rhs = c_prime * float(M_before) ** one_plus
        ok = lhs <= rhs * (1 + 1e-9)
        if not ok:
            violations += 1
        ledger.append({"iteration": it, "branch": "decompose",
                       "mass": float(M_before),
                       "residual_mass": float(residual.mass()),
                       "round_count": len(rounds),
                       "fill_mass": float(v_iter),
                       "ledger_lhs": lhs, "ledger_rhs": rhs, "ok": ok})
        T_cur = residual
    if not done and not T_cur.is_zero():
        raise FillingIterationError("filling iteration cap exceeded", ledger)
    if V.boundary() != T_ref:
        raise AssertionError("cycle filling has the wrong boundary")
    return CycleFill(V, X_cur, depth, ledger, round_rows,
                     sorted(methods), violations)


# ---------------------------------------------------------------------------
# instance families
# ---------------------------------------------------------------------------

def block_boundary(X, ranges):
    """Boundary of the solid block of top cells over index ranges."""
    mask = (1 << X.n) - 1
    blk = Chain.zero(X, X.n)
    idx = [list(range(a, b)) for a, b in ranges]

    def rec(i, base):
        nonlocal blk
        if i == len(idx):
            blk = blk + Chain.unit(X, X.encode(mask, tuple(base)))
            return
        for v in idx[i]:
            rec(i + 1, base + [v])

    rec(0, [])
    return blk.boundary()


def grid3_spheres(m_lo=2, m_hi=12):
    """Cube boundaries in grid(3): mass 6 m^2, minimal filling m^3."""
    for m in range(int(m_lo), int(m_hi) + 1):
        X = GridComplex(3, m)
        yield f"grid3-sphere-{m:02d}", X, block_boundary(X, [(0, m)] * 3), True


def grid2_loops(m_lo=2, m_hi=16):
    """Square loops in grid(2): mass 4 m, minimal filling m^2."""
    for m in range(int(m_lo), int(m_hi) + 1):
        X = GridComplex(2, m)
        yield f"grid2-loop-{m:02d}", X, block_boundary(X, [(0, m)] * 2), True


def _staircase_loop(X, tree, arm_a, arm_b, length, weight=1):
    """Closed thin loop between two interleavings of a descending path
    pair; bounds a diagonal band of `length` squares."""
    va = [0] + arm_a[:length]
    vb = [0] + arm_b[:length]
    ea = [tree.V + c - 1 for c in arm_a[:length]]
    eb = [tree.V + c - 1 for c in arm_b[:length]]
    out = Chain.zero(X, 1)
    for i in range(length):
        out = out + weight * Chain.unit(X, X.join(ea[i], vb[i]))
        out = out + weight * Chain.unit(X, X.join(va[i + 1], eb[i]))
        out = out - weight * Chain.unit(X, X.join(va[i], eb[i]))
        out = out - weight * Chain.unit(X, X.join(ea[i], vb[i + 1]))
    return out


def treeprod_cycles(depth=6, count=12, seed=1, branching=3):
    """Random staircase loops in a product of two uniform trees; masses
    spread over more than 1.5 decades by combining loop length, count
    of disjoint sector copies, and coefficient weight."""
    depth, count, seed = int(depth), int(count), int(seed)
    branching = int(branching)
    rng = random.Random(seed)
    tree = RootedTree.uniform(branching, depth)
    X = TreeProductComplex(tree, tree)

    def random_arm(first):
        # first step is pinned so disjoint copies stay in disjoint sectors
        cur = tree.children[0][first]
        arm = [cur]
        for _ in range(depth - 1):
            cur = rng.choice(tree.children[cur])
            arm.append(cur)
        return arm

    sectors = [(i, j) for i in range(branching) for j in range(branching)]
    shapes = []
    for idx in range(count):
        length = 1 + (idx * (depth - 1)) // max(count - 1, 1)
        copies = 1 + (idx * (len(sectors) - 1)) // max(count - 1, 1)
        weight = 2 if idx % 3 == 2 else 1
        shapes.append((max(1, length), max(1, copies), weight))
    for idx, (length, copies, weight) in enumerate(shapes):
        rng.shuffle(sectors)
        T = Chain.zero(X, 1)
        for (si, sj) in sectors[:copies]:
            arm_a = random_arm(si)
            arm_b = random_arm(sj)
            T = T + _staircase_loop(X, tree, arm_a, arm_b, length, weight)
        if T.is_zero():
            continue
        yield f"treeprod-stairs-{idx:02d}", X, T, True


def custom_instances(file):
    """Instances from a JSON document: a custom cube complex under
    "cells" plus a list of chain documents under "cycles"."""
    import json

    from .chains import chain_from_json
    from .complexes import load_custom_complex
    X = load_custom_complex(file)
    with open(file) as fh:
        doc = json.load(fh)
    for i, rec in enumerate(doc.get("cycles", [])):
        iid = str(rec.get("id", f"custom-{i:02d}"))
        yield iid, X, chain_from_json(X, rec), True


FAMILIES = {
    "grid3_spheres": grid3_spheres,
    "grid2_loops": grid2_loops,
    "treeprod_cycles": treeprod_cycles,
    "custom": custom_instances,
}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("instance_id", "k", "mass_T", "fill_mass", "method",
               "delta", "runtime_ms")


def fit_loglog(points):
    """Least-squares fit of log10(fill) against log10(mass).

    Returns (slope, intercept, r_squared); needs two distinct masses.
    """
    pts = [(math.log10(float(m)), math.log10(float(f)))
           for m, f in points if m > 0 and f > 0]
    if len(pts) < 2 or len({x for x, _ in pts}) < 2:
        raise ValueError("fit needs at least two distinct masses")
    n = len(pts)
    sx = sum(x for x, _ in pts)
    sy = sum(y for _, y in pts)
    sxx = sum(x * x for x, _ in pts)
    sxy = sum(x * y for x, y in pts)
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    ss_tot = sum((y - sy / n) ** 2 for _, y in pts)
    ss_res = sum((y - slope * x - intercept) ** 2 for x, y in pts)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


@dataclass
class FillingReport:
    family: str
    delta: float
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    skipped: int = 0

    def points(self, method):
        return [(r["mass_T"], r["fill_mass"]) for r in self.rows
                if r["method"] == method]

    def fit(self, method):
        return fit_loglog(self.points(method))

    def compute_fits(self):
        self.fits = {}
        for method in sorted({r["method"] for r in self.rows}):
            try:
                slope, intercept, r2 = self.fit(method)
            except ValueError:
                continue
            self.fits[method] = {"slope": slope, "intercept": intercept,
                                 "r2": r2, "points": len(self.points(method))}
        return self.fits

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            w.writeheader()
            for row in sorted(self.rows, key=lambda r: (r["instance_id"],
                                                        r["method"])):
                w.writerow(row)

    def summary(self):
        lines = [f"family={self.family} delta={self.delta} "
                 f"rows={len(self.rows)} skipped={self.skipped}"]
        for method, f in sorted(self.fits.items()):
            lines.append(f"  {method}: slope={f['slope']:.4f} "
                         f"intercept={f['intercept']:.3f} r2={f['r2']:.5f} "
                         f"n={f['points']}")
        return "\n".join(lines)


def experiment_exponent(family, delta=Fraction(1, 4), params=None, seed=1,
                        methods=("fill_cycle", "oracle"), constants=None,
                        workers=None, oracle_cell_cap=2000):
    """Run an instance family and fit the filling-mass exponent.

    Every instance gets a fill_cycle row and, when the instance is small
    enough and the oracle is requested, an ILP row.  Fillings are
    re-verified before a row is recorded; instance failures are logged
    and counted, not raised.
    """
    delta = frac(delta)
    params = dict(params or {})
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; "
                         f"known: {sorted(FAMILIES)}")
    if family == "treeprod_cycles" and "seed" not in params:
        params["seed"] = seed
    instances = list(FAMILIES[family](**params))
    if not instances:
        raise ValueError("no instances")
    cst = constants if constants is not None else load_default()
    report = FillingReport(family, float(delta))
    lock = threading.Lock()

    def run_one(inst):
        iid, X, T, oracle_ok = inst
        rows = []
        k = T.dim
        if "fill_cycle" in methods:
            t0 = time.perf_counter()
            fc = fill_cycle(T, delta, constants=cst)
            ms = 1000 * (time.perf_counter() - t0)
            if fc.chain.boundary() != _rebind(_push(T, fc.depth),
                                              fc.complex_out):
                raise AssertionError("report row failed re-verification")
            rows.append({"instance_id": iid, "k": k,
                         "mass_T": float(T.mass()),
                         "fill_mass": float(fc.mass),
                         "method": "+".join(fc.methods) or "none",
                         "delta": float(delta), "runtime_ms": round(ms, 2),
                         "violations": fc.violations})
        if "oracle" in methods and oracle_ok and len(T) <= oracle_cell_cap:
            t0 = time.perf_counter()
            mf = min_filling(T)
            ms = 1000 * (time.perf_counter() - t0)
            if mf.chain.boundary() != T:
                raise AssertionError("oracle row failed re-verification")
            rows.append({"instance_id": iid, "k": k,
                         "mass_T": float(T.mass()),
                         "fill_mass": float(mf.mass),
                         "method": "ilp-oracle", "delta": float(delta),
                         "runtime_ms": round(ms, 2), "violations": 0})
        return rows

    n_workers = workers or min(4, len(instances))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = {pool.submit(run_one, inst): inst[0] for inst in instances}
        for fut in futures:
            try:
                rows = fut.result()
            except Exception:
                log.exception("instance %s failed; skipping", futures[fut])
                with lock:
                    report.skipped += 1
                continue
            with lock:
                report.rows.extend(rows)
    report.rows.sort(key=lambda r: (r["instance_id"], r["method"]))
    report.compute_fits()
    return report
