"""Simplexwise-affine chains in the metric realization of a nerve.

Points are barycentric coordinate vectors over cover members, kept as
sparse sorted tuples of (member index, Fraction).  A k-piece is an
ordered (k+1)-tuple of points whose supports all fit inside one nerve
simplex; chains are integer combinations of canonically oriented pieces.
The metric is the regular-simplex one: d^2 = (s^2/2) |u - u'|^2, so
squared masses are exact rationals and only reported masses take square
roots.

Central projection from an interior center is exact: a piece is split
along the pairwise exit-comparison hyperplanes (all linear in the
barycentric coordinates), each fragment exits through one facet, and
central projection sends its vertex tuple to the vertex tuple of the
image simplex.  Degenerate pieces are zero currents and are dropped on
construction.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

from .exact import frac


# ---------------------------------------------------------------------------
# points and small exact linear algebra
# ---------------------------------------------------------------------------

def pt(d):
    """Canonical sparse point from {index: coord}; coords must sum to 1."""
    items = tuple(sorted((i, frac(c)) for i, c in d.items() if c))
    if sum(c for _, c in items) != 1:
        raise ValueError("barycentric coordinates must sum to 1")
    if any(c < 0 for _, c in items):
        raise ValueError("barycentric coordinates must be nonnegative")
    return items


def coord(p, i) -> Fraction:
    for j, c in p:
        if j == i:
            return c
    return Fraction(0)


def support(p):
    return frozenset(i for i, _ in p)


def combine(weighted):
    """Affine combination [(point, weight)] with weights summing to 1."""
    acc = {}
    for p, w in weighted:
        for i, c in p:
            acc[i] = acc.get(i, 0) + w * c
    return tuple(sorted((i, c) for i, c in acc.items() if c))


def _vec(p, q):
    """q - p as a sparse dict."""
    out = {i: -c for i, c in p}
    for i, c in q:
        out[i] = out.get(i, 0) + c
    return {i: c for i, c in out.items() if c}


def _dot(a, b):
    if len(a) > len(b):
        a, b = b, a
    return sum(c * b.get(i, 0) for i, c in a.items())


def _det(M):
    """Exact determinant by fraction-free-ish Gaussian elimination."""
    n = len(M)
    M = [row[:] for row in M]
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c]), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        inv = M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / inv
            if f:
                for cc in range(c, n):
                    M[r][cc] -= f * M[c][cc]
    return det


def _solve(M, rhs):
    """Solve the square exact system M x = rhs; None when singular."""
    n = len(M)
    A = [row[:] + [rhs[i]] for i, row in enumerate(M)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c]), None)
        if piv is None:
            return None
        A[c], A[piv] = A[piv], A[c]
        inv = A[c][c]
        A[c] = [v / inv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [v - f * w for v, w in zip(A[r], A[c])]
    return [A[r][n] for r in range(n)]


def piece_mass_sq(s, pts) -> Fraction:
    """Squared mass of an affine piece under d^2 = (s^2/2)|du|^2."""
    k = len(pts) - 1
    if k == 0:
        return Fraction(1)
    vecs = [_vec(pts[0], p) for p in pts[1:]]
    G = [[_dot(a, b) for b in vecs] for a in vecs]
    g = _det(G)
    if g < 0:
        g = Fraction(0)
    return (s * s / 2) ** k * g / Fraction(math.factorial(k)) ** 2


def _parity_sort(pts):
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    sign = 1
    perm = list(order)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return tuple(pts[i] for i in order), sign


# ---------------------------------------------------------------------------
# affine chains
# ---------------------------------------------------------------------------

class AffineChain:
    """Integer combination of simplexwise-affine pieces in a nerve."""

    __slots__ = ("nerve", "dim", "pieces")

    def __init__(self, nerve, dim, pieces=None):
        self.nerve = nerve
        self.dim = dim
        self.pieces = pieces if pieces is not None else {}

    @classmethod
    def zero(cls, nerve, dim):
        return cls(nerve, dim)

    @classmethod
    def from_simplicial(cls, nerve, terms):
        """Realize a simplicial chain {sorted member tuple: coeff} by one
        affine piece per simplex on the unit points."""
        out = cls(nerve, max((len(sx) - 1 for sx in terms), default=0))
        for sx, co in terms.items():
            pts = tuple(pt({i: 1}) for i in sorted(sx))
            out._add(pts, co)
        return out

    def _add(self, pts, co):
        if co == 0:
            return
        if len({p for p in pts}) != len(pts):
            return
        if piece_mass_sq(self.nerve.s, pts) == 0:
            return
        u = frozenset().union(*(support(p) for p in pts))
        if not self.nerve.contains(u):
            raise ValueError("piece not carried by a nerve simplex")
        key, sign = _parity_sort(pts)
        w = self.pieces.get(key, 0) + sign * co
        if w:
            self.pieces[key] = w
        else:
            self.pieces.pop(key, None)

    def copy(self):
        return AffineChain(self.nerve, self.dim, dict(self.pieces))

    def __add__(self, other):
        if self.nerve is not other.nerve or self.dim != other.dim:
            raise ValueError("chain mismatch")
        out = self.copy()
        for pts, co in other.pieces.items():
            w = out.pieces.get(pts, 0) + co
            if w:
                out.pieces[pts] = w
            else:
                out.pieces.pop(pts, None)
        return out

    def __neg__(self):
        return AffineChain(self.nerve, self.dim,
                           {p: -c for p, c in self.pieces.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        if not isinstance(k, int):
            raise TypeError("integer scaling only")
        if k == 0:
            return AffineChain.zero(self.nerve, self.dim)
        return AffineChain(self.nerve, self.dim,
                           {p: k * c for p, c in self.pieces.items()})

    __rmul__ = __mul__

    def is_zero(self):
        return not self.pieces

    def __len__(self):
        return len(self.pieces)

    def boundary(self):
        out = AffineChain(self.nerve, self.dim - 1)
        for pts, co in self.pieces.items():
            for i in range(len(pts)):
                face = pts[:i] + pts[i + 1:]
                out._add(face, co * (-1) ** i)
        return out

    def mass(self) -> float:
        s = self.nerve.s
        return sum(abs(co) * math.sqrt(piece_mass_sq(s, pts))
                   for pts, co in self.pieces.items())

    def carriers(self):
        return {frozenset().union(*(support(p) for p in pts))
                for pts in self.pieces}

    def restrict_open(self, sx):
        """Pieces whose carrier is exactly the given simplex; these are
        the pieces with positive mass in its open cell."""
        sx = frozenset(sx)
        sub = {pts: co for pts, co in self.pieces.items()
               if frozenset().union(*(support(p) for p in pts)) == sx}
        return AffineChain(self.nerve, self.dim, sub)


# ---------------------------------------------------------------------------
# exact splitting of pieces by hyperplanes
# ---------------------------------------------------------------------------

def _lf_eval(lf, p):
    return sum(c * lf.get(i, 0) for i, c in p)


def _cut_point(a, b, va, vb):
    # the zero of the functional on segment [a, b]
    t = va / (va - vb)
    return combine([(a, 1 - t), (b, t)])


def _split_piece(pts, lf):
    """Split one piece by the zero set of a linear functional.

    Returns (parts_nonneg, parts_nonpos) as lists of vertex tuples; a
    piece contained in the hyperplane goes to the nonneg side only.
    """
    vals = [_lf_eval(lf, p) for p in pts]
    if all(v >= 0 for v in vals):
        return [pts], []
    if all(v <= 0 for v in vals):
        return [], [pts]
    k = len(pts) - 1
    if k == 1:
        (a, b), (va, vb) = pts, vals
        c = _cut_point(a, b, va, vb)
        if va > 0:
            return [(a, c)], [(c, b)]
        return [(c, b)], [(a, c)]
    if k == 2:
        pos = _clip_loop(pts, vals, +1)
        neg = _clip_loop(pts, vals, -1)
        return _fan(pos), _fan(neg)
    raise NotImplementedError("splitting capped at 2-dimensional pieces")


def _clip_loop(pts, vals, side):
    out = []
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        va, vb = vals[i] * side, vals[(i + 1) % n] * side
        if va >= 0:
            out.append(a)
        if (va > 0 and vb < 0) or (va < 0 and vb > 0):
            out.append(_cut_point(a, b, va, vb))
    dedup = []
    for p in out:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def _fan(loop):
    if len(loop) < 3:
        return []
    return [(loop[0], loop[i], loop[i + 1]) for i in range(1, len(loop) - 1)]


def split_chain(T, lf):
    """Split every piece of T by the functional; current-equal refinement
    returned as (nonneg part, nonpos part)."""
    pos = AffineChain(T.nerve, T.dim)
    neg = AffineChain(T.nerve, T.dim)
    for pts, co in T.pieces.items():
        ps, ns = _split_piece(pts, lf)
        for q in ps:
            pos._add(q, co)
        for q in ns:
            neg._add(q, co)
    return pos, neg


# ---------------------------------------------------------------------------
# radial deformation
# ---------------------------------------------------------------------------

class RadialDeformError(ValueError):
    pass


def _in_affine_hull(pts, z):
    vecs = [_vec(pts[0], p) for p in pts[1:]] + [_vec(pts[0], z)]
    G = [[_dot(a, b) for b in vecs] for a in vecs]
    return _det(G) == 0


def _center_candidates(omega):
    verts = sorted(omega)
    n = len(verts)
    yield pt({i: Fraction(1, n) for i in verts})
    for bump in (2, 3, 5):
        for j in verts:
            total = n - 1 + bump
            yield pt({i: Fraction(bump if i == j else 1, total)
                      for i in verts})


def _project_from(z, omega_sorted, pts):
    """Center z, fragment pts known to exit via a single facet; returns
    (facet vertex j, image vertex tuple)."""
    # exit facet: the least j whose comparison functionals are all >= 0
    bary = combine([(p, Fraction(1, len(pts))) for p in pts])
    for j in omega_sorted:
        ok = True
        for i in omega_sorted:
            if i == j:
                continue
            if coord(bary, i) * coord(z, j) - coord(bary, j) * coord(z, i) < 0:
                ok = False
                break
        if ok:
            break
    else:
        raise RadialDeformError("no exit facet; fragment split incomplete")
    zj = coord(z, j)
    img = []
    for p in pts:
        denom = zj - coord(p, j)
        if denom <= 0:
            raise RadialDeformError("fragment touches the center plane")
        t = zj / denom
        img.append(combine([(z, 1 - t), (p, t)]))
    return j, tuple(img)


def radial_deform(nerve, T, omega):
    """Push the part of T inside the open simplex omega onto its frontier
    by exact central projection.

    Returns (Z, T_next, info): Z is a cycle carried by the closed
    simplex, T_next has no mass in the open cell, and T_next + Z is a
    refinement-equal representation of T.
    """
    omega_s = tuple(sorted(omega))
    if not nerve.contains(omega_s):
        raise ValueError("omega is not a nerve simplex")
    n = len(omega_s) - 1
    if T.dim >= n:
        raise ValueError("radial deformation needs dim T < dim omega")
    for pts in T.boundary().pieces:
        u = frozenset().union(*(support(p) for p in pts))
        if u == frozenset(omega_s):
            raise RadialDeformError("boundary of T meets the open simplex")
    W = T.restrict_open(omega_s)
    if W.is_zero():
        return (AffineChain.zero(nerve, T.dim), T,
                {"center": None, "K": 0.0, "omega_mass": 0.0})

    pieces_list = list(W.pieces.items())
    w_mass, w_zero = current_profile(W)
    best = None
    for z in _center_candidates(omega_s):
        if any(_in_affine_hull(pts, z) for pts, _ in pieces_list):
            continue
        Z, proj = _project_all(nerve, W, omega_s, z)
        # a cycle projects to the zero current when the center sits in a
        # chamber it does not wind around; such a center discards the
        # homology class, so it only wins if every candidate degenerates
        pm, pz = current_profile(proj)
        score = (pz and not w_zero, pm)
        if best is None or score < best[0]:
            best = (score, z, Z, proj)
    if best is None:
        raise RadialDeformError("no valid projection center found")
    score, z, Z, proj = best
    T_next = T - W + proj
    info = {"center": z,
            "K": (current_profile(Z)[0] / w_mass) if w_mass else 0.0,
            "omega_mass": w_mass, "proj_mass": score[1]}
    return Z, T_next, info


def _project_all(nerve, W, omega_s, z):
    # split by every pairwise exit-comparison hyperplane, then project
    frags = W.copy()
    for a, b in combinations(omega_s, 2):
        za, zb = coord(z, a), coord(z, b)
        lf = {a: zb, b: -za}
        pos, neg = split_chain(frags, lf)
        frags = pos + neg
    proj = AffineChain(nerve, W.dim)
    for pts, co in frags.pieces.items():
        _, img = _project_from(z, omega_s, pts)
        proj._add(img, co)
    return frags - proj, proj


# ---------------------------------------------------------------------------
# skeleton reduction and canonical extraction
# ---------------------------------------------------------------------------

def skeleton_reduce(nerve, T, k):
    """Reduce a cycle to the k-skeleton by descending radial deformation.

    Returns (P_canonical, T_k, Z_list, ledger): P_canonical maps sorted
    k-simplex tuples to integer multiplicities, T_k is the affine chain
    carried by the k-skeleton, Z_list collects (omega, Z) pairs, and the
    ledger records per-level masses.
    """
    if T.dim != k:
        raise ValueError("dimension mismatch")
    cur = T
    zs = []
    ledger = []
    top = max((len(c) - 1 for c in cur.carriers()), default=k)
    for level in range(top, k, -1):
        m_before = current_profile(cur)[0]
        omegas = sorted(sx for sx in {tuple(sorted(c))
                                      for c in cur.carriers()}
                        if len(sx) == level + 1)
        for omega in omegas:
            Z, cur, info = radial_deform(nerve, cur, omega)
            if not Z.is_zero():
                zs.append((omega, Z))
        ledger.append({"level": level, "mass_before": m_before,
                       "mass_after": current_profile(cur)[0]})
    leftover = {c for c in cur.carriers() if len(c) > k + 1}
    if leftover:
        raise RadialDeformError("mass left above the target skeleton")
    P = extract_simplicial(nerve, cur, k)
    bdry = {}
    for sx, m in P.items():
        for i in range(len(sx)):
            face = sx[:i] + sx[i + 1:]
            w = bdry.get(face, 0) + m * (-1) ** i
            if w:
                bdry[face] = w
            else:
                bdry.pop(face, None)
    if T.boundary().is_zero() and bdry:
        raise RadialDeformError("canonical reduction lost the cycle")
    return P, cur, zs, ledger


class AmbiguousProbe(Exception):
    pass


def _probe_points(sx):
    verts = sorted(sx)
    n = len(verts)
    yield pt({i: Fraction(1, n) for i in verts})
    primes = (7, 11, 13, 17, 19, 23)
    for p in primes:
        total = sum(p + t for t in range(n))
        yield pt({i: Fraction(p + t, total) for t, i in enumerate(verts)})
        yield pt({i: Fraction(p + n - 1 - t, total)
                  for t, i in enumerate(verts)})


def _multiplicity_at(chain, sx, q):
    verts = sorted(sx)
    chart = verts[1:]
    total = 0
    for pts, co in chain.pieces.items():
        u = frozenset().union(*(support(p) for p in pts))
        if u != frozenset(verts):
            continue
        M = [[coord(p, i) - coord(pts[0], i) for p in pts[1:]]
             for i in chart]
        rhs = [coord(q, i) - coord(pts[0], i) for i in chart]
        lam = _solve(M, rhs)
        if lam is None:
            raise AmbiguousProbe("degenerate chart")
        ssum = sum(lam)
        if any(l == 0 for l in lam) or ssum == 1:
            raise AmbiguousProbe("probe on piece boundary")
        if all(l > 0 for l in lam) and ssum < 1:
            sign = 1 if _det(M) > 0 else -1
            total += co * sign
    return total


def extract_simplicial(nerve, chain, k):
    """Constant-multiplicity extraction: the integer covering number of
    each open k-simplex, probed at interior points off all piece edges."""
    out = {}
    for c in chain.carriers():
        if len(c) != k + 1:
            continue
        sx = tuple(sorted(c))
        for q in _probe_points(sx):
            try:
                m = _multiplicity_at(chain, sx, q)
            except AmbiguousProbe:
                continue
            if m:
                out[sx] = m
            break
        else:
            raise RadialDeformError(
                f"no unambiguous probe point found in {sx}")
    return out


# ---------------------------------------------------------------------------
# canonical one-dimensional currents (exact identity checks)
# ---------------------------------------------------------------------------

def canonical_segments(T):
    """Reduce a 1-dimensional affine chain to a canonical interval form:
    {(line key): [(a, b, multiplicity)]} with maximal constant intervals.
    Two 1-chains are equal as currents iff these forms are equal."""
    if T.dim != 1:
        raise ValueError("1-chains only")
    lines = {}
    for (a, b), co in T.pieces.items():
        d = _vec(a, b)
        first = min(d)
        dn = {i: c / d[first] for i, c in d.items()}
        # affine parameter along the normalized direction
        nrm = _dot(dn, dn)
        ta = _dot(dict(a), dn) / nrm
        tb = _dot(dict(b), dn) / nrm
        # anchor the line at parameter zero
        base = {i: -ta * c for i, c in dn.items()}
        for i, c in a:
            base[i] = base.get(i, 0) + c
        key = (tuple(sorted((i, c) for i, c in base.items() if c)),
               tuple(sorted(dn.items())))
        if ta < tb:
            lines.setdefault(key, []).append((ta, tb, co))
        else:
            lines.setdefault(key, []).append((tb, ta, -co))
    out = {}
    for key, segs in lines.items():
        events = {}
        for a, b, m in segs:
            events[a] = events.get(a, 0) + m
            events[b] = events.get(b, 0) - m
        # a zero net jump is not a breakpoint; dropping it merges
        # adjacent intervals of equal multiplicity
        cuts = sorted(t for t, dm in events.items() if dm)
        acc = 0
        runs = []
        for i, t in enumerate(cuts):
            acc += events[t]
            if i + 1 < len(cuts) and acc:
                runs.append((t, cuts[i + 1], acc))
        if runs:
            out[key] = tuple(runs)
    return out


def chains_equal_1d(A, B):
    return canonical_segments(A) == canonical_segments(B)


# ---------------------------------------------------------------------------
# exact current profile
# ---------------------------------------------------------------------------
#
# Pieces of a chain may overlap with opposite orientations without being
# identical simplices, so the piece dictionary alone neither detects the
# zero current nor measures mass correctly.  The profile below groups
# pieces by the affine flat they span, refines each group by every facet
# hyperplane occurring in it, and reads off the locally constant
# multiplicity at one interior probe per refined cell.

def _flat_key(pts):
    """Canonical description of the k-flat spanned by a nondegenerate
    piece: (coords J, chart C, graph rows expressing J without C)."""
    J = tuple(sorted(set().union(*(support(p) for p in pts))))
    k = len(pts) - 1
    chart = None
    for cand in combinations(J, k):
        M = [[coord(p, c) - coord(pts[0], c) for p in pts[1:]]
             for c in cand]
        if _det(M) != 0:
            chart = cand
            break
    if chart is None:
        raise ValueError("degenerate piece has no chart")
    rows = []
    for j in J:
        if j in chart:
            continue
        A = [[Fraction(1)] + [coord(p, c) for c in chart] for p in pts]
        rhs = [coord(p, j) for p in pts]
        sol = _solve(A, rhs)
        rows.append((j, tuple(sol)))
    return (J, chart, tuple(rows))


def _chart_xy(pts, chart):
    return [tuple(coord(p, c) for c in chart) for p in pts]


def _orient_in_chart(pts, chart):
    xs = _chart_xy(pts, chart)
    if len(pts) == 2:
        return 1 if xs[1][0] > xs[0][0] else -1
    (x0, y0), (x1, y1), (x2, y2) = xs
    d = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    return 1 if d > 0 else -1


def _facet_cuts(pts, chart, J):
    """Hyperplanes in the flat supporting the facets of a piece, written
    as coordinate functionals (constants spread over J, which sums to 1
    on the flat)."""
    out = []
    xs = _chart_xy(pts, chart)
    if len(chart) == 1:
        c = chart[0]
        for (t,) in xs:
            lf = {j: -t for j in J}
            lf[c] += 1
            out.append(lf)
    else:
        c1, c2 = chart
        for i in range(3):
            (px, py), (qx, qy) = xs[i], xs[(i + 1) % 3]
            a = qy - py
            b = px - qx
            const = -(a * px + b * py)
            lf = {j: const for j in J}
            lf[c1] += a
            lf[c2] += b
            out.append(lf)
    return out


def _member_tester(pts, chart):
    """Precompiled strict-containment test in chart coordinates.

    Works with the adjugate so membership is multiply-adds and sign
    comparisons, no solves and no divisions."""
    xs = _chart_xy(pts, chart)
    if len(chart) == 1:
        t0, t1 = xs[0][0], xs[1][0]
        if t1 < t0:
            t0, t1 = t1, t0

        def inside(x, _t0=t0, _t1=t1):
            return _t0 < x[0] < _t1

        return inside
    (x0, y0), (x1, y1), (x2, y2) = xs
    ax, ay = x1 - x0, y1 - y0
    bx, by = x2 - x0, y2 - y0
    det = ax * by - bx * ay
    if det < 0:
        ax, ay, bx, by = bx, by, ax, ay
        det = -det

    def inside(x, x0=x0, y0=y0, ax=ax, ay=ay, bx=bx, by=by, det=det):
        dx = x[0] - x0
        dy = x[1] - y0
        l1 = by * dx - bx * dy
        if l1 <= 0:
            return False
        l2 = ax * dy - ay * dx
        return l2 > 0 and l1 + l2 < det

    return inside


def current_profile(C):
    """Exact profile of an affine chain as a current: (mass, is_zero).

    Mass is the integral of |multiplicity|, so overlapping pieces of
    opposite orientation cancel; is_zero is exact.  Dimensions 0..2."""
    if C.dim > 2:
        raise NotImplementedError("current profile beyond 2-chains")
    if not C.pieces:
        return 0.0, True
    if C.dim == 0:
        # identical points already cancel on construction
        acc = {}
        for (p,), co in C.pieces.items():
            acc[p] = acc.get(p, 0) + co
        mass = float(sum(abs(v) for v in acc.values()))
        return mass, mass == 0.0
    groups = {}
    for pts, co in C.pieces.items():
        groups.setdefault(_flat_key(pts), []).append((pts, co))
    s = C.nerve.s
    total = 0.0
    zero = True
    for (J, chart, _), members in groups.items():
        cuts = {}
        for pts, _co in members:
            for lf in _facet_cuts(pts, chart, J):
                vals = tuple(lf[j] for j in J)
                lead = next(v for v in vals if v)
                cuts.setdefault(tuple(v / lead for v in vals), lf)
        testers = [(_member_tester(pts, chart),
                    co * _orient_in_chart(pts, chart))
                   for pts, co in members]
        for pts, _co in members:
            frags = [pts]
            for lf in cuts.values():
                nxt = []
                for f in frags:
                    pos, neg = _split_piece(f, lf)
                    nxt.extend(pos)
                    nxt.extend(neg)
                frags = nxt
            for f in frags:
                w = Fraction(1, len(f))
                probe = tuple(sum(coord(p, c) for p in f) * w
                              for c in chart)
                mult = 0
                cover = 0
                for inside, signed in testers:
                    if inside(probe):
                        mult += signed
                        cover += 1
                if mult:
                    zero = False
                    total += (abs(mult)
                              * math.sqrt(float(piece_mass_sq(s, f)))
                              / cover)
    return total, zero


def current_is_zero(C):
    return current_profile(C)[1]


def chains_equal_current(A, B):
    """Exact equality of affine chains as currents (dimensions 0..2)."""
    if A.dim != B.dim:
        return False
    return current_is_zero(A - B)
