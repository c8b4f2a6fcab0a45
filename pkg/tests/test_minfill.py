import random
from fractions import Fraction

import pytest

from isofill import build_grid, build_tree_product
from isofill.chains import Chain
from isofill.complexes import UnsupportedOperationError
from isofill.minfill import (
    FillingBudgetError,
    HomologyObstructionError,
    MinimizingSimplex,
    SimplexStore,
    _grid_axis_prism,
    _treeprod_factor_sweep,
    brute_force_filling,
    cone_filling,
    cone_point,
    density_profile,
    fill_piecewise_minimizing,
    hull_region,
    min_filling,
    minimizing_simplex,
    slimness_report,
)


def random_cycle_grid(X, rng, dim, spread, coeff=1):
    terms = {}
    for _ in range(spread):
        base = tuple(rng.randrange(0, X.extent) for _ in range(X.n))
        masks = [m for m in range(1 << X.n) if bin(m).count("1") == dim]
        cid = X.encode(rng.choice(masks), base)
        terms[cid] = terms.get(cid, 0) + rng.choice([c for c in
                                                     range(-coeff, coeff + 1)
                                                     if c])
    W = Chain(X, dim, {c: v for c, v in terms.items() if v})
    return W.boundary()


# -- exact minimal fillings --------------------------------------------------

def test_unit_square_boundary_fills_to_one():
    X = build_grid(2, 3)
    T = Chain.unit(X, X.encode(3, (1, 1))).boundary()
    r = min_filling(T)
    assert r.mass == 1
    assert r.optimal
    assert r.chain.boundary() == T


def test_unit_cube_boundary_fills_to_one():
    X = build_grid(3, 3)
    T = Chain.unit(X, X.encode(7, (1, 1, 1))).boundary()
    r = min_filling(T)
    assert r.mass == 1
    assert r.chain.boundary() == T


def test_min_filling_matches_brute_force_randomized():
    X = build_grid(2, 3)
    rng = random.Random(7)
    checked = 0
    for _ in range(25):
        T = random_cycle_grid(X, rng, 1, rng.randint(1, 3))
        if T.is_zero():
            continue
        a = min_filling(T)
        b = brute_force_filling(T)
        assert a.mass == b.mass
        assert a.chain.boundary() == T
        assert b.chain.boundary() == T
        checked += 1
    assert checked >= 15


def test_min_filling_brute_force_grid3():
    X = build_grid(3, 2)
    rng = random.Random(13)
    for _ in range(8):
        T = random_cycle_grid(X, rng, 2, 2)
        if T.is_zero():
            continue
        a = min_filling(T)
        b = brute_force_filling(T)
        assert a.mass == b.mass


def test_brute_force_is_deterministic():
    X = build_grid(2, 3)
    rng = random.Random(3)
    T = random_cycle_grid(X, rng, 1, 3)
    r1 = brute_force_filling(T)
    r2 = brute_force_filling(T)
    assert r1.chain == r2.chain


def test_min_filling_rejects_non_cycles():
    X = build_grid(2, 3)
    e = X.encode(1, (0, 0))
    with pytest.raises(ValueError):
        min_filling(Chain.unit(X, e))


def test_scaled_cycle_scales_filling():
    X = build_grid(2, 4)
    T = Chain.unit(X, X.encode(3, (1, 1))).boundary()
    r = min_filling(3 * T)
    assert r.mass == 3


# -- homology obstruction and budget through a stub complex ------------------

class _TwoCellStub:
    """Two 2-cells over two faces wired so the LP optimum is fractional
    (v_A + v_B = 1 and v_A - v_B = 0) and no integer point exists."""

    family = "custom_cube"
    kappa_sq = Fraction(1)
    h = Fraction(1)

    def dim_of(self, cid):
        return 2 if cid >= 10 else 1

    def volume(self, cid):
        return Fraction(1)

    def boundary(self, cid):
        if cid == 10:
            return [(1, 1), (2, 1)]
        if cid == 11:
            return [(1, 1), (2, -1)]
        return []

    def cells(self, d, budget=None):
        return [10, 11] if d == 2 else [1, 2]

    def support_vertices(self, cids):
        return set()


def test_branch_and_bound_detects_integer_infeasibility():
    X = _TwoCellStub()
    T = Chain(X, 1, {1: 1})
    with pytest.raises(HomologyObstructionError):
        min_filling(T, region={10, 11}, _retried=True)


def test_branch_and_bound_budget_error():
    X = _TwoCellStub()
    T = Chain(X, 1, {1: 1})
    with pytest.raises(FillingBudgetError):
        min_filling(T, region={10, 11}, node_budget=0, _retried=True)


def test_hole_boundary_is_obstructed():
    # grid with the middle square removed, rebuilt as a custom complex
    from isofill.complexes import CustomCubeComplex
    G = build_grid(2, 3)
    hole = G.encode(3, (1, 1))
    cells = {}
    for d in range(3):
        for cid in G.cells(d):
            if cid == hole:
                continue
            cells[cid] = (d, G.volume(cid),
                          [list(p) for p in G.boundary(cid)])
    X = CustomCubeComplex(cells, kappa_sq=2)
    T = Chain(X, 1, dict(Chain.unit(G, hole).boundary().terms))
    assert T.boundary().is_zero()
    with pytest.raises(HomologyObstructionError):
        min_filling(T)


# -- cone fillings ------------------------------------------------------------

def test_grid_prism_homotopy_identity():
    X = build_grid(3, 4)
    rng = random.Random(41)
    for _ in range(40):
        d = rng.choice([1, 2])
        masks = [m for m in range(8) if bin(m).count("1") == d]
        base = tuple(rng.randrange(0, 4) for _ in range(3))
        c = X.encode(rng.choice(masks), base)
        a = rng.randrange(3)
        za = rng.randrange(0, 5)
        U = Chain.unit(X, c)
        P, coll = _grid_axis_prism(X, U, a, za)
        P2, _ = _grid_axis_prism(X, U.boundary(), a, za)
        assert P.boundary() + P2 == coll - U


def test_treeprod_sweep_homotopy_identity():
    X = build_tree_product(2, 2, 3)
    rng = random.Random(42)
    cells2 = list(X.cells(2))
    cells1 = list(X.cells(1))
    for _ in range(40):
        c = rng.choice(cells2 if rng.random() < 0.5 else cells1)
        U = Chain.unit(X, c)
        factor = rng.choice([0, 1])
        tree = X.tree_a if factor == 0 else X.tree_b
        target = rng.randrange(tree.V)
        P, stepped = _treeprod_factor_sweep(X, U, factor, target)
        P2, _ = _treeprod_factor_sweep(X, U.boundary(), factor, target)
        assert P.boundary() + P2 == stepped - U


def test_cone_examples():
    X = build_grid(2, 4)
    T = Chain.unit(X, X.encode(3, (1, 1))).boundary()
    own = cone_filling(T, X.encode(0, (1, 1)))
    assert own.mass == 1
    blk = Chain(X, 2, {X.encode(3, (i, j)): 1 for i in (1, 2)
                       for j in (1, 2)})
    Tb = blk.boundary()
    ctr = cone_filling(Tb, X.encode(0, (2, 2)))
    assert ctr.mass == 4
    assert ctr.chain.boundary() == Tb


def test_cone_mass_bound_grid():
    rng = random.Random(11)
    for n, ext in ((2, 5), (3, 4)):
        X = build_grid(n, ext)
        for _ in range(30):
            T = random_cycle_grid(X, rng, n - 1, rng.randint(1, 3))
            if T.is_zero():
                continue
            res = cone_filling(T, cone_point(T))
            assert res.chain.boundary() == T
            # measured sweep constant: mass <= 2 r M(T)
            assert res.extras["kappa_ratio"] <= 2.0 + 1e-9


def test_cone_mass_bound_treeprod():
    X = build_tree_product(2, 2, 4)
    rng = random.Random(12)
    sq = list(X.cells(2))
    for _ in range(25):
        W = Chain(X, 2, {rng.choice(sq): rng.choice([-1, 1])
                         for _ in range(rng.randint(1, 4))})
        T = W.boundary()
        if T.is_zero():
            continue
        res = cone_filling(T, cone_point(T))
        assert res.chain.boundary() == T
        assert res.extras["kappa_ratio"] <= 2.0 + 1e-9


def test_cone_rejects_custom():
    from isofill.complexes import CustomCubeComplex
    G = build_grid(2, 2)
    cells = {cid: (d, G.volume(cid), [list(p) for p in G.boundary(cid)])
             for d in range(3) for cid in G.cells(d)}
    X = CustomCubeComplex(cells, kappa_sq=2)
    T = Chain(X, 1, dict(Chain.unit(G, G.encode(3, (0, 0))).boundary().terms))
    with pytest.raises(UnsupportedOperationError):
        cone_filling(T, 0)


# -- minimizing simplices ------------------------------------------------------

def test_degenerate_simplex_is_zero():
    X = build_grid(2, 4)
    v = X.encode(0, (1, 1))
    w = X.encode(0, (3, 2))
    s = minimizing_simplex(X, (v, w, v))
    assert s.chain.is_zero()


def test_triangle_boundary_identity_and_mass():
    X = build_grid(2, 5)
    a = X.encode(0, (0, 0))
    b = X.encode(0, (4, 1))
    c = X.encode(0, (1, 4))
    st = SimplexStore(X)
    s = minimizing_simplex(X, (a, b, c), store=st)
    assert s.boundary_identity_holds()
    assert s.mass > 0
    # swapping two vertices flips orientation
    s2 = st.simplex((b, a, c))
    assert s2 == -st.simplex((a, b, c))


def test_simplex_store_shares_faces():
    X = build_grid(2, 5)
    a, b, c, d = (X.encode(0, p) for p in ((0, 0), (4, 0), (4, 4), (0, 4)))
    st = SimplexStore(X)
    MinimizingSimplex(st, (a, b, c))
    n_before = len(st._chains)
    MinimizingSimplex(st, (a, c, d))
    # edge (a, c) reused, not rebuilt
    assert (min(a, c), max(a, c)) in st._chains
    assert len(st._chains) > n_before


def test_fill_piecewise_minimizing_tetrahedron():
    X = build_grid(3, 4)
    a, b, c, d = (X.encode(0, p) for p in
                  ((0, 0, 0), (3, 1, 0), (1, 3, 0), (1, 1, 3)))
    st = SimplexStore(X)
    pieces = [(1, (b, c, d)), (-1, (a, c, d)), (1, (a, b, d)),
              (-1, (a, b, c))]
    z = X.encode(0, (1, 1, 1))
    res = fill_piecewise_minimizing(st, pieces, z)
    P = Chain.zero(X, 2)
    for m, verts in pieces:
        P = P + m * st.simplex(verts)
    assert res.chain.boundary() == P


def test_fill_piecewise_rejects_formal_non_cycles():
    X = build_grid(2, 4)
    a, b, c = (X.encode(0, p) for p in ((0, 0), (3, 0), (0, 3)))
    st = SimplexStore(X)
    with pytest.raises(ValueError):
        fill_piecewise_minimizing(st, [(1, (a, b, c))], a)


# -- regions and diagnostics ---------------------------------------------------

def test_hull_region_contains_support_and_cone():
    X = build_grid(2, 5)
    T = Chain.unit(X, X.encode(3, (2, 2))).boundary()
    reg = hull_region(X, T.support())
    assert T.support() <= reg
    V = min_filling(T, reg)
    assert V.chain.support() <= reg


def test_density_profile_monotone_for_flat_disk():
    X = build_grid(2, 8)
    blk = Chain(X, 2, {X.encode(3, (i, j)): 1
                       for i in range(2, 6) for j in range(2, 6)})
    prof = density_profile(blk, X.encode(0, (4, 4)),
                           [Fraction(3, 2), 2, 3, 4])
    assert prof["monotone_violations"] == []
    # far radius captures everything: ratio = 16 / 16
    assert abs(prof["rows"][-1][1] - 1.0) < 1e-12


def test_slimness_report_shape():
    X = build_grid(2, 5)
    a = X.encode(0, (0, 0))
    b = X.encode(0, (4, 1))
    c = X.encode(0, (1, 4))
    s = minimizing_simplex(X, (a, b, c))
    rep = slimness_report(s)
    assert rep["hausdorff_to_boundary"] >= 0.0
    assert rep["minimizing"]
