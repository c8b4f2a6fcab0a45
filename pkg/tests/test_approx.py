"""Tests for the piecewise-minimizing approximation pipeline.

The end-to-end fixtures are sized so that the covering at the chosen
scale actually separates member labels: a cycle whose diameter is below
twice the member diameter snaps to a degenerate simplicial cycle and
exercises only the collapse path.  Both paths are covered.
"""

import json
import os
import random
from fractions import Fraction

import pytest

from isofill.approx import (
    ApproxStageError,
    CellHomotopy,
    displacement_decompose,
    kuhn_simplices,
    pm_approximate,
    simplicial_boundary,
    snap_chain,
    triangulate_chain,
    unit_simplex_volume,
)
from isofill.chains import Chain, chain_from_json, geodesic_path
from isofill.complexes import (
    CustomCubeComplex,
    GridComplex,
    RootedTree,
    TreeProductComplex,
)
from isofill.covers import Covering, CoverMember
from isofill.minfill import SimplexStore


def grid_block_boundary(X, ranges):
    """Boundary of the solid block of top cells over the given index ranges."""
    mask = (1 << X.n) - 1
    blk = Chain.zero(X, X.n)
    axes = [range(a, b) for a, b in ranges]

    def rec(i, base):
        if i == len(axes):
            nonlocal blk
            blk = blk + Chain.unit(X, X.encode(mask, tuple(base)))
            return
        for v in axes[i]:
            rec(i + 1, base + [v])

    rec(0, [])
    return blk.boundary()


def tripod(depth):
    parent = [-1]
    arms = []
    for _ in range(3):
        prev = 0
        arm = []
        for _ in range(depth):
            parent.append(prev)
            prev = len(parent) - 1
            arm.append(prev)
        arms.append(arm)
    return RootedTree(parent), arms


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------

def test_kuhn_square_hand_values():
    X = GridComplex(2, 2)
    sq = X.encode(3, (0, 0))
    P = triangulate_chain(Chain.unit(X, sq))
    lo = X.encode(0, (0, 0))
    ex = X.encode(0, (1, 0))
    ey = X.encode(0, (0, 1))
    hi = X.encode(0, (1, 1))
    assert P == {(lo, ex, hi): 1, (lo, ey, hi): -1}


def test_kuhn_simplex_count_and_signs():
    X = GridComplex(3, 2)
    cube = X.encode(7, (0, 0, 0))
    simps = kuhn_simplices(X, cube)
    assert len(simps) == 6
    assert sum(sg for _, sg in simps) == 0
    for verts, _ in simps:
        assert len(set(verts)) == 4


def test_kuhn_commutes_with_cubical_boundary():
    rng = random.Random(7)
    t, _ = tripod(3)
    spaces = [GridComplex(2, 3), GridComplex(3, 2), TreeProductComplex(t, t)]
    for X in spaces:
        for d in range(1, 3):
            cells = list(X.cells(d))
            for cid in rng.sample(cells, min(12, len(cells))):
                c = Chain.unit(X, cid)
                lhs = simplicial_boundary(triangulate_chain(c))
                rhs = triangulate_chain(c.boundary())
                assert lhs == rhs


def test_snap_of_cycle_is_formal_cycle():
    X = GridComplex(2, 4)
    T = grid_block_boundary(X, [(0, 4), (0, 4)])
    P = snap_chain(T, lambda v: v % 5)
    assert simplicial_boundary(P) == {}
    # a non-cycle snaps to something with the snapped boundary
    e = Chain.unit(X, X.encode(1, (0, 0)))
    Q = snap_chain(e, lambda v: v % 5)
    assert simplicial_boundary(Q) == snap_chain(e.boundary(), lambda v: v % 5)


def test_unit_simplex_volume_values():
    assert unit_simplex_volume(1) == 1.0
    assert unit_simplex_volume(2) == pytest.approx(3 ** 0.5 / 4)
    assert unit_simplex_volume(3) == pytest.approx(2 ** 0.5 / 12)


# ---------------------------------------------------------------------------
# homotopy machinery
# ---------------------------------------------------------------------------

def test_identity_homotopy_is_trivial():
    X = GridComplex(2, 3)
    T = grid_block_boundary(X, [(0, 2), (0, 2)])
    H = CellHomotopy(X, vmap=lambda v: v, store=None)
    assert H.image_chain(T) == T
    assert H.cylinder_chain(T).is_zero()
    assert geodesic_path(X, 0, 0).is_zero()


def test_homotopy_prism_identity():
    # shift one step along the first axis; cellular, so no store needed
    X = GridComplex(2, 4)
    step = X.encode(0, (1, 0)) - X.encode(0, (0, 0))
    H = CellHomotopy(X, vmap=lambda v: v + step, store=None)
    for cid in [X.encode(0, (0, 0)), X.encode(0, (2, 3)),
                X.encode(1, (0, 0)), X.encode(2, (1, 1)),
                X.encode(3, (0, 2))]:
        c = Chain.unit(X, cid)
        lhs = H.cylinder_chain(c).boundary()
        rhs = H.image_chain(c) - c - H.cylinder_chain(c.boundary())
        assert lhs == rhs


def test_single_member_cover_absorbs_everything():
    X = GridComplex(2, 3)
    T = grid_block_boundary(X, [(0, 3), (0, 3)])
    ids = list(range((3 + 1) ** 2))
    cov = Covering(X, 4, [CoverMember(X, ids)], Fraction(9, 8), 1)
    anchor = cov.members[0].anchor
    H = CellHomotopy(X, vmap=lambda v: anchor, store=None)
    res = displacement_decompose(T, cov, H)
    assert len(res.pieces) == 1
    assert res.pieces[0] == T
    # constant map kills every edge, so the piece is its own cycle
    assert res.cycles[0] == T
    assert res.total_cycle() == T - H.image_chain(T)


def test_displacement_two_slabs_on_a_sphere():
    X = GridComplex(3, 4)
    T = grid_block_boundary(X, [(0, 4)] * 3)
    assert T.mass() == 96

    def slab(z0, z1):
        ids = [X.encode(0, (x, y, z))
               for x in range(5) for y in range(5) for z in range(z0, z1 + 1)]
        return CoverMember(X, ids)

    cov = Covering(X, 5, [slab(0, 2), slab(2, 4)], Fraction(36, 25), 2)
    by_member = {i: M.anchor for i, M in enumerate(cov.members)}

    def chi(v):
        for i, M in enumerate(cov.members):
            if v in M.ids:
                return by_member[i]
        raise KeyError(v)

    # the two-anchor map is not cellular, so images go through a store
    H = CellHomotopy(X, vmap=chi, store=SimplexStore(X, rule="cone"))
    res = displacement_decompose(T, cov, H)
    assert len(res.pieces) == 2
    for piece in res.pieces:
        assert not piece.boundary().is_zero()
    assert res.total_cycle() == T - H.image_chain(T)
    assert len(res.levels) == 2


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

def test_pm_rejects_bad_input():
    X = GridComplex(2, 4)
    with pytest.raises(ValueError):
        pm_approximate(X, Chain.unit(X, X.encode(0, (0, 0))), 2)
    with pytest.raises(ValueError):
        pm_approximate(X, Chain.unit(X, X.encode(1, (0, 0))), 2)
    T = grid_block_boundary(X, [(1, 3), (1, 3)])
    with pytest.raises(ValueError):
        pm_approximate(X, T, 0)


def test_pm_zero_cycle_is_trivial():
    X = GridComplex(2, 4)
    res = pm_approximate(X, Chain.zero(X, 1), 2)
    assert res.P.is_zero() and res.S.is_zero() and not res.Z
    assert res.trace == [{"stage": "trivial"}]
    assert res.verify()


def test_pm_needs_a_refinable_family():
    cells = {v: (0, Fraction(1), []) for v in range(4)}
    ring = [(0, 1), (1, 2), (2, 3), (3, 0)]
    for i, (a, b) in enumerate(ring):
        cells[10 + i] = (1, Fraction(1), [(b, 1), (a, -1)])
    X = CustomCubeComplex(cells)
    T = sum((Chain.unit(X, 10 + i) for i in range(4)), Chain.zero(X, 1))
    assert T.boundary().is_zero()
    with pytest.raises(ApproxStageError) as exc:
        pm_approximate(X, T, 1)
    assert exc.value.stage == "cover"


@pytest.fixture(scope="module")
def small_loop_result():
    X = GridComplex(2, 4)
    T = grid_block_boundary(X, [(1, 3), (1, 3)])
    return T, pm_approximate(X, T, 2)


def test_pm_small_loop_collapses(small_loop_result):
    T, res = small_loop_result
    # the loop fits inside one cover member: everything snaps to a point
    assert res.refine_depth == 1
    assert res.T.mass() == T.mass() == 8
    assert res.P.is_zero()
    assert res.simplicial == {}
    assert len(res.Z) == 1 and res.Z[0] == res.T
    assert float(res.S.mass()) == 4.0
    assert res.verify()


def test_pm_grid2_loop_end_to_end():
    X = GridComplex(2, 12)
    T = grid_block_boundary(X, [(2, 10), (2, 10)])
    assert T.mass() == 32
    res = pm_approximate(X, T, 2)
    assert res.refine_depth == 1
    assert res.T.mass() == 32
    assert float(res.P.mass()) == 30.0
    assert len(res.simplicial) == 6
    assert len(res.Z) == 4
    assert res.constants["gap_mass_ratio"] == 0.0
    assert res.constants["fill_fallbacks"] == 0
    assert res.constants["simplicial_mass_ratio"] == pytest.approx(1.0)
    assert res.verify()
    stages = [line["stage"] for line in res.trace]
    for name in ("cover", "snap", "skeleton", "lambda", "gamma",
                 "displacement", "total", "bridge"):
        assert name in stages


def test_pm_grid3_sphere_collapses():
    X = GridComplex(3, 4)
    T = grid_block_boundary(X, [(1, 3)] * 3)
    assert T.mass() == 24
    res = pm_approximate(X, T, 5)
    assert res.refine_depth == 0
    assert res.P.is_zero()
    assert len(res.Z) == 1
    assert float(res.S.mass()) == 8.0
    assert res.verify()


def test_pm_octant_cover_k2():
    X = GridComplex(3, 2)
    T = grid_block_boundary(X, [(0, 2)] * 3)

    def octants(Xf, s):
        mem = []
        for ox in (0, 1):
            for oy in (0, 1):
                for oz in (0, 1):
                    ids = [Xf.encode(0, (ox + dx, oy + dy, oz + dz))
                           for dx in (0, 1) for dy in (0, 1)
                           for dz in (0, 1)]
                    mem.append(CoverMember(Xf, ids))
        return Covering(Xf, s, mem, Fraction(3, 25), 8)

    res = pm_approximate(X, T, 5, cover_factory=octants)
    assert float(res.P.mass()) == 6.0
    assert len(res.simplicial) == 12
    assert all(len(sx) == 3 for sx in res.simplicial)
    assert res.constants["simplicial_mass_ratio"] == pytest.approx(1.0)
    assert res.verify()


def test_pm_tree_product_branching():
    t, arms = tripod(5)
    X = TreeProductComplex(t, t)

    def arm_edges(arm):
        return [t.V + c - 1 for c in arm]

    blk = Chain.zero(X, 2)
    for pick in (0, 1):
        for i in arm_edges(arms[pick]):
            for j in arm_edges(arms[pick]):
                blk = blk + Chain.unit(X, X.join(i, j))
    T = blk.boundary()
    assert T.mass() == 40
    res = pm_approximate(X, T, 2)
    assert res.refine_depth == 1
    assert float(res.P.mass()) == 20.0
    assert len(res.simplicial) == 8
    assert res.verify()


def test_pm_bundle_roundtrip(small_loop_result, tmp_path):
    _, res = small_loop_result
    out = tmp_path / "bundle"
    res.to_json(str(out))
    meta = json.loads((out / "bundle.json").read_text())
    assert meta["scale"] == [2, 1]
    assert meta["refine_depth"] == res.refine_depth
    Xf = res.complex
    assert chain_from_json(Xf, str(out / meta["T"])) == res.T
    assert chain_from_json(Xf, str(out / meta["P"])) == res.P
    assert chain_from_json(Xf, str(out / meta["S"])) == res.S
    back = [chain_from_json(Xf, str(out / name)) for name in meta["Z"]]
    assert back == res.Z
    assert {tuple(sx): m for sx, m in meta["simplicial"]} == res.simplicial
