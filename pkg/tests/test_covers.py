"""Cover constructions, certificates, and the nerve maps."""

import random
from fractions import Fraction

import pytest

from isofill.complexes import build_grid, build_tree_product
from isofill.covers import (
    build_cover,
    verify_cover,
    Covering,
    NerveComplex,
    psi_lipschitz_report,
    displacement_report,
)
from isofill.exact import sqrt_leq_sum


def test_line_cover_scale_one():
    # 1-d, s = h: two families of 2-vertex segments, multiplicity 2
    X = build_grid(1, 7)
    cov = build_cover(X, 1)
    rep = verify_cover(cov)
    assert rep["max_multiplicity"] == 2
    assert cov.mult_bound == 2
    sizes = sorted(len(M) for M in cov.members)
    assert set(sizes) <= {1, 2}
    assert sizes.count(2) >= 5


def test_plane_cover_scale_one():
    # 2-d, s = h: side-2h cubes, diam 2 sqrt2 s, multiplicity <= 3
    X = build_grid(2, 9)
    cov = build_cover(X, 1)
    assert cov.c_sq == 8      # (2 sqrt2)^2
    rep = verify_cover(cov)
    assert rep["max_multiplicity"] <= 3
    full = [M for M in cov.members if len(M) == 9]
    assert full, "interior members are 3x3 vertex blocks"


def test_grid_cover_various_scales():
    X = build_grid(2, 12)
    for s in [Fraction(1, 2), 1, 2, Fraction(7, 3)]:
        cov = build_cover(X, s)
        rep = verify_cover(cov)
        assert rep["max_multiplicity"] <= cov.mult_bound


def test_grid3_cover():
    X = build_grid(3, 8)
    cov = build_cover(X, 2)
    rep = verify_cover(cov)
    assert rep["max_multiplicity"] <= 4


def test_tree_product_cover():
    X = build_tree_product(2, 2, 3)
    cov = build_cover(X, 1)
    rep = verify_cover(cov)
    assert rep["max_multiplicity"] <= 4


def test_tree_product_cover_coarse_scale():
    X = build_tree_product(2, 3, 3)
    cov = build_cover(X, 2)
    rep = verify_cover(cov)
    assert rep["max_multiplicity"] <= 4


def test_cover_json_roundtrip(tmp_path):
    X = build_grid(2, 6)
    cov = build_cover(X, 1)
    p = tmp_path / "cover.json"
    cov.to_json(str(p))
    cov2 = Covering.from_json(X, str(p))
    assert cov2.s == cov.s and len(cov2) == len(cov)
    verify_cover(cov2)


# ---------------------------------------------------------------------------
# nerve
# ---------------------------------------------------------------------------

def make_nerve(X, s, verts):
    cov = build_cover(X, s)
    return cov, NerveComplex(cov, verts)


def test_psi_is_barycentric_and_in_nerve():
    X = build_grid(2, 8)
    verts = [X.encode(0, (x, y)) for x in range(9) for y in range(9)]
    cov, nerve = make_nerve(X, 2, verts)
    for v in verts:
        u = nerve.psi(v)
        assert sum(u.values()) == 1
        assert all(q > 0 for q in u.values())
        assert nerve.contains(tuple(sorted(u)))
        # dominant member strictly contains-ish: chi has the top weight
        assert nerve.chi(v) in u


def test_psi_lipschitz_bound():
    X = build_grid(2, 8)
    verts = [X.encode(0, (x, y)) for x in range(9) for y in range(9)]
    cov, nerve = make_nerve(X, 2, verts)
    edges = []
    for v in verts:
        for eid, w, _ in X.vertex_edges(v):
            if v < w:
                edges.append((v, w))
    worst = psi_lipschitz_report(nerve, edges)
    assert worst <= 32 * cov.mult_bound**2


def test_psi_lipschitz_tree_product():
    X = build_tree_product(2, 2, 2)
    verts = list(X.cells(0))
    cov, nerve = make_nerve(X, 1, verts)
    edges = []
    for v in verts:
        for eid, w, _ in X.vertex_edges(v):
            if v < w:
                edges.append((v, w))
    worst = psi_lipschitz_report(nerve, edges)
    assert worst <= 32 * cov.mult_bound**2


def test_anchor_displacement_bound():
    X = build_grid(2, 8)
    verts = [X.encode(0, (x, y)) for x in range(9) for y in range(9)]
    cov, nerve = make_nerve(X, 2, verts)
    worst = displacement_report(nerve, verts)
    s_sq = cov.s * cov.s
    # d <= (1/2 + c) s, compared via sqrt(d^2) <= sqrt(s^2/4) + sqrt(c^2 s^2)
    assert sqrt_leq_sum(worst, s_sq / 4, cov.c_sq * s_sq)


def test_anchor_map_lands_on_member_anchors():
    X = build_grid(2, 6)
    verts = [X.encode(0, (x, y)) for x in range(7) for y in range(7)]
    cov, nerve = make_nerve(X, 1, verts)
    f = nerve.anchor_map()
    anchors = {M.anchor for M in cov.members}
    assert all(f(v) in anchors for v in verts)


def test_absorb_cell_stars_small_scale():
    # with s comfortably above the mesh the star condition holds at h
    X = build_grid(2, 12)
    verts = [X.encode(0, (x, y)) for x in range(13) for y in range(13)]
    cov, nerve = make_nerve(X, 6, verts)
    cells = [X.encode(3, (x, y)) for x in range(4) for y in range(4)]
    ok = nerve.absorb_cell_stars(cells)
    assert ok
    for c in cells:
        snap = tuple(sorted({nerve.chi(v) for v in X.vertices_of(c)}))
        assert nerve.contains(snap)


def test_nerve_metric():
    X = build_grid(1, 6)
    verts = [X.encode(0, (i,)) for i in range(7)]
    cov, nerve = make_nerve(X, 1, verts)
    u = {0: Fraction(1)}
    w = {1: Fraction(1)}
    # distinct vertices sit at distance s/sqrt2
    assert nerve.metric_sq(u, w) == cov.s * cov.s
    assert nerve.metric_sq(u, u) == 0


def test_nerve_json(tmp_path):
    X = build_grid(2, 6)
    verts = [X.encode(0, (x, y)) for x in range(7) for y in range(7)]
    cov, nerve = make_nerve(X, 2, verts)
    doc = nerve.to_json(str(tmp_path / "nerve.json"))
    assert doc["simplices"]
    assert len(doc["anchors"]) == len(cov.members)


def test_cover_rejects_custom(tmp_path):
    from isofill.complexes import CustomCubeComplex, UnsupportedOperationError
    cells = {0: (0, Fraction(1), []), 1: (0, Fraction(1), []),
             2: (1, Fraction(1), [(1, 1), (0, -1)])}
    X = CustomCubeComplex(cells, kappa_sq=2)
    with pytest.raises(UnsupportedOperationError):
        build_cover(X, 1)
