"""Tests for the top-level filling algorithms and the harness.

Fixture sizes are chosen so every branch is visited at least once while
the whole file stays in the tens of seconds: the euclidean fast path
(mass below the threshold), the scale ladder on both k=1 and k=2, the
greedy extraction on a two-component cycle that is not round, and the
experiment harness with both report methods.
"""

import csv
import math
import os
from fractions import Fraction

import pytest

from isofill.chains import Chain
from isofill.complexes import GridComplex, RootedTree, TreeProductComplex
from isofill.constants import MeasuredConstants
from isofill.driver import (
    CSV_COLUMNS,
    DecompositionError,
    ScaleLadder,
    _find_extraction,
    _push,
    _rebind,
    block_boundary,
    experiment_exponent,
    fill_cycle,
    fill_round,
    fit_loglog,
    grid2_loops,
    grid3_spheres,
    is_round,
    round_decompose,
    treeprod_cycles,
)


def loop(X, x, y, w, hgt):
    return block_boundary(X, ((x, x + w), (y, y + hgt)))


def far_loops():
    """Two unit loops at opposite corners of a large plane; mass 8 but
    diameter 59*sqrt(2), so not round at beta=6."""
    X = GridComplex(2, 60)
    return X, loop(X, 0, 0, 1, 1) + loop(X, 59, 59, 1, 1)


# -- scale ladder -----------------------------------------------------------

def test_ladder_exact_powers():
    lad = ScaleLadder.build(256, 2, Fraction(1, 4))
    assert lad.scales == [16, 4]
    assert lad.ulp_bumps == 0
    assert len(lad) == 1


def test_ladder_invariants_hold():
    for M in (24, 294, 1000, 4096):
        for k, delta in ((1, Fraction(1, 4)), (2, Fraction(1, 5)),
                         (2, Fraction(2, 5))):
            lad = ScaleLadder.build(M, k, delta)
            assert lad.verify()
            p, q = delta.numerator, delta.denominator
            assert lad.scales[0] ** k >= M
            assert lad.scales[-1] ** q >= M ** p
            for a, b in zip(lad.scales, lad.scales[1:]):
                assert a > b
                assert (a / b) ** q <= M ** p


def test_ladder_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ScaleLadder.build(256, 2, Fraction(1, 2))
    with pytest.raises(ValueError):
        ScaleLadder.build(256, 2, 0)
    with pytest.raises(ValueError):
        ScaleLadder.build(1, 2, Fraction(1, 4))


def test_ladder_verify_catches_corruption():
    lad = ScaleLadder.build(256, 2, Fraction(1, 4))
    lad.scales = [4, 16]
    with pytest.raises(AssertionError):
        lad.verify()
    lad.scales = [Fraction(1, 2), Fraction(1, 4)]
    with pytest.raises(AssertionError):
        lad.verify()


# -- roundness and decomposition --------------------------------------------

def test_is_round_unit_loop():
    X = GridComplex(2, 4)
    assert is_round(loop(X, 1, 1, 1, 1), 6)


def test_is_round_rejects_far_pair():
    _, T = far_loops()
    assert not is_round(T, 6)


def test_decompose_zero_and_round():
    X = GridComplex(2, 6)
    z = Chain.zero(X, 1)
    res, rounds = round_decompose(z)
    assert res.is_zero() and rounds == []
    T = loop(X, 1, 1, 3, 3)
    res, rounds = round_decompose(T)
    assert res.is_zero()
    assert len(rounds) == 1 and rounds[0] == T
    assert rounds[0] is not T


def test_decompose_far_pair():
    X, T = far_loops()
    residual, rounds = round_decompose(T)
    total = residual
    for R in rounds:
        assert R.boundary().is_zero()
        assert is_round(R, 6)
        total = total + R
    assert total == T
    assert residual.mass() <= Fraction(3, 4) * T.mass()
    extracted = sum((R.mass() for R in rounds), Fraction(0))
    assert extracted <= Fraction(3, 2) * T.mass()


def test_decompose_validates_input():
    X = GridComplex(2, 4)
    notcycle = Chain.unit(X, loop(X, 0, 0, 1, 1).support()[0])
    with pytest.raises(ValueError):
        round_decompose(notcycle)


def test_decompose_reports_failure_with_best_attempt():
    X, T = far_loops()
    # a density threshold no ball can meet leaves the cycle untouched
    with pytest.raises(DecompositionError) as err:
        round_decompose(T, rho0=10 ** 6)
    assert err.value.clause == "residual-mass"
    assert err.value.residual == T
    assert err.value.rounds == []


def test_find_extraction_on_far_pair():
    X, T = far_loops()
    hit = _find_extraction(T, Fraction(1, 2), Fraction(2), Fraction(6))
    assert hit is not None
    inside, filler, piece = hit
    assert not piece.is_zero()
    assert is_round(piece, 6)
    assert piece == inside - filler
    assert 2 * filler.mass() <= inside.mass()
    assert piece.boundary().is_zero()


# -- depth helpers ----------------------------------------------------------

def test_push_preserves_mass_and_boundary():
    X = GridComplex(2, 5)
    T = loop(X, 0, 0, 3, 2)
    T1 = _push(T, 1)
    assert T1.mass() == T.mass()
    assert T1.boundary().is_zero()
    assert T1.complex.h == Fraction(1, 2)


def test_rebind_requires_same_layout():
    Xa = GridComplex(2, 5)
    Xb = GridComplex(2, 5)
    T = loop(Xa, 0, 0, 2, 2)
    other = _rebind(T, Xb)
    assert other.complex is Xb and other.terms == T.terms
    with pytest.raises(ValueError):
        _rebind(T, GridComplex(2, 5, Fraction(1, 2)))


# -- fill_round -------------------------------------------------------------

def test_fill_round_zero():
    X = GridComplex(2, 4)
    rf = fill_round(Chain.zero(X, 1))
    assert rf.method == "zero" and rf.chain.is_zero() and rf.depth == 0


def test_fill_round_small_mass_euclidean():
    X = GridComplex(3, 6)
    T = block_boundary(X, [(0, 6)] * 3)      # mass 216 <= r0^4 = 256
    rf = fill_round(T)
    assert rf.method == "euclidean"
    assert rf.depth == 0
    assert rf.chain.boundary() == T
    assert rf.chain.mass() == 216
    assert rf.ledger[0]["branch"] == "euclidean"


def test_fill_round_ladder_k2():
    X = GridComplex(3, 7)
    T = block_boundary(X, [(0, 7)] * 3)      # mass 294 > 256: ladder
    rf = fill_round(T)
    assert rf.method == "ladder"
    assert rf.ladder is not None and len(rf.ladder) >= 1
    pushed = _rebind(_push(T, rf.depth), rf.complex_out)
    assert rf.chain.boundary() == pushed
    assert rf.chain.mass() == 343            # fills the solid block exactly
    rungs = [row for row in rf.ledger if row["rung"] != "final"]
    assert len(rungs) == len(rf.ladder)
    final = rf.ledger[-1]
    assert final["rung"] == "final"
    assert final["total_mass"] == float(rf.chain.mass())


def test_fill_round_rejects_non_round():
    _, T = far_loops()
    with pytest.raises(ValueError):
        fill_round(T)


def test_fill_round_rejects_non_cycle():
    X = GridComplex(2, 4)
    e = Chain.unit(X, loop(X, 0, 0, 1, 1).support()[0])
    with pytest.raises(ValueError):
        fill_round(e)


# -- fill_cycle -------------------------------------------------------------

def test_fill_cycle_small_branch_ledger():
    X = GridComplex(2, 8)
    T = loop(X, 1, 1, 3, 2)                  # mass 10 <= r0^4 = 16
    fc = fill_cycle(T)
    assert fc.methods == ["euclidean"]
    assert fc.depth == 0
    assert fc.chain.boundary() == T
    assert fc.mass == 6
    assert fc.violations == 0
    (row,) = fc.ledger
    assert row["branch"] == "euclidean"
    for key in ("ledger_lhs", "ledger_rhs", "ok", "residual_mass"):
        assert key in row
    assert row["ok"] is True


def test_fill_cycle_ladder_k1():
    X = GridComplex(2, 8)
    T = loop(X, 0, 0, 8, 8)                  # mass 32 > 16: ladder
    fc = fill_cycle(T)
    assert "ladder" in fc.methods
    pushed = _rebind(_push(T, fc.depth), fc.complex_out)
    assert fc.chain.boundary() == pushed
    assert fc.mass == 64                     # minimal: interior cancellation
    assert fc.violations == 0
    assert all(row["ok"] for row in fc.ledger)
    decomposed = [r for r in fc.ledger if r["branch"] == "decompose"]
    assert decomposed
    for key in ("ledger_lhs", "ledger_rhs", "ok", "round_count"):
        assert key in decomposed[0]
    assert fc.round_ledgers                  # rung rows from the sub-fill


def test_fill_cycle_two_components():
    X, T = far_loops()
    fc = fill_cycle(T)
    assert fc.chain.boundary() == _rebind(_push(T, fc.depth), fc.complex_out)
    assert fc.mass == 2                      # each unit loop costs one square
    assert fc.violations == 0


def test_fill_cycle_counts_violations_without_raising():
    X = GridComplex(2, 8)
    T = loop(X, 1, 1, 3, 2)
    tight = MeasuredConstants(C_prime=1e-12)
    fc = fill_cycle(T, constants=tight)
    assert fc.violations >= 1
    assert fc.chain.boundary() == T          # result still exact


def test_fill_cycle_validates_input():
    X = GridComplex(2, 4)
    T = loop(X, 0, 0, 2, 2)
    with pytest.raises(ValueError):
        fill_cycle(T, delta=1)
    with pytest.raises(ValueError):
        fill_cycle(Chain.unit(X, T.support()[0]))


def test_fill_cycle_treeprod_staircase():
    insts = list(treeprod_cycles(depth=3, count=4, seed=5))
    iid, X, T, _ = insts[0]
    fc = fill_cycle(T)
    assert fc.chain.boundary() == _rebind(_push(T, fc.depth), fc.complex_out)
    assert fc.violations == 0


# -- instance families ------------------------------------------------------

def test_grid_families_are_cycles_with_known_masses():
    for iid, X, T, ok in grid3_spheres(2, 4):
        assert T.boundary().is_zero() and ok
        m = int(iid.rsplit("-", 1)[1])
        assert T.mass() == 6 * m * m
    for iid, X, T, ok in grid2_loops(2, 4):
        m = int(iid.rsplit("-", 1)[1])
        assert T.mass() == 4 * m


def test_staircase_family_structure():
    insts = list(treeprod_cycles())
    assert len(insts) == 12
    ids = [iid for iid, _, _, _ in insts]
    assert len(set(ids)) == len(ids)
    masses = sorted(float(T.mass()) for _, _, T, _ in insts)
    for _, X, T, _ in insts:
        assert T.boundary().is_zero()
        assert X.family == "tree_product"
    # the family must span at least 1.5 decades of mass
    assert math.log10(masses[-1] / masses[0]) >= 1.5


def test_staircase_family_deterministic():
    a = [T.terms for _, _, T, _ in treeprod_cycles(depth=4, count=5, seed=9)]
    b = [T.terms for _, _, T, _ in treeprod_cycles(depth=4, count=5, seed=9)]
    assert a == b


# -- fits and reports -------------------------------------------------------

def test_fit_loglog_exact_line():
    slope, intercept, r2 = fit_loglog([(10, 100), (100, 10000), (1000, 10 ** 6)])
    assert abs(slope - 2.0) < 1e-12
    assert abs(intercept) < 1e-12
    assert r2 == 1.0


def test_fit_loglog_needs_two_masses():
    with pytest.raises(ValueError):
        fit_loglog([(10, 100)])
    with pytest.raises(ValueError):
        fit_loglog([(10, 100), (10, 200)])


def test_experiment_round_trip(tmp_path):
    rep = experiment_exponent("grid2_loops", params={"m_lo": 2, "m_hi": 5})
    assert rep.skipped == 0
    assert {r["method"] for r in rep.rows} == {"euclidean", "ilp-oracle"}
    assert "ilp-oracle" in rep.fits
    assert abs(rep.fits["ilp-oracle"]["slope"] - 2.0) < 1e-9
    out = tmp_path / "rep.csv"
    rep.to_csv(out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(rep.rows) + 1


def test_experiment_oracle_only():
    rep = experiment_exponent("grid3_spheres", params={"m_lo": 2, "m_hi": 4},
                              methods=("oracle",))
    assert {r["method"] for r in rep.rows} == {"ilp-oracle"}
    assert len(rep.rows) == 3


def test_experiment_rejects_unknown_family():
    with pytest.raises(ValueError):
        experiment_exponent("no_such_family")
    with pytest.raises(ValueError):
        experiment_exponent("grid2_loops", params={"m_lo": 5, "m_hi": 2})
