"""Measured constants and their calibration.

Existence proofs for the filling machinery assert constants that depend
only on dimension; none come with usable values.  This module keeps the
measured stand-ins: ratio ceilings observed on a fixed calibration
battery, frozen into a bundled JSON file and loaded as defaults.  The
exact knobs that enter rational comparisons (decomposition parameters,
the slice constant) are stored as fraction strings, everything that is
only reported is a float.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from importlib import resources

from .exact import frac

log = logging.getLogger(__name__)

_FRACTION_FIELDS = ("kappa_slice", "beta", "eps", "lam", "rho0")


@dataclass
class MeasuredConstants:
    # cone sweep: M(V) <= kappa_cone * r * M(T)
    kappa_cone: float = 2.0
    # coarea pick: min slice mass * r <= kappa_slice * band mass (exact knob)
    kappa_slice: Fraction = Fraction(2)
    # minimizing triangle mass <= c_2 * (kappa * s)^2 at mesh s
    c_2: float = 0.5
    # euclidean-type filling: M(V) <= gamma_k * M(T)^(1 + 1/k)
    gamma_1: float = 1.0
    gamma_2: float = 1.0
    # snap displacement: d(x, phi(psi(x))) <= L_meas * s
    L_meas: float = 6.0
    # measured Lipschitz constant of the nerve map (reported, not a bound)
    lip_psi: float = 0.0
    # approximation mass ledgers: sum M(R_i) <= A_meas * M(T),
    # |P|_1 * s^k <= B_meas * M(T); remainder rungs sum M(Z) <= B_meas^n M(R)
    A_meas: float = 3.0
    B_meas: float = 13.0
    # weighted iteration ledger constant for fill_cycle
    C_prime: float = 50.0
    # round decomposition configuration (exact knobs)
    beta: Fraction = Fraction(6)
    eps: Fraction = Fraction(1, 4)
    lam: Fraction = Fraction(1, 2)
    rho0: Fraction = Fraction(1, 2)
    # small-mass threshold scale r0 = r0_factor * k * h
    r0_factor: int = 2
    source: str = "code-defaults"
    battery: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in _FRACTION_FIELDS:
            setattr(self, name, frac(getattr(self, name)))

    @property
    def mu(self) -> Fraction:
        """Extraction weight eps / (1 + lam) of the mass ledger."""
        return self.eps / (1 + self.lam)

    def gamma(self, k: int) -> float:
        return {1: self.gamma_1, 2: self.gamma_2}.get(k, self.gamma_2)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        for name in _FRACTION_FIELDS:
            out[name] = str(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MeasuredConstants":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "MeasuredConstants":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_default() -> MeasuredConstants:
    """Bundled calibrated constants; code defaults when no file is found."""
    try:
        ref = resources.files("isofill").joinpath("data/default_constants.json")
        with ref.open() as fh:
            return MeasuredConstants.from_dict(json.load(fh))
    except (FileNotFoundError, ModuleNotFoundError):
        log.warning("no bundled constants file; using code defaults")
        return MeasuredConstants()


# ---------------------------------------------------------------------------
# calibration battery
# ---------------------------------------------------------------------------

def _loop(X, x0, y0, w, ht):
    from .chains import Chain
    blk = Chain.zero(X, 2)
    for x in range(x0, x0 + w):
        for y in range(y0, y0 + ht):
            blk = blk + Chain.unit(X, X.encode(3, (x, y)))
    return blk.boundary()


def _box(X, lo, hi):
    from .chains import Chain
    blk = Chain.zero(X, 3)
    for x in range(lo[0], hi[0]):
        for y in range(lo[1], hi[1]):
            for z in range(lo[2], hi[2]):
                blk = blk + Chain.unit(X, X.encode(7, (x, y, z)))
    return blk.boundary()


def _cone_battery(rng):
    from .complexes import GridComplex
    from .minfill import cone_filling, cone_point
    out = []
    X2 = GridComplex(2, 10)
    for _ in range(12):
        w, ht = rng.randint(1, 6), rng.randint(1, 6)
        x0 = rng.randint(0, 10 - w)
        y0 = rng.randint(0, 10 - ht)
        T = _loop(X2, x0, y0, w, ht)
        out.append(cone_filling(T, cone_point(T)).extras["kappa_ratio"])
    X3 = GridComplex(3, 5)
    for _ in range(8):
        lo = [rng.randint(0, 3) for _ in range(3)]
        hi = [lo[i] + rng.randint(1, 5 - lo[i]) for i in range(3)]
        T = _box(X3, lo, hi)
        out.append(cone_filling(T, cone_point(T)).extras["kappa_ratio"])
    return out


def _slice_battery(rng):
    from .chains import slice_min, truncated_distance_field
    from .complexes import GridComplex
    out = []
    X = GridComplex(2, 12)
    for _ in range(12):
        w, ht = rng.randint(3, 8), rng.randint(3, 8)
        T = _loop(X, rng.randint(0, 12 - w), rng.randint(0, 12 - ht), w, ht)
        x = min(T.support_vertices())
        r = frac(max(2, min(w, ht)))
        fld = truncated_distance_field(X, [x], 4 * r)
        rho = lambda v, f=fld, c=4 * r: f.get(v, c)
        res = slice_min(T, rho, r, 2 * r)
        if res.band_mass > 0:
            out.append(float(res.sliced.mass() * r / res.band_mass))
    return out


def _euclid_battery(rng):
    from .complexes import GridComplex
    from .minfill import euclidean_filling
    g1, g2 = [], []
    X2 = GridComplex(2, 12)
    for _ in range(8):
        w, ht = rng.randint(2, 8), rng.randint(2, 8)
        T = _loop(X2, rng.randint(0, 12 - w), rng.randint(0, 12 - ht), w, ht)
        g1.append(euclidean_filling(T).extras["gamma_ratio"])
    X3 = GridComplex(3, 5)
    for _ in range(5):
        lo = [rng.randint(0, 2) for _ in range(3)]
        hi = [lo[i] + rng.randint(1, 5 - lo[i]) for i in range(3)]
        T = _box(X3, lo, hi)
        g2.append(euclidean_filling(T).extras["gamma_ratio"])
    return g1, g2


def _pm_battery(families=None):
    """Fixed approximation instances; returns per-run constants dicts and
    the measured snap displacement / nerve Lipschitz ratios."""
    from .approx import pm_approximate
    from .chains import Chain
    from .complexes import GridComplex, RootedTree, TreeProductComplex
    from .covers import NerveComplex, build_cover, displacement_report, \
        psi_lipschitz_report, verify_cover
    from .exact import float_sqrt
    runs = []
    disp, lips = [], []

    def measure_cover(X, T, s):
        s = frac(s)
        cov = build_cover(X, s)
        support = sorted(X.closure(T.support()))
        corners = sorted({v for c in support for v in X.vertices_of(c)})
        verify_cover(cov, corners)
        nerve = NerveComplex(cov, corners)
        nerve.absorb_cell_stars(support)
        worst = displacement_report(nerve, corners)
        disp.append(float_sqrt(frac(worst)) / float(s))
        pairs = [tuple(X.vertices_of(c)) for c in support
                 if X.dim_of(c) == 1]
        rep = psi_lipschitz_report(nerve, pairs)
        if rep > 0:
            lips.append(float_sqrt(frac(rep)))

    if families is None or "grid" in families:
        X = GridComplex(2, 12)
        T = _loop(X, 2, 2, 8, 8)
        runs.append(pm_approximate(X, T, 2).constants)
        Xf, rmap = X.refine(1)
        measure_cover(Xf, rmap.chain(T), 2)

        X = GridComplex(2, 16)
        T = _loop(X, 1, 1, 14, 14)
        for s in (2, 4):
            runs.append(pm_approximate(X, T, s).constants)
        Xf, rmap = X.refine(1)
        measure_cover(Xf, rmap.chain(T), 2)

        X = GridComplex(3, 4)
        T = _box(X, (0, 0, 0), (4, 4, 4))
        runs.append(pm_approximate(X, T, 5).constants)
        measure_cover(X, T, 5)

    if families is None or "tree_product" in families:
        t = RootedTree.uniform(2, 6)
        XP = TreeProductComplex(t, t)
        arm = []
        cur = 0
        for _ in range(6):
            cur = t.children[cur][0]
            arm.append(cur)
        strip = Chain.zero(XP, 2)
        for c in arm:
            ea = t.V + c - 1
            strip = strip + Chain.unit(XP, XP.join(ea, t.V + arm[0] - 1))
        runs.append(pm_approximate(XP, strip.boundary(), 2).constants)
        measure_cover(XP, strip.boundary(), 4)
    return runs, disp, lips


def _cycle_battery(cst, rng):
    """fill_cycle ledger probes; returns per-iteration C' requirements and
    rung remainder growth ratios."""
    from .complexes import GridComplex
    from .driver import fill_cycle
    needs, rungs = [], []
    delta = Fraction(1, 4)
    X = GridComplex(3, 5)
    X7 = GridComplex(3, 7)
    X2 = GridComplex(2, 12)
    Xfar = GridComplex(2, 60)
    probes = [
        _box(X, (0, 0, 0), (4, 4, 4)),
        _box(X, (0, 0, 0), (2, 2, 2)) + _box(X, (3, 3, 3), (5, 5, 5)),
        _box(X, (0, 0, 0), (5, 5, 2)),
        _box(X, (1, 1, 1), (4, 4, 4)) + 2 * _box(X, (0, 0, 0), (1, 1, 1)),
        _box(X7, (0, 0, 0), (7, 7, 7)),          # above the small-mass bar
        _loop(X2, 2, 2, 8, 8),                   # ladder at dimension one
        _loop(Xfar, 0, 0, 1, 1) + _loop(Xfar, 59, 59, 1, 1),
    ]
    one_plus = 1 + float(delta)
    mu = float(cst.mu)
    for T in probes:
        res = fill_cycle(T, delta, constants=cst)
        for row in res.ledger:
            if "ledger_lhs" not in row:
                continue
            drop = (row["mass"] ** one_plus
                    - row.get("residual_mass", 0.0) ** one_plus)
            if drop > 0:
                needs.append(mu ** one_plus * row["fill_mass"] / drop)
        for row in res.round_ledgers:
            if isinstance(row.get("rung"), int) and row.get("z_ratio"):
                rungs.append(row["z_ratio"] ** (1.0 / row["rung"]))
    return needs, rungs


def calibrate(seed: int = 0, out=None, families=None) -> MeasuredConstants:
    """Run the measurement battery and return frozen constants.

    Every constant is the observed ceiling times a safety margin; the
    battery composition is recorded alongside so reruns are comparable.
    ``families`` restricts the battery to the named model families
    ("grid", "tree_product"); constants with no covering probe keep
    their code defaults.
    """
    rng = random.Random(seed)
    cst = MeasuredConstants()
    report = {}

    def wants(fam):
        return families is None or fam in families

    if wants("grid"):
        cones = _cone_battery(rng)
        report["cone_ratio_max"] = max(cones)
        cst.kappa_cone = min(2.0, round(max(cones) * 1.25 + 0.05, 3))

        slices = _slice_battery(rng)
        if slices:
            report["slice_ratio_max"] = max(slices)
            lim = Fraction(max(slices)).limit_denominator(16) * Fraction(5, 4)
            cst.kappa_slice = max(Fraction(2), lim)

        g1, g2 = _euclid_battery(rng)
        report["gamma_1_max"] = max(g1)
        report["gamma_2_max"] = max(g2)
        cst.gamma_1 = round(max(g1) * 1.2, 3)
        cst.gamma_2 = round(max(g2) * 1.2, 3)

    runs, disp, lips = _pm_battery(families)
    if runs:
        report["displacement_ratio_max"] = max(r["displacement_ratio"]
                                               for r in runs)
        report["count_ratio_max"] = max(r["count_ratio"] for r in runs)
        report["snap_move_max"] = max(disp)
        cst.A_meas = round(report["displacement_ratio_max"] * 1.2 + 0.05, 3)
        cst.B_meas = round(report["count_ratio_max"] * 1.2 + 0.05, 3)
        cst.L_meas = round(max(disp) * 1.1 + 0.05, 3)
        cst.lip_psi = round(max(lips), 3) if lips else 0.0

    if wants("grid"):
        needs, rungs = _cycle_battery(cst, rng)
        report["c_prime_need_max"] = max(needs) if needs else 0.0
        if needs:
            cst.C_prime = round(max(needs) * 1.5 + 0.5, 2)
        if rungs:
            report["rung_growth_max"] = max(rungs)
            cst.B_meas = max(cst.B_meas, round(max(rungs) * 1.2 + 0.05, 3))

    scope = "all" if families is None else "+".join(sorted(families))
    cst.source = f"calibrated seed={seed} families={scope}"
    cst.battery = {k: round(v, 6) for k, v in report.items()}
    if out:
        cst.save(out)
    log.info("calibration done: %s", report)
    return cst
