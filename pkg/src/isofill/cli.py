"""Command line front end.

Three subcommands: ``fill`` runs the multi-scale filler on one cycle,
``experiment`` runs an instance family and fits the filling-mass
exponent, ``calibrate`` reruns the measurement battery and freezes the
constants to a file.  Every filling is re-verified exactly before the
process reports success; the exit code is nonzero whenever any check
fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction

from .chains import chain_from_json
from .complexes import (
    build_grid,
    build_tree_product,
    load_custom_complex,
)
from .constants import MeasuredConstants, calibrate, load_default

log = logging.getLogger(__name__)

ORACLE_CELL_CAP = 2000


def parse_space(spec):
    """grid:n,m[,h] | treeprod:a,b,d[,h] | path to a complex file."""
    if spec.startswith("grid:"):
        parts = spec[len("grid:"):].split(",")
        if len(parts) not in (2, 3):
            raise ValueError("grid spec needs n,extent[,h]")
        n, extent = int(parts[0]), int(parts[1])
        h = Fraction(parts[2]) if len(parts) == 3 else 1
        return build_grid(n, extent, h)
    if spec.startswith("treeprod:"):
        parts = spec[len("treeprod:"):].split(",")
        if len(parts) not in (3, 4):
            raise ValueError("treeprod spec needs branch_a,branch_b,depth[,h]")
        a, b, d = (int(p) for p in parts[:3])
        h = Fraction(parts[3]) if len(parts) == 4 else 1
        return build_tree_product(a, b, d, h)
    return load_custom_complex(spec)


def _parse_params(text):
    """k=v pairs separated by commas; values as int, then Fraction, then
    the bare string."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = int(v)
        except ValueError:
            try:
                out[k.strip()] = Fraction(v)
            except ValueError:
                out[k.strip()] = v.strip()
    return out


def _load_constants(path):
    if path:
        return MeasuredConstants.load(path)
    return load_default()


def cmd_fill(args):
    from .driver import _push, _rebind, fill_cycle
    from .minfill import min_filling

    X = parse_space(args.space)
    T = chain_from_json(X, args.cycle)
    delta = Fraction(args.delta)
    cst = _load_constants(args.constants)
    res = fill_cycle(T, delta, constants=cst)
    target = _rebind(_push(T, res.depth), res.complex_out)
    verified = res.chain.boundary() == target
    print(f"cycle mass      {float(T.mass()):.6g}")
    print(f"filling mass    {float(res.mass):.6g}")
    print(f"methods         {'+'.join(res.methods)}")
    print(f"refine depth    {res.depth}")
    print(f"iterations      {len(res.ledger)}")
    print(f"ledger ok       {res.violations == 0} "
          f"({res.violations} violation(s))")
    print(f"boundary check  {'exact' if verified else 'FAILED'}")
    if args.oracle:
        if len(T) <= ORACLE_CELL_CAP:
            mf = min_filling(T)
            ratio = float(res.mass) / float(mf.mass) if mf.mass else 1.0
            print(f"oracle mass     {float(mf.mass):.6g} "
                  f"(optimal={mf.optimal}, ratio {ratio:.3f})")
        else:
            print(f"oracle skipped  cycle has {len(T)} cells, "
                  f"cap is {ORACLE_CELL_CAP}")
    if not verified:
        return 2
    if res.violations:
        return 3
    return 0


def cmd_experiment(args):
    from .driver import experiment_exponent

    methods = []
    if not args.no_fill:
        methods.append("fill_cycle")
    if not args.no_oracle:
        methods.append("oracle")
    if not methods:
        print("nothing to run: both methods disabled", file=sys.stderr)
        return 2
    cst = _load_constants(args.constants)
    rep = experiment_exponent(
        args.family, delta=Fraction(args.delta),
        params=_parse_params(args.params), seed=args.seed,
        methods=tuple(methods), constants=cst, workers=args.workers)
    if args.out:
        rep.to_csv(args.out)
        print(f"wrote {len(rep.rows)} rows to {args.out}")
    print(rep.summary())
    bad = sum(r.get("violations", 0) for r in rep.rows)
    if rep.skipped:
        print(f"{rep.skipped} instance(s) failed and were skipped",
              file=sys.stderr)
        return 1
    if bad:
        print(f"{bad} ledger violation(s) across rows", file=sys.stderr)
        return 3
    return 0


def cmd_calibrate(args):
    families = None
    if args.space:
        X = parse_space(args.space)
        families = {X.family}
        if X.family not in ("grid", "tree_product"):
            print("calibration batteries exist for grid and tree product "
                  "families only", file=sys.stderr)
            return 2
    out = args.out or "constants.json"
    cst = calibrate(seed=args.seed, out=out, families=families)
    print(f"wrote {out}")
    for k, v in sorted(cst.to_dict().items()):
        if k == "battery":
            continue
        print(f"  {k:12s} {v}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="isofill",
        description="multi-scale integral cycle filling on model spaces")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fill", help="fill one cycle and verify the result")
    f.add_argument("--space", required=True,
                   help="grid:n,m[,h] | treeprod:a,b,d[,h] | complex file")
    f.add_argument("--cycle", required=True, help="chain JSON file")
    f.add_argument("--delta", default="1/4",
                   help="scale exponent in (0, 1/k), default 1/4")
    f.add_argument("--constants", default=None,
                   help="constants JSON (default: bundled calibration)")
    f.add_argument("--oracle", action="store_true",
                   help="also solve the ILP and report the mass ratio")
    f.set_defaults(fn=cmd_fill)

    e = sub.add_parser("experiment",
                       help="run an instance family, fit the exponent")
    e.add_argument("--family", required=True,
                   help="grid3_spheres | grid2_loops | treeprod_cycles "
                        "| custom")
    e.add_argument("--params", default="",
                   help="family parameters, k=v comma separated "
                        "(custom: file=...)")
    e.add_argument("--out", default=None, help="CSV output path")
    e.add_argument("--delta", default="1/4")
    e.add_argument("--seed", type=int, default=1)
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--constants", default=None)
    e.add_argument("--no-oracle", action="store_true",
                   help="skip the ILP oracle rows")
    e.add_argument("--no-fill", action="store_true",
                   help="skip the multi-scale filler rows")
    e.set_defaults(fn=cmd_experiment)

    c = sub.add_parser("calibrate",
                       help="rerun the measurement battery, freeze constants")
    c.add_argument("--space", default=None,
                   help="restrict the battery to this space's family")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None,
                   help="output JSON path (default constants.json)")
    c.set_defaults(fn=cmd_calibrate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
