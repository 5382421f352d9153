"""Command-line entry point.

Subcommands::

    check    seeded property battery (identities, symmetrizers, residual agreement)
    run      one compressible trajectory at the first eps of eps_list
    limit    one limit-system trajectory
    sweep    eps sweep with rate fit, CSV tables and an SVG chart
    nondim   characteristic numbers of a PhysicalInputs file

Exit statuses: 0 success, 1 property or fit failure, 2 configuration
error, 3 numerical breakdown (truncated trajectory).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

from . import report
from .checks import run_checks
from .compressible import DIAGNOSTIC_COLUMNS
from .config import RunConfig, load_config
from .errors import FormatError, LowMachError, UsageError
from .experiments import parse_synthetic, run_limit, run_single, run_sweep, write_sweep_outputs
from .scaling import PhysicalInputs, nondimensionalize, read_inputs_file, scaled_coefficients

log = logging.getLogger("lowmach_mhd")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", default=[],
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--workers", type=int, help="concurrent sweep members")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    p = argparse.ArgumentParser(prog="lowmach-mhd", description="Low-Mach MHD verification suite")
    sub = p.add_subparsers(dest="command", required=True)
    chk = sub.add_parser("check", parents=[common], help="run the property battery")
    chk.add_argument("--poison-symmetrizer", action="store_true", help=argparse.SUPPRESS)
    sub.add_parser("run", parents=[common], help="single compressible run")
    sub.add_parser("limit", parents=[common], help="single limit-system run")
    sw = sub.add_parser("sweep", parents=[common], help="eps sweep and rate fit")
    sw.add_argument("--synthetic", metavar="SPEC", help="replace solves by exact data, e.g. err=3eps")
    sub.add_parser("nondim", parents=[common], help="characteristic numbers of physical inputs")
    return p


def _config(args, base: RunConfig | None = None, allow_zero_time: bool = False) -> RunConfig:
    cfg = load_config(args.config, args.overrides, base)
    extra = {k: v for k, v in (("seed", args.seed), ("workers", args.workers), ("out", args.out))
             if v is not None}
    return replace(cfg, **extra).validate(allow_zero_time)


def cmd_check(args) -> int:
    explicit = args.config or any(o.split("=", 1)[0].strip() == "n" for o in args.overrides)
    cfg = _config(args, None if explicit else RunConfig(n=16))
    results = run_checks(n=cfg.n, seed=cfg.seed, identity_count=100, poison=args.poison_symmetrizer)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args, allow_zero_time=True)
    traj = run_single(cfg)
    out = Path(cfg.out)
    traj.save(out / "run")
    report.write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, traj.extras["diagnostics"])
    (out / "config.txt").write_text(cfg.as_text())
    print(f"{len(traj.snapshots)} snapshots written to {out / 'run'} (status {traj.status})")
    if not traj.ok:
        print(f"truncated at t = {traj.last_good_time:.6g}: {traj.message}")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_limit(args) -> int:
    cfg = _config(args, allow_zero_time=True)
    traj = run_limit(cfg)
    out = Path(cfg.out)
    traj.save(out / "limit")
    rows = [{"time": t, "energy": e, "dissipated": d}
            for t, e, d in zip(traj.times, traj.extras["energy"], traj.extras["dissipated"])]
    report.write_csv(out / "limit_energy.csv", ("time", "energy", "dissipated"), rows)
    (out / "config.txt").write_text(cfg.as_text())
    print(f"{len(traj.snapshots)} snapshots written to {out / 'limit'} (status {traj.status})")
    if not traj.ok:
        print(f"truncated at t = {traj.last_good_time:.6g}: {traj.message}")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    synthetic = parse_synthetic(args.synthetic) if args.synthetic else None
    result = run_sweep(cfg, synthetic=synthetic)
    paths = write_sweep_outputs(result, cfg.out)
    for m in result.members:
        print(f"eps={m.eps:<8g} status={m.status:<9} T={m.achieved_T:<8.4g} "
              f"sup_err/eps={m.sup_error[cfg.rate_s] / m.eps:.4f}")
    if result.fit is not None:
        print(result.fit.summary(f"H^{cfg.rate_s:g} error"))
    print(f"{len(paths)} files written to {cfg.out}")
    truncated = [m for m in result.members if m.status != "ok"]
    if truncated:
        for m in truncated:
            print(f"eps={m.eps:g} truncated at t = {m.achieved_T:.6g}: {m.message}")
        return EXIT_NUMERIC
    if result.fit is None:
        print("rate fit failed: insufficient points (need at least 3)")
        return EXIT_FAIL
    return EXIT_OK


def cmd_nondim(args) -> int:
    inp = read_inputs_file(args.config) if args.config else PhysicalInputs()
    known = {f.name for f in fields(PhysicalInputs)}
    updates = {}
    for pair in args.overrides:
        key, _, val = (s.strip() for s in pair.partition("="))
        if key not in known or not val:
            raise UsageError(f"--set: unknown or empty PhysicalInputs key in {pair!r}")
        try:
            updates[key] = float(val)
        except ValueError:
            raise UsageError(f"--set: {key} is not a number: {val!r}") from None
    inp = replace(inp, **updates)
    dn = nondimensionalize(inp)
    scaled = scaled_coefficients(dn)
    rows = dn.as_rows()
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v:.12g}")
    p = scaled.params
    print(f"scaled: mu={p.mu:.12g} lam={p.lam:.12g} nu={p.nu:.12g} kappa={p.kappa:.12g} eps={p.eps:.12g}")
    if scaled.cowling_flag:
        print(f"note: Cowling number {scaled.cowling:.6g} != 1; the scaled system omits this factor")
    print(",".join(k for k, _ in rows))
    print(",".join(repr(float(v)) for _, v in rows))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "run": cmd_run, "limit": cmd_limit, "sweep": cmd_sweep, "nondim": cmd_nondim}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, FormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LowMachError as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
