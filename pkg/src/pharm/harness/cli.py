"""``pharm`` command line: solve, study, growballs, energy, verify.

Exit status: 0 on success, 2 when a computation fails (solver, growth or
homotopy errors), 3 for configuration problems.  ``verify`` exits 1 when a
check fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..ballgrowth import GrowthError, build_u_field, detect_singularities, grow_balls, growth_bound_rows
from ..energetics import ConfigurationError, HomotopySectorError, energy_report, write_certificates
from ..field import read_snapshot, write_snapshot
from ..solver import SolverError, initial_field, solve_p_harmonic
from ..textio import dumps_json, write_csv, write_json
from .config import ConfigError, StudyConfig, load_config
from .study import ptag, run_study
from .verify import SUITES, run_suite

log = logging.getLogger("pharm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pharm", description="p-harmonic maps into circles and tori as p increases to 2")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, with_p=True):
        sp.add_argument("--config", help="study configuration (JSON)")
        sp.add_argument("--out", help="output directory (overrides the configuration)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
        if with_p:
            sp.add_argument("--p", type=float, help="exponent (default: last ladder entry)")

    common(sub.add_parser("solve", help="one minimization with its energy report"))
    sp = sub.add_parser("study", help="continuation ladder with every diagnostic")
    common(sp, with_p=False)
    sp.add_argument("--parallel", action="store_true", help="independent cold starts run concurrently")
    sp.add_argument("--no-scan", action="store_true", help="skip the configuration-energy scan")
    common(sub.add_parser("growballs", help="expansion of circles and U-field estimates"))
    common(sub.add_parser("energy", help="energy report of a snapshot or a fresh minimizer"))
    sp = sub.add_parser("verify", help="run an invariant suite")
    sp.add_argument("suite", help="one of " + ", ".join(SUITES))
    sp.add_argument("--out", help="also write the summary here")
    return ap


def _config(args) -> StudyConfig:
    cfg = load_config(args.config)
    try:
        return cfg.with_overrides(out=args.out, seed=args.seed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _exponent(cfg: StudyConfig, args) -> float:
    p = cfg.ladder[-1] if args.p is None else args.p
    if not 1.0 < p < 2.0:
        raise ConfigError("--p must lie in (1, 2)")
    return p


def _field(cfg: StudyConfig, p: float, allow_snapshot: bool = True):
    grid = cfg.grid()
    target = cfg.manifold()
    if allow_snapshot and cfg.field:
        path = Path(cfg.field)
        if not path.is_file():
            raise ConfigError(f"snapshot not found: {path}")
        try:
            return read_snapshot(path, grid, target), None
        except ValueError as exc:
            raise ConfigError(f"snapshot does not fit the configuration: {exc}") from exc
    g = cfg.boundary_data(grid)
    init = initial_field(grid, target, g, seed=cfg.seed, perturbation=cfg.perturbation)
    res = solve_p_harmonic(grid, g, p, init, cfg.solver_options())
    return res.field, res


def _write_report(outdir: Path, p: float, rep, seed: int, extra_rows=()):
    d = rep.as_dict()
    rows = list(rep.bounds) + list(extra_rows)
    d["bounds"] = [b.as_dict() for b in rows]
    d["seed"] = seed
    write_json(outdir / f"report_p{ptag(p)}.json", d)
    write_certificates(outdir / f"certificates_p{ptag(p)}.csv", rows)


def cmd_solve(args) -> int:
    cfg = _config(args)
    p = _exponent(cfg, args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    u, res = _field(cfg, p, allow_snapshot=False)
    sing = detect_singularities(u)
    rep = energy_report(u, p, solver=res, sing=sing)
    rows = []
    if sing.points:
        try:
            rows = growth_bound_rows(u, p, cfg.delta, sing)
        except GrowthError as exc:
            rep.notes.append(f"ball growth skipped: {exc}")
    write_snapshot(u, outdir / f"field_p{ptag(p)}.csv")
    rows_log = res.log_rows()
    write_csv(outdir / f"iterations_p{ptag(p)}.csv", rows_log[0], rows_log[1:])
    _write_report(outdir, p, rep, cfg.seed, rows)
    print(f"p={ptag(p)}: {res.status}, energy {rep.total_energy:.10g}, {len(rep.per_singularity)} singularities")
    return 0


def cmd_energy(args) -> int:
    cfg = _config(args)
    p = _exponent(cfg, args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    u, res = _field(cfg, p)
    rep = energy_report(u, p, solver=res)
    _write_report(outdir, p, rep, cfg.seed)
    sys.stdout.write(dumps_json(rep.as_dict()))
    return 0


def cmd_growballs(args) -> int:
    cfg = _config(args)
    p = _exponent(cfg, args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    u, _ = _field(cfg, p)
    coll = grow_balls(u, p, cfg.delta)
    rows = growth_bound_rows(u, p, cfg.delta, coll=coll)
    _, mixed = build_u_field(u, coll, p, cfg.delta)
    write_json(outdir / f"growth_p{ptag(p)}.json", coll.events_json())
    summary = mixed.as_dict()
    summary["seed"] = cfg.seed
    write_json(outdir / f"u_field_p{ptag(p)}.json", summary)
    write_certificates(outdir / f"certificates_p{ptag(p)}.csv", rows)
    print(f"p={ptag(p)}: {len(coll.disks)} disk(s), radii sum {coll.radii_sum:.6g}, "
          f"{sum(1 for r in rows if not r.passed and not r.informational)} failed certificate(s)")
    return 0


def cmd_study(args) -> int:
    cfg = _config(args)
    rep = run_study(cfg, parallel=args.parallel, scan=not args.no_scan)
    fails = rep.failed()
    print(f"study written to {cfg.out}: {len(rep.bound_matrix())} bound rows, {len(fails)} failed")
    for f in fails:
        print(f"  failed: {f}")
    return 0


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return 3
    summary = run_suite(args.suite)
    text = dumps_json(summary)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"verify_{args.suite}.json").write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)
    return 0 if summary["passed"] else 1


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "growballs": cmd_growballs, "energy": cmd_energy,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (SolverError, GrowthError, HomotopySectorError, ConfigurationError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
