"""Command-line interface: ``bamboo-trim {simulate,sweep,verify,construct}``.

Exit codes: 0 success, 1 a verification found a violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import constructions as cons
from .analysis import bilo_reference_bound, theorem_bound
from .engine import RateVector, Variant, backlog, format_rational, run
from .multiproc import MultiprocConfig, reduced_backlog, run_reduction
from .strategies import Kind, parse_strategy
from .suites import SUITES, random_rates, run_suite

log = logging.getLogger("bamboo_trim")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def read_rates_file(path: str) -> list[Fraction]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read rates file {path}: {exc}") from None
    rates = []
    for row in csv.reader(io.StringIO(text)):
        for cell in row:
            cell = cell.strip()
            if not cell or cell.lower() == "rate":
                continue
            try:
                rates.append(Fraction(cell))
            except ValueError:
                raise UsageError(f"bad rate {cell!r} in {path}") from None
    return rates


def write_rates_file(path: Path, rates: RateVector) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rate"])
        for r in rates:
            w.writerow([format_rational(r)])


def resolve_rates(args) -> tuple[list[Fraction], Optional[cons.Construction]]:
    """Rates from ``--construction``, an inline list, a file, or ``random:<n>``."""
    if args.construction:
        c = cons.parse_construction(args.construction)
        return list(c.rates), c
    if not args.rates:
        raise UsageError("give --rates or --construction")
    spec = args.rates
    if spec.startswith("random:"):
        rng = random.Random(args.seed)
        total = args.processors if args.processors > 1 else 1
        rv = random_rates(rng, int(spec.split(":", 1)[1]), total=total)
        return list(rv), None
    if os.path.exists(spec):
        return read_rates_file(spec), None
    try:
        return [Fraction(s) for s in spec.split(",")], None
    except ValueError:
        raise UsageError(f"--rates {spec!r} is neither a file nor a list of p/q values") from None


def approx(value: Fraction) -> str:
    return f"{float(value):.6f}"


def cmd_simulate(args) -> int:
    rates, c = resolve_rates(args)
    strategy = parse_strategy(args.strategy)
    horizon = args.horizon or (c.critical_horizon if c else None)
    if not horizon or horizon < 1:
        raise UsageError("--horizon must be a positive integer")
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    if args.processors > 1:
        if Variant.parse(args.variant) is not Variant.FLUSH:
            raise UsageError("the multiprocessor game is flush-only")
        tr = run_reduction(MultiprocConfig(args.processors, tuple(rates)), strategy, horizon)
        got, single = tr.backlog(), reduced_backlog(tr)
        report = {
            "processors": args.processors,
            "strategy": str(strategy),
            "horizon": horizon,
            "max_intermediate": format_rational(got),
            "max_intermediate_approx": float(got),
            "reduced_game_backlog": format_rational(single),
        }
        if out:
            with open(out / "trace.jsonl", "w") as fh:
                tr.write_jsonl(fh)
    else:
        rv = RateVector.of(rates)
        tr = run(rv, Variant.parse(args.variant), strategy, horizon)
        rep = backlog(tr)
        got = rep.max_intermediate
        report = {"strategy": str(strategy), "variant": args.variant, "horizon": horizon,
                  "permutation": list(rv.permutation), **rep.to_json()}
        if out:
            with open(out / "trace.jsonl", "w") as fh:
                tr.write_jsonl(fh)
    if c:
        report["construction"] = c.to_json()
    if out:
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"backlog {format_rational(got)} (~{approx(got)})")
    return EXIT_OK


def parse_grid(items: list[str]) -> dict[str, list[str]]:
    grid = {}
    for item in items or []:
        name, sep, values = item.partition("=")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not sep or not name or not vals:
            raise UsageError(f"bad --grid {item!r}; expected name=v1,v2,...")
        grid[name.strip()] = vals
    if not grid:
        raise UsageError("empty grid: give at least one --grid name=v1,v2,...")
    return grid


SWEEP_FIELDS = ["construction", "strategy", "variant", "horizon", "backlog", "backlog_approx",
                "construction_lower_bound", "theorem_bound", "reference_bound"]


def sweep_cell(params: dict, construction: str, strategy: str, variant: str, horizon: Optional[int]) -> dict:
    c = cons.parse_construction(construction.format(**params))
    strat = parse_strategy(strategy.format(**params))
    h = horizon or max(c.critical_horizon, 1)
    got = backlog(run(c.rates, Variant.parse(variant), strat, h)).max_intermediate
    bound = theorem_bound(strat, c.rates)
    ref = ""
    if strat.kind is Kind.REDUCE_FASTEST and strat.threshold > 1:
        ref = format_rational(bilo_reference_bound(strat.threshold))
    return {
        **params,
        "construction": c.name,
        "strategy": str(strat),
        "variant": variant,
        "horizon": h,
        "backlog": format_rational(got),
        "backlog_approx": approx(got),
        "construction_lower_bound": format_rational(c.predicted_backlog_lower_bound),
        "theorem_bound": format_rational(bound) if bound is not None else "",
        "reference_bound": ref,
    }


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    names = list(grid)
    cells = [dict(zip(names, combo)) for combo in itertools.product(*grid.values())]
    jobs = [(p, args.construction, args.strategy, args.variant, args.horizon) for p in cells]
    try:
        for p in cells:
            args.construction.format(**p), args.strategy.format(**p)
    except (KeyError, IndexError) as exc:
        raise UsageError(f"template refers to unknown grid parameter {exc}") from None
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(sweep_cell, *zip(*jobs)))
    else:
        rows = [sweep_cell(*j) for j in jobs]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=names + SWEEP_FIELDS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    ok = run_suite(args.suite, broken=args.inject_broken_strategy)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_construct(args) -> int:
    c = cons.parse_construction(args.name)
    out = Path(args.out) if args.out else Path(c.name.replace(":", "_").replace("/", "-") + ".csv")
    write_rates_file(out, c.rates)
    sidecar = out.with_suffix(".json")
    sidecar.write_text(json.dumps(c.to_json(), indent=2) + "\n")
    print(f"wrote {len(c.rates)} rates to {out} (bound {format_rational(c.predicted_backlog_lower_bound)}, "
          f"critical horizon {c.critical_horizon})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bamboo-trim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one game and report its backlog")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--rates", help='inline "1/2,1/4,...", a CSV file, or random:<n>')
    src.add_argument("--construction", help="two-bamboo:<eps> | uniform:<n>:<x> | rf1-fast-slow:<f> | rf-x-counter")
    sim.add_argument("--strategy", required=True, help="reduce-max | reduce-fastest:<p>/<q> | deadline-driven")
    sim.add_argument("--variant", choices=["flush", "unit"], default="flush")
    sim.add_argument("--horizon", type=int, help="steps to play (default: the construction's critical horizon)")
    sim.add_argument("--processors", type=int, default=1)
    sim.add_argument("--out", help="directory for trace.jsonl and report.json")
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="grid of runs written as CSV")
    sw.add_argument("--construction", required=True, help="template, e.g. uniform:1000:{x}")
    sw.add_argument("--strategy", required=True, help="template, e.g. reduce-fastest:{x}")
    sw.add_argument("--grid", action="append", help="name=v1,v2,... (repeatable)")
    sw.add_argument("--variant", choices=["flush", "unit"], default="flush")
    sw.add_argument("--horizon", type=int)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="run an acceptance suite")
    ver.add_argument("suite", choices=list(SUITES))
    ver.add_argument("--inject-broken-strategy", action="store_true", help=argparse.SUPPRESS)
    ver.set_defaults(func=cmd_verify)

    con = sub.add_parser("construct", help="write a construction's rates and predicted bound")
    con.add_argument("name")
    con.add_argument("--out", help="rates CSV path; the JSON sidecar sits next to it")
    con.set_defaults(func=cmd_construct)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "processors", 1) < 1:
        print("error: --processors must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
