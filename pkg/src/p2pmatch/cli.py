"""Batch runner: ``python -m p2pmatch {run,verify,compare,bench} ...``.

Exit codes: 0 ok, 1 runtime error, 2 parse error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import io
from .em import EmResult, run_em
from .experiments import CSV_COLUMNS, CompareError, RunRecord, compare, run_all
from .ffs import run_ffs, seeded_arrival_order
from .nem import NemParams, NemResult, run_nem
from .scenarios import NetworkGenParams, gen_network
from .verify import check_feasible, find_blocking_pairs

EXIT_OK, EXIT_RUNTIME, EXIT_PARSE, EXIT_VERIFY = 0, 1, 2, 3


def write_csv(records: list[RunRecord], out) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(r.row())


def csv_text(records: list[RunRecord]) -> str:
    buf = _stdio.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def _trace_lines(record: RunRecord):
    out = record.output
    if isinstance(out, EmResult):
        runs = [(None, out)]
    elif isinstance(out, NemResult):
        runs = [(it.iteration, it.em) for it in out.iterations]
    else:
        return
    for iteration, em in runs:
        for t in em.traces:
            entry = {"scenario": record.scenario, "seed": record.seed}
            if iteration is not None:
                entry["iteration"] = iteration
            entry.update(t.as_dict())
            yield json.dumps(entry, sort_keys=True)


def _dump(record: RunRecord, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"{record.scenario}-seed{record.seed}"
    io.dump_json(io.instance_to_obj(record.instance), directory / f"{stem}.instance.json")
    matching = getattr(record.output, "matching", None)
    if matching is not None:
        acc = "price" if record.algorithm == "nem" else "any"
        io.dump_json(io.matching_to_obj(matching, acc), directory / f"{stem}.matching.json")


def cmd_run(args) -> int:
    scenarios = io.load_scenarios(args.scenario)
    seeds = io.parse_seed_list(args.seeds) if args.seeds else None
    records = run_all(scenarios, seeds, args.nem_limits, args.jobs)
    text = csv_text(records)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for r in records:
                for line in _trace_lines(r):
                    fh.write(line + "\n")
    if args.dump:
        for r in records:
            _dump(r, Path(args.dump))
    failed = [r for r in records if r.verified is False]
    for r in failed:
        for p in r.problems:
            print(f"{r.scenario} seed {r.seed}: {p}", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_verify(args) -> int:
    inst = io.load_instance(args.instance)
    doc = io.load_file(args.matching)
    matching = io.matching_from_obj(doc, inst, str(args.matching))
    acceptability = args.acceptability or doc.get("acceptability", "any")
    if acceptability not in ("any", "price"):
        raise io.ParseError(f"unknown acceptability {acceptability!r}", getattr(doc, "line", None), str(args.matching))
    report = check_feasible(matching, inst)
    for v in report.violations:
        print(f"violation: {v}")
    blocking = find_blocking_pairs(matching, inst, acceptability) if report.feasible else []
    for bp in blocking:
        print(
            f"blocking pair: seller {bp.seller[0]} (block {bp.seller[1]}) with "
            f"consumer {bp.consumer[0]} (block {bp.consumer[1]})"
        )
    ok = report.feasible and not blocking
    print(("stable" if not blocking else "unstable") + ", " + ("feasible" if report.feasible else "infeasible"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_compare(args) -> int:
    scenarios = io.load_scenarios(args.scenario)
    seeds = io.parse_seed_list(args.seeds) if args.seeds else None
    records = run_all(scenarios, seeds, args.nem_limits, args.jobs)
    result = compare(records)
    print(result.table())
    print()
    print(result.revenue_loss_summary())
    if args.output:
        Path(args.output).write_text(csv_text(records), encoding="utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    """Wall-clock of FFS, EM and NEM on one generated network."""
    inst = gen_network(NetworkGenParams(seed=args.seed))
    order = seeded_arrival_order(inst, args.seed)
    timings = {}
    for name, fn in (
        ("ffs", lambda: run_ffs(inst, order)),
        ("em", lambda: run_em(inst)),
        ("nem", lambda: run_nem(inst, NemParams(6, Fraction(1), Fraction(1, 10)))),
    ):
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        timings[name] = best
        print(f"{name:<4} {best * 1000:10.3f} ms")
    ordered = timings["ffs"] < timings["em"] < timings["nem"]
    print("ordering FFS < EM < NEM: " + ("yes" if ordered else "no"))
    return EXIT_OK if ordered else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="p2pmatch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seeds", help="override seeds, e.g. 0-19 or 1,5,9")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--nem-limits", choices=("raw", "tenths"), default=None,
                        help="how numeric NEM limits are read (default: per scenario)")

    run = sub.add_parser("run", help="run a scenario file and write result rows as CSV")
    run.add_argument("scenario")
    run.add_argument("-o", "--output", help="CSV path (default: stdout)")
    run.add_argument("--trace", help="write per-round EM traces as JSON lines")
    run.add_argument("--dump", help="directory for instance/matching JSON files")
    common(run)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="check a matching for feasibility and stability")
    ver.add_argument("matching")
    ver.add_argument("instance")
    ver.add_argument("--acceptability", choices=("any", "price"))
    ver.set_defaults(func=cmd_verify)

    cmp_ = sub.add_parser("compare", help="price table across algorithms and malice rows")
    cmp_.add_argument("scenario")
    cmp_.add_argument("-o", "--output", help="also write the underlying rows as CSV")
    common(cmp_)
    cmp_.set_defaults(func=cmd_compare)

    bench = sub.add_parser("bench", help="time FFS, EM and NEM on one network")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--repeat", type=int, default=3)
    bench.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CompareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # any failure inside an algorithm run
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
