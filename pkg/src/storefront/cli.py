"""Command-line front end: run scenario scripts and verify event logs.

Exit codes: 0 clean, 1 violations or failed expectations, 2 parse or
config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bundled
from .engine import Engine, read_log
from .foundation import DomainError, SchemaError
from .invoice import RuleBook
from .rbac import load_rbac_config
from .scenario import ParseError, load_scenario, run_scenario
from .state import GapInSequence, replay


def _load_json(path, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read {what} {path}: {exc}")


def build_engine(args) -> Engine:
    rulebook = None
    if args.policies:
        rulebook = RuleBook.from_dict(_load_json(args.policies, "policy config"))
    matrix = None
    if getattr(args, "rbac", None):
        matrix = load_rbac_config(_load_json(args.rbac, "access config"))
    engine = Engine(currency=args.currency, rulebook=rulebook, rbac_matrix=matrix,
                    add_policy=args.add_policy)
    if args.seed_catalog:
        engine.seed_catalog(_load_json(args.seed_catalog, "catalog seed"))
    if args.seed_stock:
        engine.seed_stock(_load_json(args.seed_stock, "stock seed"))
    return engine


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    engine = build_engine(args)
    report = run_scenario(engine, scenario)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    engine.write_log(out_dir / "events.jsonl")
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    for step in report.steps:
        marker = "ok " if step.ok else "FAIL"
        detail = step.error or ""
        if step.expect_error:
            detail = f"{detail} (expected {step.expect_error})"
        print(f"[{step.seq:3d}] {marker} {step.op:<22} {detail}".rstrip())
    for expectation in report.expectations:
        marker = "ok " if expectation.ok else "FAIL"
        print(f"[exp] {marker} {expectation.query}: expected "
              f"{json.dumps(expectation.expect, sort_keys=True)}, got "
              f"{json.dumps(expectation.actual, sort_keys=True)}")
    violations = report.invariants.get("violations", [])
    print(f"invariants: {report.invariants.get('checked', 0)} checked, "
          f"{len(violations)} violations")
    for violation in violations:
        print(f"  VIOLATION {violation['invariant']} @ {violation['entity']}: "
              f"{violation['detail']}")
    print(f"scenario {report.scenario}: {'PASS' if report.ok else 'FAIL'}")
    print(f"log: {out_dir / 'events.jsonl'}  report: {out_dir / 'report.json'}")
    return 0 if report.ok else 1


def cmd_verify(args) -> int:
    records = read_log(args.log)
    engine = build_engine(args)
    try:
        engine.state = replay(engine.baseline(), records)
    except GapInSequence as exc:
        print(f"verify: {exc}")
        return 1
    report = engine.check_invariants()
    print(f"replayed {len(records)} events; {report.checked} invariants checked, "
          f"{len(report.violations)} violations")
    for violation in report.violations:
        print(f"  VIOLATION {violation.invariant} @ {violation.entity}: "
              f"{violation.detail}")
    return 0 if report.ok() else 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storefront",
        description="Replay scripted store workloads and verify their event logs.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed-catalog", metavar="FILE",
                        default=str(bundled.catalog_seed()),
                        help="catalog seed JSON (default: bundled)")
    common.add_argument("--seed-stock", metavar="FILE",
                        default=str(bundled.stock_seed()),
                        help="stock seed JSON (default: bundled)")
    common.add_argument("--policies", metavar="FILE", default=None,
                        help="billing policy / validation rule config JSON")
    common.add_argument("--currency", default="USD",
                        help="engine currency code (default USD)")
    common.add_argument("--add-policy", default="first-room",
                        choices=("first-room", "round-robin"),
                        help="stock distribution policy when no allocation given")

    run = sub.add_parser("run", parents=[common],
                         help="run a scenario and write its report and event log")
    run.add_argument("scenario", help="scenario JSON file")
    run.add_argument("--rbac", metavar="FILE", default=None,
                     help="access matrix JSON; omit for permissive mode")
    run.add_argument("--out", default="out", help="output directory (default ./out)")
    run.set_defaults(fn=cmd_run)

    verify = sub.add_parser("verify", parents=[common],
                            help="replay an event log over the seeds and check invariants")
    verify.add_argument("log", help="events.jsonl file")
    verify.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
