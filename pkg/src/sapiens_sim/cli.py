"""Command-line entry point.

Exit codes: 0 success, 1 parse/validation error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import InternalInvariantViolation, ScenarioParseError, ScenarioValidationError
from .incentive import balances_csv, replay_balances
from .ledger import load_ledger, verify_chain
from .network import Network
from .oracle import ground_truth_diff
from .scenario import load_scenario, node_profile
from .sim import emit_report, run

SEED_ENV = "SAPIENS_SIM_SEED"


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    result = run(scenario, seed=seed)
    out = Path(args.out) if args.out else Path("out") / (scenario.name or "run")
    for path in emit_report(result, out, args.format):
        print(path)
    m = result.metrics
    print(
        f"reported={m.tasks_reported} failed={m.tasks_failed} findings={m.findings_total} "
        f"high={m.findings_high} risk={json.dumps(m.risk_distribution, sort_keys=True)}",
        file=sys.stderr,
    )
    return 0


def _cmd_ledger_verify(args) -> int:
    try:
        chain = load_ledger(args.file)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read ledger: {exc}", file=sys.stderr)
        return 1
    check = verify_chain(chain)
    if check:
        print(f"valid: {len(chain)} blocks, head {chain.head_digest()}")
        return 0
    print(f"invalid: first bad block {check.first_bad_index} ({check.reason})")
    return 2


def _cmd_balances(args) -> int:
    try:
        chain = load_ledger(args.ledger)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read ledger: {exc}", file=sys.stderr)
        return 1
    check = verify_chain(chain)
    if not check:
        print(f"ledger invalid at block {check.first_bad_index}", file=sys.stderr)
        return 2
    balances, _, _ = replay_balances(chain)
    sys.stdout.write(balances_csv(balances))
    return 0


def _cmd_ground_truth(args) -> int:
    scenario = load_scenario(args.scenario)
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return 1
    tasks = {t.task_id: t for t in scenario.tasks}
    if report.get("task_id") not in tasks:
        print(f"report task {report.get('task_id')!r} is not in the scenario", file=sys.stderr)
        return 1
    print(json.dumps(ground_truth_diff(report, tasks[report["task_id"]].targets), indent=2, sort_keys=True))
    return 0


def _cmd_nodes_dump(args) -> int:
    scenario = load_scenario(args.scenario)
    net = Network(scenario.params, scenario.run_seed)
    for spec in sorted(scenario.nodes, key=lambda n: n["id"]):
        net.add_node(node_profile(spec), scenario.initial_balances.get(spec["id"], 0))
    print(json.dumps(net.registry.dump(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sapiens-sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write metrics, reports and the ledger")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, help=f"override the scenario seed (also ${SEED_ENV})")
    p.add_argument("--out", help="output directory (default out/<scenario name>)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ledger", help="ledger file operations")
    lsub = p.add_subparsers(dest="ledger_command", required=True)
    v = lsub.add_parser("verify", help="exit 0 iff the ledger dump verifies")
    v.add_argument("file")
    v.set_defaults(func=_cmd_ledger_verify)

    p = sub.add_parser("balances", help="replay a ledger dump and print balances as CSV")
    p.add_argument("ledger")
    p.set_defaults(func=_cmd_balances)

    p = sub.add_parser("ground-truth", help="compare a report with planted ground truth")
    gsub = p.add_subparsers(dest="gt_command", required=True)
    d = gsub.add_parser("diff")
    d.add_argument("report")
    d.add_argument("scenario")
    d.set_defaults(func=_cmd_ground_truth)

    p = sub.add_parser("nodes", help="registry operations")
    nsub = p.add_subparsers(dest="nodes_command", required=True)
    d = nsub.add_parser("dump", help="print the registry a scenario builds, as JSON")
    d.add_argument("scenario")
    d.set_defaults(func=_cmd_nodes_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalInvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
