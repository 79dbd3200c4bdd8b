"""Deterministic tick-based event loop, metrics and report emission."""

from __future__ import annotations

import csv
import heapq
import io
import json
import random
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable

from .errors import (
    IncompleteResults,
    InsufficientFunds,
    InsufficientNodes,
    InternalInvariantViolation,
    NoPocsAvailable,
)
from .incentive import balances_csv, replay_balances
from .ledger import Ledger, TxKind, dump_ledger, verify_chain
from .network import Network
from .oracle import Severity, VulnerabilityFinding, finding_key, seeded_uniform
from .registry import WorkProof, puzzle_seed_for, solve_work
from .scenario import ClaimSpec, PocSpec, Scenario, TaskSpec, node_profile
from .tasks import Service, Task, TaskStatus, fragment, gather, submit_task
from .workflows import (
    OfferStatus,
    PocStatus,
    Verdict,
    assign_poc_auditors,
    audit_poc,
    decide_claim,
    execute_automatic,
    execute_manual,
    expire_claim,
    finish_automatic,
    open_review,
    review_round,
    submit_claim,
    submit_poc,
)


class EventKind(IntEnum):
    """Processing order of events that share a tick."""

    POC_SUBMIT = 0
    POC_AUDIT = 1
    TASK_SUBMIT = 2
    TASK_STEP = 3
    CLAIM_SUBMIT = 4
    CLAIM_DECIDE = 5


@dataclass
class RunMetrics:
    tasks_submitted: int = 0
    tasks_reported: int = 0
    tasks_failed: int = 0
    tasks_rejected: int = 0
    risk_distribution: dict = field(default_factory=lambda: {s.value: 0 for s in Severity})
    findings_total: int = 0
    findings_high: int = 0
    earnings: dict = field(default_factory=dict)
    abandonments: int = 0
    rounds_histogram: dict = field(default_factory=dict)
    pocs: dict = field(default_factory=dict)
    claims: dict = field(default_factory=dict)
    initial_supply: int = 0
    minted: int = 0
    blocks: int = 0
    transactions: int = 0
    ledger_digest: str = ""

    def to_dict(self) -> dict:
        return {"schema": 1, **asdict(self)}


@dataclass
class RunResult:
    network: Network
    metrics: RunMetrics
    scenario: Scenario
    rejected: dict = field(default_factory=dict)

    @property
    def ledger(self) -> Ledger:
        return self.network.ledger

    @property
    def traces(self) -> dict:
        return self.network.traces

    @property
    def reports(self) -> dict:
        return {tid: t.report for tid, t in sorted(self.network.tasks.items()) if t.status is TaskStatus.REPORTED}


class Simulation:
    def __init__(self, scenario: Scenario, seed: int | None = None, wha_policy: Callable | None = None,
                 shuffle_seed: int | None = None):
        self.scenario = scenario
        self.seed = scenario.run_seed if seed is None else seed
        self.net = Network(scenario.params, self.seed, wha_policy=wha_policy)
        self._agenda: dict[int, list] = {}
        self._ticks: list[int] = []
        self._results: dict[str, dict] = {}
        self._rejected: dict[str, str] = {}
        # shuffling only perturbs insertion order; everything is re-sorted before use
        self._shuffle = random.Random(shuffle_seed) if shuffle_seed is not None else None

    def _maybe_shuffle(self, items: list) -> list:
        items = list(items)
        if self._shuffle is not None:
            self._shuffle.shuffle(items)
        return items

    def schedule(self, tick: int, kind: EventKind, ident: str, action: Callable[[], None]) -> None:
        if tick not in self._agenda:
            self._agenda[tick] = []
            heapq.heappush(self._ticks, tick)
        self._agenda[tick].append((int(kind), ident, action))

    # ------------------------------------------------------------ setup

    def _setup(self) -> None:
        s, net = self.scenario, self.net
        specs = sorted(self._maybe_shuffle(s.nodes), key=lambda n: n["id"])
        for spec in specs:
            net.add_node(node_profile(spec), s.initial_balances.get(spec["id"], 0))
        for spec in specs:
            for i in range(spec.get("work_proofs", 0)):
                seed = puzzle_seed_for(spec["id"], f"{self.seed}:{i}")
                nonce = solve_work(seed, s.params.pow_difficulty)
                net.registry.submit_work_proof(WorkProof(spec["id"], seed, nonce, s.params.pow_difficulty))
        for p in self._maybe_shuffle(s.pocs):
            self.schedule(p.at, EventKind.POC_SUBMIT, p.poc_id, lambda p=p: self._poc_submit(p))
        for t in self._maybe_shuffle(s.tasks):
            self.schedule(t.at, EventKind.TASK_SUBMIT, t.task_id, lambda t=t: self._task_submit(t))
        for c in self._maybe_shuffle(s.claims):
            self.schedule(c.at, EventKind.CLAIM_SUBMIT, c.offer_id, lambda c=c: self._claim_submit(c))

    # ------------------------------------------------------------ POCs

    def _poc_submit(self, spec: PocSpec) -> None:
        net = self.net
        try:
            entry = submit_poc(net, spec.poc_id, spec.author, spec.pattern)
        except InsufficientNodes:
            entry = net.pocs.get(spec.poc_id)
            if entry is not None:
                self._poc_retry(spec)
            return
        self.schedule(net.tick + 1, EventKind.POC_AUDIT, spec.poc_id, lambda: self._poc_audit(spec))

    def _poc_retry(self, spec: PocSpec) -> None:
        entry = self.net.pocs[spec.poc_id]
        if entry.attempts >= self.scenario.params.max_rounds:
            self.net.trace(spec.poc_id, "gave_up", attempts=entry.attempts)
            return

        def retry():
            try:
                assign_poc_auditors(self.net, entry)
            except InsufficientNodes:
                self._poc_retry(spec)
                return
            self.schedule(self.net.tick + 1, EventKind.POC_AUDIT, spec.poc_id, lambda: self._poc_audit(spec))

        self.schedule(self.net.tick + 1, EventKind.POC_SUBMIT, spec.poc_id, retry)

    def _poc_audit(self, spec: PocSpec) -> None:
        entry = self.net.pocs[spec.poc_id]
        if spec.verdicts is not None:
            verdicts = dict(zip(entry.auditors, spec.verdicts))
        else:
            verdicts = {}
            for auditor in entry.auditors:
                honest = spec.valid
                if seeded_uniform(self.seed, "poca", auditor, spec.poc_id) < self.scenario.params.poca_error_rate:
                    honest = not honest
                verdicts[auditor] = Verdict.ACCEPT if honest else Verdict.REJECT
        audit_poc(self.net, entry, verdicts)

    # ------------------------------------------------------------ tasks

    def _task_submit(self, spec: TaskSpec) -> None:
        try:
            task = submit_task(self.net, spec.task_id, spec.user, spec.task_type, spec.service, spec.targets,
                               spec.escrow)
        except InsufficientFunds as exc:
            self._rejected[spec.task_id] = str(exc)
            self.net.trace(spec.task_id, "rejected", reason=str(exc))
            return
        self._next_step(task)

    def _next_step(self, task: Task) -> None:
        self.schedule(self.net.tick + 1, EventKind.TASK_STEP, task.task_id, lambda: self._task_step(task))

    def _task_step(self, task: Task) -> None:
        net, p = self.net, self.scenario.params
        try:
            if task.status is TaskStatus.SUBMITTED:
                fragment(net, task, p.segments, p.redundancy)
            elif task.status is TaskStatus.FRAGMENTED:
                run = execute_automatic if task.service is Service.AUTOMATIC else execute_manual
                self._results[task.task_id] = run(net, task)
            elif task.status is TaskStatus.RUNNING:
                results = self._results.pop(task.task_id)
                if task.service is Service.AUTOMATIC:
                    finish_automatic(net, task, results)
                else:
                    open_review(net, gather(net, task, results))
            elif task.status is TaskStatus.GATHERING:
                review_round(net, net.reviews[task.task_id])
        except (InsufficientNodes, NoPocsAvailable, IncompleteResults):
            pass  # the operation already failed the task and refunded its escrow
        if not task.terminal:
            self._next_step(task)

    # ------------------------------------------------------------ claims

    def _claim_submit(self, spec: ClaimSpec) -> None:
        finding = VulnerabilityFinding(
            finding_key(spec.target, spec.vuln_id), spec.author, spec.target, spec.severity, "manual", spec.vuln_id
        )
        offer = submit_claim(self.net, spec.offer_id, spec.author, spec.user, finding, spec.price)
        if spec.decision is None:
            when = spec.at + self.scenario.params.claim_ttl
            self.schedule(when, EventKind.CLAIM_DECIDE, spec.offer_id, lambda: expire_claim(self.net, offer))
        else:
            when = spec.decide_at if spec.decide_at is not None else spec.at + 1
            self.schedule(when, EventKind.CLAIM_DECIDE, spec.offer_id, lambda: self._claim_decide(spec, offer))

    def _claim_decide(self, spec: ClaimSpec, offer) -> None:
        try:
            decide_claim(self.net, offer, spec.decision)
        except InsufficientFunds as exc:
            # the buyer cannot pay: the offer lapses instead of staying open forever
            self.net.trace(spec.offer_id, "unaffordable", reason=str(exc))
            expire_claim(self.net, offer)

    # ------------------------------------------------------------ loop

    def _tick_limit(self) -> int:
        s, p = self.scenario, self.scenario.params
        starts = [t.at for t in s.tasks] + [x.at for x in s.pocs] + [c.at + p.claim_ttl for c in s.claims]
        starts += [c.decide_at for c in s.claims if c.decide_at is not None]
        return max(starts, default=0) + 2 * p.max_rounds + 16

    def run(self) -> RunResult:
        net = self.net
        self._setup()
        net.seal()
        limit = self._tick_limit()
        while self._ticks:
            tick = heapq.heappop(self._ticks)
            if tick > limit:
                raise InternalInvariantViolation(tick, "event loop did not drain")
            net.ledger.now = max(net.ledger.now, tick)
            events = self._agenda.pop(tick)
            # actions may schedule into later ticks only
            for _, _, action in sorted(events, key=lambda e: (e[0], e[1])):
                action()
            net.seal()
        net.seal()
        self._check_end_state()
        return RunResult(net, self._metrics(), self.scenario, dict(self._rejected))

    def _check_end_state(self) -> None:
        net, tick = self.net, self.net.tick
        check = verify_chain(net.ledger)
        if not check:
            raise InternalInvariantViolation(tick, f"chain invalid at block {check.first_bad_index}: {check.reason}")
        if not net.bank.conservation_holds():
            raise InternalInvariantViolation(tick, "SACF conservation violated")
        open_tasks = [t.task_id for t in net.tasks.values() if not t.terminal]
        if open_tasks:
            raise InternalInvariantViolation(tick, f"tasks not terminal: {open_tasks}")
        replayed, minted, supply = replay_balances(net.ledger)
        if replayed != net.bank.snapshot() or minted != net.bank.mint_counter or supply != net.bank.initial_supply:
            raise InternalInvariantViolation(tick, "ledger replay disagrees with live balances")

    def _metrics(self) -> RunMetrics:
        net = self.net
        m = RunMetrics()
        for task in sorted(net.tasks.values(), key=lambda t: t.task_id):
            m.tasks_submitted += 1
            if task.status is TaskStatus.REPORTED:
                m.tasks_reported += 1
                report = task.report
                m.risk_distribution[report.risk_level.value] += 1
                m.findings_total += len(report.findings)
                m.findings_high += sum(f.severity is Severity.HIGH for f in report.findings)
            else:
                m.tasks_failed += 1
            rounds = str(task.report.rounds if task.report else 0)
            m.rounds_histogram[rounds] = m.rounds_histogram.get(rounds, 0) + 1
        m.rounds_histogram = dict(sorted(m.rounds_histogram.items(), key=lambda kv: int(kv[0])))
        m.tasks_rejected = len(self._rejected)
        m.earnings = {k: net.bank.earned[k] for k in sorted(net.bank.earned)}
        m.abandonments = sum(n.abandoned for n in net.registry)
        m.pocs = {s.value: sum(p.status is s for p in net.pocs.values()) for s in PocStatus}
        m.claims = {s.value: sum(o.status is s for o in net.offers.values()) for s in OfferStatus}
        m.initial_supply, m.minted = net.bank.initial_supply, net.bank.mint_counter
        m.blocks = len(net.ledger)
        m.transactions = sum(len(b.transactions) for b in net.ledger.blocks)
        m.ledger_digest = net.ledger.head_digest()
        return m


def run(scenario: Scenario, seed: int | None = None, wha_policy: Callable | None = None,
        shuffle_seed: int | None = None) -> RunResult:
    """Execute a validated scenario to completion."""
    return Simulation(scenario, seed, wha_policy, shuffle_seed).run()


def earnings_from_ledger(chain: Ledger) -> dict[str, int]:
    out: dict[str, int] = {}
    for tx in chain.transactions():
        if tx.kind is TxKind.REWARD:
            out[tx.actor] = out.get(tx.actor, 0) + tx.amount
    return {k: out[k] for k in sorted(out)}


TASK_CSV_FIELDS = ["task_id", "user", "type", "service", "status", "risk_level", "findings", "findings_high",
                   "rounds", "escrow", "refund", "failure_reason"]


def task_rows(result: RunResult) -> list[dict]:
    rows = []
    for tid, task in sorted(result.network.tasks.items()):
        report = task.report if task.status is TaskStatus.REPORTED else None
        rows.append({
            "task_id": tid,
            "user": task.user,
            "type": task.task_type.value,
            "service": task.service.value,
            "status": task.status.value,
            "risk_level": report.risk_level.value if report else "",
            "findings": len(report.findings) if report else 0,
            "findings_high": sum(f.severity is Severity.HIGH for f in report.findings) if report else 0,
            "rounds": task.report.rounds if task.report else 0,
            "escrow": task.escrow_amount,
            "refund": task.settlement.refund if task.settlement else 0,
            "failure_reason": task.failure_reason,
        })
    return rows


def emit_report(result: RunResult, out_dir: str | Path, fmt: str = "json") -> list[Path]:
    """Write metrics, per-task reports, traces and the ledger dump."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ledger_path = out / "ledger.jsonl"
    dump_ledger(result.ledger, ledger_path)
    written.append(ledger_path)
    trace_path = out / "traces.json"
    trace_path.write_text(json.dumps(result.traces, indent=2, sort_keys=True) + "\n")
    written.append(trace_path)
    if fmt == "json":
        metrics_path = out / "metrics.json"
        metrics_path.write_text(json.dumps(result.metrics.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(metrics_path)
        reports_dir = out / "reports"
        reports_dir.mkdir(exist_ok=True)
        for tid, report in result.reports.items():
            p = reports_dir / f"{tid}.json"
            p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
            written.append(p)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TASK_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(task_rows(result))
        tasks_path = out / "tasks.csv"
        tasks_path.write_text(buf.getvalue())
        balances_path = out / "balances.csv"
        balances_path.write_text(balances_csv(result.network.bank.snapshot()))
        written += [tasks_path, balances_path]
    return written
