"""Task intake, fragmentation with redundancy, result gathering and delivery."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import IncompleteResults, InsufficientFunds, InsufficientNodes, InvalidTransition, RoleViolation
from .incentive import Settlement
from .ledger import TxKind
from .network import Network
from .oracle import AuditTarget, RiskLevel, TargetType, VulnerabilityFinding, classify_risk
from .registry import Role
from .scheduler import SelectionRequest, select_by_proximity_pow


class TaskStatus(str, Enum):
    SUBMITTED = "Submitted"
    FRAGMENTED = "Fragmented"
    RUNNING = "Running"
    GATHERING = "Gathering"
    REPORTED = "Reported"
    FAILED = "Failed"


class Service(str, Enum):
    AUTOMATIC = "Automatic"
    MANUAL = "Manual"


TERMINAL = frozenset({TaskStatus.REPORTED, TaskStatus.FAILED})
_NEXT = {
    TaskStatus.SUBMITTED: TaskStatus.FRAGMENTED,
    TaskStatus.FRAGMENTED: TaskStatus.RUNNING,
    TaskStatus.RUNNING: TaskStatus.GATHERING,
    TaskStatus.GATHERING: TaskStatus.REPORTED,
}


@dataclass
class Segment:
    segment_id: str
    task_id: str
    index: int
    slice: tuple[int, int]
    assignees: tuple[str, ...]


@dataclass
class AuditReport:
    task_id: str
    findings: tuple[VulnerabilityFinding, ...]
    risk_level: RiskLevel
    provenance: dict  # finding_id -> (segment_id, credited assignee)
    approved: bool = False
    rounds: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "task_id": self.task_id,
            "risk_level": self.risk_level.value,
            "approved": self.approved,
            "rounds": self.rounds,
            "findings": [
                {**f.to_dict(), "segment_id": self.provenance[f.finding_id][0]} for f in self.findings
            ],
        }


@dataclass
class Task:
    task_id: str
    user: str
    task_type: TargetType
    service: Service
    payload: tuple[AuditTarget, ...]
    escrow_amount: int
    fog: str
    status: TaskStatus = TaskStatus.SUBMITTED
    segments: list[Segment] = field(default_factory=list)
    report: AuditReport | None = None
    failure_reason: str = ""
    settlement: Settlement | None = None

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL

    def targets(self, segment: Segment) -> tuple[AuditTarget, ...]:
        return self.payload[segment.slice[0] : segment.slice[1]]


def transition(net: Network, task: Task, new: TaskStatus) -> None:
    allowed = _NEXT.get(task.status)
    if new is not allowed and not (new is TaskStatus.FAILED and not task.terminal):
        raise InvalidTransition(f"{task.task_id}: {task.status.value} -> {new.value}")
    old, task.status = task.status, new
    net.ledger.record(TxKind.TASK_TRANSITION, task.fog, task.task_id, memo={"from": old.value, "to": new.value})
    net.trace(task.task_id, "transition", **{"from": old.value, "to": new.value})


def fail_task(net: Network, task: Task, reason: str) -> None:
    """Move to Failed and refund whatever escrow is left."""
    task.failure_reason = reason
    transition(net, task, TaskStatus.FAILED)
    task.settlement = net.bank.settle(task.task_id, task.user, failed=True)
    net.trace(task.task_id, "refund", amount=task.settlement.refund, reason=reason)


def submit_task(
    net: Network,
    task_id: str,
    user: str,
    task_type: TargetType | str,
    service: Service | str,
    payload: Sequence[AuditTarget],
    escrow_amount: int,
) -> Task:
    node = net.registry.live(user)
    if not node.has(Role.USER):
        raise RoleViolation(f"{user} does not hold the User role")
    if task_id in net.tasks:
        raise InvalidTransition(f"task {task_id} already exists")
    task_type, service = TargetType(task_type), Service(service)
    if not payload:
        raise ValueError(f"{task_id}: empty payload")
    if any(t.target_type is not task_type for t in payload):
        raise ValueError(f"{task_id}: payload targets must all be {task_type.value}")
    if net.bank.balance(user) < escrow_amount:
        raise InsufficientFunds(f"{user} holds {net.bank.balance(user)}, escrow needs {escrow_amount}")
    fog = net.nearest_fog(user)
    task = Task(task_id, user, task_type, service, tuple(payload), escrow_amount, fog)
    net.ledger.record(
        TxKind.TASK_SUBMITTED,
        user,
        task_id,
        payload={"type": task_type.value, "service": service.value, "targets": [t.target_id for t in payload]},
        memo={"type": task_type.value, "service": service.value, "fog": fog},
    )
    net.bank.escrow(user, task_id, escrow_amount)
    net.tasks[task_id] = task
    net.trace(task_id, "submitted", user=user, escrow=escrow_amount, fog=fog)
    return task


def partition(n_items: int, s: int) -> list[tuple[int, int]]:
    """Split ``range(n_items)`` into ``s`` contiguous, near-equal, non-empty slices."""
    if not 1 <= s <= n_items:
        raise ValueError(f"cannot cut {n_items} targets into {s} segments")
    base, extra = divmod(n_items, s)
    out, start = [], 0
    for i in range(s):
        stop = start + base + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def plan_assignments(s: int, r: int, pool: Sequence[str]) -> list[tuple[str, ...]]:
    """Round-robin ``r`` replicas of each of ``s`` segments over the ranked pool."""
    m = len(pool)
    if r > m:
        raise InsufficientNodes(f"redundancy {r} exceeds {m} available workers")
    return [tuple(pool[(j * r + q) % m] for q in range(r)) for j in range(s)]


def worker_role(task: Task) -> Role:
    return Role.CRO if task.service is Service.AUTOMATIC else Role.WHH


def fragment(net: Network, task: Task, s: int, r: int) -> list[Segment]:
    if task.status is not TaskStatus.SUBMITTED:
        raise InvalidTransition(f"{task.task_id} is {task.status.value}, not Submitted")
    role = worker_role(task)
    n = len(net.registry.eligible(role, {task.user}))
    s = min(s, len(task.payload))
    try:
        if r > n:
            raise InsufficientNodes(f"{task.task_id}: redundancy {r} needs {r} {role.value}s, have {n}")
        request = SelectionRequest(task.task_id, task.user, role, min(n, s * r), frozenset({task.user}))
        pool = select_by_proximity_pow(net.registry, request, net.params.w_pow)
        plan = plan_assignments(s, r, pool)
    except InsufficientNodes as exc:
        fail_task(net, task, str(exc))
        raise
    task.segments = []
    for index, (span, assignees) in enumerate(zip(partition(len(task.payload), s), plan)):
        seg = Segment(f"{task.task_id}/s{index}", task.task_id, index, span, assignees)
        task.segments.append(seg)
        for node_id in assignees:
            net.registry.note_assignment(node_id)
            net.ledger.record(
                TxKind.SEGMENT_ASSIGNED,
                task.fog,
                seg.segment_id,
                payload=[t.target_id for t in task.targets(seg)],
                memo={"task": task.task_id, "assignee": node_id, "index": index},
            )
    net.trace(task.task_id, "fragmented", segments=[[seg.segment_id, list(seg.assignees)] for seg in task.segments])
    transition(net, task, TaskStatus.FRAGMENTED)
    return task.segments


SegmentResults = Mapping[str, Mapping[str, "Sequence[VulnerabilityFinding] | None"]]


def gather(net: Network, task: Task, results: SegmentResults) -> AuditReport:
    """Deduplicated union of findings across every segment's assignees.

    ``results[segment_id][assignee]`` is a finding list, or None when that
    assignee failed. The first reporter (ascending node id) gets the credit.
    """
    if task.status is not TaskStatus.RUNNING:
        raise InvalidTransition(f"{task.task_id} is {task.status.value}, not Running")
    try:
        for seg in task.segments:
            per = results.get(seg.segment_id, {})
            missing = set(seg.assignees) - set(per)
            if missing:
                raise IncompleteResults(f"{seg.segment_id}: no outcome from {sorted(missing)}")
            if all(per[a] is None for a in seg.assignees):
                raise IncompleteResults(f"{seg.segment_id}: every assignee failed")
    except IncompleteResults as exc:
        fail_task(net, task, str(exc))
        raise
    findings: dict[str, VulnerabilityFinding] = {}
    provenance: dict[str, tuple[str, str]] = {}
    for seg in task.segments:
        per = results[seg.segment_id]
        for assignee in sorted(seg.assignees):
            for f in per[assignee] or ():
                if f.finding_id not in findings:
                    findings[f.finding_id] = f
                    provenance[f.finding_id] = (seg.segment_id, assignee)
    ordered = tuple(findings.values())
    report = AuditReport(task.task_id, ordered, classify_risk(ordered), provenance)
    task.report = report
    transition(net, task, TaskStatus.GATHERING)
    net.trace(task.task_id, "gathered", findings=len(ordered), risk=report.risk_level.value)
    return report


def deliver(net: Network, task: Task) -> AuditReport:
    """Approve the gathered report and hand it to the user through the fog node."""
    report = task.report
    report.approved = True
    report.risk_level = classify_risk(report.findings)
    transition(net, task, TaskStatus.REPORTED)
    net.fogs[task.fog].reports[task.task_id] = report
    net.ledger.record(
        TxKind.REPORT_DELIVERED,
        task.fog,
        task.task_id,
        payload=report.to_dict(),
        memo={"user": task.user, "risk": report.risk_level.value, "findings": len(report.findings)},
    )
    return report
