"""Reward mode (automatic and manual), claim mode, and the POC lifecycle."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from .errors import (
    IncompleteVerdicts,
    InsufficientNodes,
    InvalidTransition,
    KeyMismatch,
    MaxRoundsExceeded,
    NoPocsAvailable,
    RoleViolation,
    UnknownUser,
)
from .incentive import Funding, RewardEvent, Situation
from .ledger import TxKind, digest_of
from .network import Network
from .oracle import AutomaticWithPocs, DetectorProfile, ManualSkill, VulnerabilityFinding, detect, seeded_uniform
from .registry import Outcome, Role
from .scheduler import select_arbiters
from .tasks import (
    AuditReport,
    Service,
    Task,
    TaskStatus,
    deliver,
    fail_task,
    gather,
    transition,
)


class PocStatus(str, Enum):
    SUBMITTED = "Submitted"
    UNDER_AUDIT = "UnderAudit"
    ADOPTED = "Adopted"
    REJECTED = "Rejected"


class Verdict(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


@dataclass
class PocEntry:
    poc_id: str
    author: str
    vuln_pattern: str
    status: PocStatus = PocStatus.SUBMITTED
    auditors: tuple[str, ...] = ()
    verdicts: dict = field(default_factory=dict)
    attempts: int = 0


# ---------------------------------------------------------------- POC lifecycle


def assign_poc_auditors(net: Network, entry: PocEntry) -> PocEntry:
    if entry.status is not PocStatus.SUBMITTED:
        raise InvalidTransition(f"{entry.poc_id} is {entry.status.value}")
    entry.attempts += 1
    entry.auditors = tuple(select_arbiters(net.registry, Role.POCD, net.params.quorum, {entry.author}))
    for auditor in entry.auditors:
        net.registry.note_assignment(auditor)
    net.ledger.record(TxKind.ARBITERS_ASSIGNED, entry.author, entry.poc_id, payload=list(entry.auditors),
                      memo={"role": Role.POCA.value, "attempt": entry.attempts})
    entry.status = PocStatus.UNDER_AUDIT
    net.trace(entry.poc_id, "under_audit", auditors=list(entry.auditors))
    return entry


def submit_poc(net: Network, poc_id: str, author: str, vuln_pattern: str) -> PocEntry:
    """Register a POC and try to seat its auditor quorum.

    Raises InsufficientNodes when no quorum can be seated; the entry is kept
    in Submitted so the caller can retry on a later tick.
    """
    node = net.registry.live(author)
    if not node.has(Role.POCD):
        raise RoleViolation(f"{author} does not hold the POCD role")
    if poc_id in net.pocs:
        raise InvalidTransition(f"POC {poc_id} already exists")
    entry = PocEntry(poc_id, author, vuln_pattern)
    net.pocs[poc_id] = entry
    net.ledger.record(TxKind.POC_SUBMITTED, author, poc_id, payload={"pattern": vuln_pattern})
    net.trace(poc_id, "submitted", author=author)
    assign_poc_auditors(net, entry)
    return entry


def audit_poc(net: Network, entry: PocEntry, verdicts: Mapping[str, Verdict | str]) -> PocStatus:
    if entry.status is not PocStatus.UNDER_AUDIT:
        raise InvalidTransition(f"{entry.poc_id} is {entry.status.value}, not UnderAudit")
    verdicts = {a: Verdict(v) for a, v in verdicts.items()}
    if set(verdicts) != set(entry.auditors):
        raise IncompleteVerdicts(f"{entry.poc_id}: expected verdicts from {list(entry.auditors)}")
    entry.verdicts = verdicts
    accepts = sum(v is Verdict.ACCEPT for v in verdicts.values())
    adopted = 2 * accepts > len(verdicts)
    entry.status = PocStatus.ADOPTED if adopted else PocStatus.REJECTED
    winning = Verdict.ACCEPT if adopted else Verdict.REJECT
    fog = net.nearest_fog(entry.author)
    net.ledger.record(
        TxKind.POC_VERDICT,
        fog,
        entry.poc_id,
        payload={a: v.value for a, v in sorted(verdicts.items())},
        memo={"status": entry.status.value, "accepts": accepts, "rejects": len(verdicts) - accepts},
    )
    if adopted:
        net.fogs[fog].pocs[entry.poc_id] = entry
        event = net.reward_event(Situation.POC_ADOPTED, entry.author, None, entry.poc_id)
        if event is not None:
            net.bank.reward(event)
    else:
        net.bank.penalize(net.registry, entry.author, Outcome.REJECTED, f"POC {entry.poc_id} rejected")
    for auditor in entry.auditors:
        if net.registry.get(auditor).abandoned:
            continue
        if verdicts[auditor] is winning:
            net.registry.record_outcome(auditor, Outcome.COMPLETED)
            event = net.reward_event(Situation.POC_AUDIT_ADOPTED, auditor, None, entry.poc_id)
            if event is not None:
                net.bank.reward(event)
        else:
            net.bank.penalize(net.registry, auditor, Outcome.REJECTED, f"minority verdict on {entry.poc_id}")
    net.trace(entry.poc_id, "verdict", status=entry.status.value, accepts=accepts)
    return entry.status


def adopted_pocs(net: Network) -> dict[str, str]:
    return {p.poc_id: p.vuln_pattern for p in sorted(net.pocs.values(), key=lambda p: p.poc_id)
            if p.status is PocStatus.ADOPTED}


# ---------------------------------------------------------------- reward mode


def _run_segments(net: Network, task: Task, mode_for: Callable[[str], object]) -> dict:
    """Execute every (segment, assignee) pair; None marks a failed assignee."""
    results: dict[str, dict] = {}
    for seg in task.segments:
        per = results[seg.segment_id] = {}
        targets = task.targets(seg)
        assigned = frozenset(t.target_id for t in targets)
        for node_id in seg.assignees:
            node = net.registry.get(node_id)
            if node.abandoned:
                per[node_id] = None
                continue
            if seeded_uniform(net.run_seed, "fail", node_id, seg.segment_id) < node.failure_prob:
                per[node_id] = None
                net.bank.penalize(net.registry, node_id, Outcome.FAILED, f"did not complete {seg.segment_id}")
                continue
            profile = DetectorProfile(node_id, mode_for(node_id), assigned)
            found = [f for t in targets for f in detect(t, profile, net.run_seed)]
            per[node_id] = found
            net.registry.record_outcome(node_id, Outcome.COMPLETED)
            if task.service is Service.MANUAL:
                net.ledger.record(
                    TxKind.VULN_SUBMITTED,
                    node_id,
                    seg.segment_id,
                    payload=[f.finding_id for f in found],
                    memo={"task": task.task_id, "count": len(found)},
                )
    return results


def execute_automatic(net: Network, task: Task) -> dict:
    """Install every adopted POC on each assigned CRO and run the audit tool."""
    if task.status is not TaskStatus.FRAGMENTED or task.service is not Service.AUTOMATIC:
        raise InvalidTransition(f"{task.task_id} cannot start an automatic run")
    pocs = adopted_pocs(net)
    if not pocs:
        fail_task(net, task, "no adopted POCs")
        raise NoPocsAvailable(task.task_id)
    mode = AutomaticWithPocs.from_mapping(pocs)
    transition(net, task, TaskStatus.RUNNING)
    return _run_segments(net, task, lambda _node: mode)


def finish_automatic(net: Network, task: Task, results) -> AuditReport:
    report = gather(net, task, results)
    report.rounds = 1
    deliver(net, task)
    owed = []
    for seg in task.segments:
        for node_id in seg.assignees:
            if results[seg.segment_id][node_id] is not None:
                owed.append(net.reward_event(Situation.AUDIT_SERVICE_COMPLETE, node_id, task.task_id, seg.segment_id))
    for f in report.findings:
        author = net.pocs[f.poc_id].author
        owed.append(net.reward_event(Situation.POC_ADOPTED, author, task.task_id, f.poc_id))
    _settle(net, task, owed)
    return report


def run_reward_automatic(net: Network, task: Task) -> AuditReport:
    return finish_automatic(net, task, execute_automatic(net, task))


def _settle(net: Network, task: Task, owed) -> None:
    task.settlement = net.bank.settle(task.task_id, task.user, owed)
    net.trace(
        task.task_id,
        "settled",
        paid=[[int(e.situation), e.beneficiary, e.amount] for e in task.settlement.paid],
        refund=task.settlement.refund,
    )


def execute_manual(net: Network, task: Task) -> dict:
    if task.status is not TaskStatus.FRAGMENTED or task.service is not Service.MANUAL:
        raise InvalidTransition(f"{task.task_id} cannot start a manual run")
    transition(net, task, TaskStatus.RUNNING)
    fp_rate = net.params.fp_rate
    return _run_segments(net, task, lambda node_id: ManualSkill(net.registry.get(node_id).skill, fp_rate))


WhaPolicy = Callable[["Network", "ManualReview", str], "tuple[bool, set[str]]"]


def strict_policy(net: Network, review: "ManualReview", wha: str) -> tuple[bool, set[str]]:
    """Reject any draft containing false positives; optionally reject at random."""
    offending = {f.finding_id for f in review.report.findings if f.false_positive}
    if offending:
        return False, offending
    p = net.params.wha_reject_prob
    if p > 0 and seeded_uniform(net.run_seed, "wha", wha, review.task_id, review.round) < p:
        return False, set()
    return True, set()


@dataclass
class ManualReview:
    task_id: str
    report: AuditReport
    whas: tuple[str, ...]
    contributors: tuple[str, ...]
    round: int = 0
    history: list = field(default_factory=list)


def open_review(net: Network, report: AuditReport) -> ManualReview:
    task = net.tasks[report.task_id]
    contributors = tuple(sorted({a for seg in task.segments for a in seg.assignees}))
    try:
        whas = select_arbiters(net.registry, Role.WHH, net.params.wha_count, set(contributors) | {task.user})
    except InsufficientNodes as exc:
        fail_task(net, task, str(exc))
        raise
    for wha in whas:
        net.registry.note_assignment(wha)
    net.ledger.record(TxKind.ARBITERS_ASSIGNED, task.fog, task.task_id, payload=list(whas),
                      memo={"role": Role.WHA.value})
    review = ManualReview(task.task_id, report, tuple(whas), contributors)
    net.reviews[task.task_id] = review
    net.trace(task.task_id, "review_opened", whas=list(whas))
    return review


def review_round(net: Network, review: ManualReview) -> bool | None:
    """One WHA approval round: True approved, False failed, None go again."""
    task = net.tasks[review.task_id]
    if task.status is not TaskStatus.GATHERING:
        raise InvalidTransition(f"{task.task_id} is {task.status.value}, not Gathering")
    review.round += 1
    policy = net.wha_policy or strict_policy
    approvals, offending = [], set()
    for wha in review.whas:
        ok, bad = policy(net, review, wha)
        approvals.append(ok)
        offending |= set(bad)
        net.ledger.record(
            TxKind.VULN_VERDICT,
            wha,
            task.task_id,
            payload=sorted(bad),
            memo={"round": review.round, "verdict": "Approve" if ok else "Reject", "dropped": len(bad)},
        )
    review.history.append({"round": review.round, "approved": all(approvals), "dropped": sorted(offending)})
    net.trace(task.task_id, "review_round", round=review.round, approved=all(approvals), dropped=sorted(offending))
    report = review.report
    report.rounds = review.round
    if all(approvals):
        deliver(net, task)
        owed = []
        for f in report.findings:
            owed.append(net.reward_event(Situation.VULN_ADOPTED, report.provenance[f.finding_id][1], task.task_id,
                                         f.finding_id))
        for wha in review.whas:
            _complete(net, wha)
            owed.append(net.reward_event(Situation.VULN_AUDIT_ADOPTED, wha, task.task_id))
        _settle(net, task, owed)
        return True
    if offending:
        culprits = {report.provenance[fid][1] for fid in offending if fid in report.provenance}
        report.findings = tuple(f for f in report.findings if f.finding_id not in offending)
        for fid in offending:
            report.provenance.pop(fid, None)
    else:
        culprits = set(review.contributors)
    for node_id in sorted(culprits):
        if not net.registry.get(node_id).abandoned:
            net.bank.penalize(net.registry, node_id, Outcome.REJECTED, f"report for {task.task_id} rejected")
    if review.round >= net.params.max_rounds:
        for wha in review.whas:
            _complete(net, wha)
        fail_task(net, task, f"not approved within {net.params.max_rounds} rounds")
        return False
    return None


def _complete(net: Network, node_id: str) -> None:
    if not net.registry.get(node_id).abandoned:
        net.registry.record_outcome(node_id, Outcome.COMPLETED)


def run_reward_manual(net: Network, task: Task) -> AuditReport:
    report = gather(net, task, execute_manual(net, task))
    review = open_review(net, report)
    while True:
        outcome = review_round(net, review)
        if outcome is True:
            return report
        if outcome is False:
            raise MaxRoundsExceeded(task.task_id)


# ---------------------------------------------------------------- claim mode


class OfferStatus(str, Enum):
    OFFERED = "Offered"
    CLAIMED = "Claimed"
    DECLINED = "Declined"
    EXPIRED = "Expired"


class Decision(str, Enum):
    CLAIM = "Claim"
    DECLINE = "Decline"


def envelope_digest(recipient_key_id: str, finding: VulnerabilityFinding) -> str:
    return digest_of({"recipient": recipient_key_id, "finding": finding.to_dict()})


class SealedEnvelope:
    """Finding details readable only with the recipient's key id."""

    def __init__(self, envelope_id: str, author: str, recipient_key_id: str, finding: VulnerabilityFinding):
        self.envelope_id = envelope_id
        self.author = author
        self.recipient_key_id = recipient_key_id
        self.ciphertext_digest = envelope_digest(recipient_key_id, finding)
        self._finding = finding

    def open(self, key_id: str) -> VulnerabilityFinding:
        if key_id != self.recipient_key_id:
            raise KeyMismatch(f"{self.envelope_id} is not addressed to {key_id}")
        return self._finding

    def __repr__(self) -> str:
        return f"SealedEnvelope({self.envelope_id!r}, digest={self.ciphertext_digest[:12]}...)"


@dataclass
class ClaimOffer:
    offer_id: str
    envelope_id: str
    author: str
    buyer: str
    price: int
    fog: str
    status: OfferStatus = OfferStatus.OFFERED
    delivered: VulnerabilityFinding | None = None


def submit_claim(net: Network, offer_id: str, author: str, target_user: str,
                 finding: VulnerabilityFinding, price: int) -> ClaimOffer:
    node = net.registry.live(author)
    if not node.has(Role.WHH):
        raise RoleViolation(f"{author} does not hold the WHH role")
    if target_user not in net.registry or not net.registry.get(target_user).has(Role.USER) \
            or net.registry.get(target_user).key_id is None:
        raise UnknownUser(target_user)
    if offer_id in net.offers:
        raise InvalidTransition(f"offer {offer_id} already exists")
    if price < 0:
        raise ValueError("negative price")
    fog = net.nearest_fog(author)
    envelope = SealedEnvelope(f"env:{offer_id}", author, net.registry.get(target_user).key_id, finding)
    net.fogs[fog].envelopes[envelope.envelope_id] = envelope
    offer = ClaimOffer(offer_id, envelope.envelope_id, author, target_user, price, fog)
    net.offers[offer_id] = offer
    net.ledger.record(
        TxKind.CLAIM_OFFERED,
        author,
        offer_id,
        memo={"envelope": envelope.envelope_id, "buyer": target_user, "price": price, "fog": fog},
        payload_digest=envelope.ciphertext_digest,
    )
    net.trace(offer_id, "offered", author=author, buyer=target_user, price=price)
    return offer


def envelope_of(net: Network, offer: ClaimOffer) -> SealedEnvelope:
    return net.fogs[offer.fog].envelopes[offer.envelope_id]


def decide_claim(net: Network, offer: ClaimOffer, decision: Decision | str) -> ClaimOffer:
    if offer.status is not OfferStatus.OFFERED:
        raise InvalidTransition(f"{offer.offer_id} is {offer.status.value}")
    decision = Decision(decision)
    if decision is Decision.CLAIM:
        net.bank.reward(RewardEvent(Situation.VULN_ADOPTED, offer.author, offer.price, Funding.account(offer.buyer),
                                    offer.offer_id))
        offer.delivered = envelope_of(net, offer).open(net.registry.get(offer.buyer).key_id)
        offer.status = OfferStatus.CLAIMED
        _complete(net, offer.author)
    else:
        offer.status = OfferStatus.DECLINED
        _claim_failed(net, offer)
    _record_decision(net, offer)
    return offer


def expire_claim(net: Network, offer: ClaimOffer) -> ClaimOffer:
    if offer.status is not OfferStatus.OFFERED:
        raise InvalidTransition(f"{offer.offer_id} is {offer.status.value}")
    offer.status = OfferStatus.EXPIRED
    _claim_failed(net, offer)
    _record_decision(net, offer)
    return offer


def _claim_failed(net: Network, offer: ClaimOffer) -> None:
    if not net.registry.get(offer.author).abandoned:
        net.bank.penalize(net.registry, offer.author, Outcome.CLAIM_FAILED, f"{offer.offer_id} not claimed")


def _record_decision(net: Network, offer: ClaimOffer) -> None:
    net.ledger.record(TxKind.CLAIM_DECIDED, offer.buyer, offer.offer_id, memo={"status": offer.status.value})
    net.trace(offer.offer_id, "decided", status=offer.status.value)
