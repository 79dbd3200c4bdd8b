"""Synthetic audit oracle.

Scenarios plant ground-truth vulnerabilities in audit targets; detection is a
deterministic draw keyed by ``(run_seed, detector, target, vuln)`` so that the
order in which the event loop evaluates detectors never changes an outcome.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import UnassignedDetector


class TargetType(str, Enum):
    WEBSITE = "Website"
    APPLICATION = "Application"
    SMART_CONTRACT = "SmartContract"


class Severity(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {Severity.LOW: 0, Severity.MEDIUM: 1, Severity.HIGH: 2}

RiskLevel = Severity


@dataclass(frozen=True)
class PlantedVuln:
    vuln_id: str
    pattern: str
    severity: Severity
    base_detectability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "severity", Severity(self.severity))
        if not 0.0 <= self.base_detectability <= 1.0:
            raise ValueError(f"{self.vuln_id}: detectability outside [0, 1]")


@dataclass(frozen=True)
class AuditTarget:
    target_id: str
    target_type: TargetType
    planted: tuple[PlantedVuln, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "target_type", TargetType(self.target_type))
        object.__setattr__(self, "planted", tuple(self.planted))


@dataclass(frozen=True)
class AutomaticWithPocs:
    pocs: tuple[tuple[str, str], ...]  # (poc_id, pattern), adopted POCs only

    @classmethod
    def from_mapping(cls, pocs: Mapping[str, str]) -> "AutomaticWithPocs":
        return cls(tuple(sorted(pocs.items())))


@dataclass(frozen=True)
class ManualSkill:
    skill: float
    fp_rate: float = 0.0


@dataclass(frozen=True)
class DetectorProfile:
    detector: str
    mode: AutomaticWithPocs | ManualSkill
    assigned: frozenset = field(default_factory=frozenset)  # target ids


@dataclass(frozen=True)
class VulnerabilityFinding:
    finding_id: str
    discovered_by: str
    target_ref: str
    severity: Severity
    via: str  # "poc:<poc_id>" or "manual"
    vuln_id: str | None = None  # None marks a false positive

    @property
    def poc_id(self) -> str | None:
        return self.via[4:] if self.via.startswith("poc:") else None

    @property
    def false_positive(self) -> bool:
        return self.vuln_id is None

    def to_dict(self) -> dict:
        return {
            "finding_id": self.finding_id,
            "discovered_by": self.discovered_by,
            "target_ref": self.target_ref,
            "severity": self.severity.value,
            "via": self.via,
            "vuln_id": self.vuln_id,
        }


def seeded_uniform(run_seed: int, *keys) -> float:
    """Counter-based draw in [0, 1) from a SHA-256 of the key tuple."""
    material = "|".join(str(k) for k in (run_seed, *keys)).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big") / 2.0**64


def finding_key(target_id: str, vuln_id: str) -> str:
    return f"{target_id}#{vuln_id}"


def detect(target: AuditTarget, detector: DetectorProfile, run_seed: int) -> list[VulnerabilityFinding]:
    if target.target_id not in detector.assigned:
        raise UnassignedDetector(f"{detector.detector} is not assigned {target.target_id}")
    who, mode = detector.detector, detector.mode
    found = []
    if isinstance(mode, AutomaticWithPocs):
        for vuln in target.planted:
            matching = [poc_id for poc_id, pattern in mode.pocs if pattern == vuln.pattern]
            if not matching:
                continue
            if seeded_uniform(run_seed, who, target.target_id, vuln.vuln_id) < vuln.base_detectability:
                found.append(
                    VulnerabilityFinding(
                        finding_key(target.target_id, vuln.vuln_id),
                        who,
                        target.target_id,
                        vuln.severity,
                        f"poc:{min(matching)}",
                        vuln.vuln_id,
                    )
                )
        return found
    for vuln in target.planted:
        if seeded_uniform(run_seed, who, target.target_id, vuln.vuln_id) < vuln.base_detectability * mode.skill:
            found.append(
                VulnerabilityFinding(
                    finding_key(target.target_id, vuln.vuln_id), who, target.target_id, vuln.severity, "manual", vuln.vuln_id
                )
            )
    if mode.fp_rate > 0 and seeded_uniform(run_seed, "fp", who, target.target_id) < mode.fp_rate:
        levels = list(Severity)
        sev = levels[int(seeded_uniform(run_seed, "fp-severity", who, target.target_id) * len(levels))]
        found.append(
            VulnerabilityFinding(finding_key(target.target_id, f"fp:{who}"), who, target.target_id, sev, "manual")
        )
    return found


def classify_risk(findings: Iterable[VulnerabilityFinding]) -> RiskLevel:
    """Highest severity present; Low when there is nothing."""
    return max((f.severity for f in findings), key=lambda s: s.rank, default=Severity.LOW)


def ground_truth_diff(report: dict, targets: Iterable[AuditTarget]) -> dict:
    """Precision and recall of a report's findings against planted truth.

    ``report`` is the JSON form written per task. Empty denominators count
    as perfect scores.
    """
    planted = {finding_key(t.target_id, v.vuln_id) for t in targets for v in t.planted}
    reported = {f["finding_id"] for f in report.get("findings", [])}
    tp = len(reported & planted)
    fp = len(reported - planted)
    fn = len(planted - reported)
    return {
        "task_id": report.get("task_id"),
        "true_positives": tp,
        "false_positives": fp,
        "false_negatives": fn,
        "precision": tp / len(reported) if reported else 1.0,
        "recall": tp / len(planted) if planted else 1.0,
    }
