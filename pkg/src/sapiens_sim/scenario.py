"""Scenario files: parsing with field diagnostics, then invariant validation.

A scenario is a JSON object with ``"schema": 1``. See README.md for the full
layout; :func:`scenario_to_dict` writes the same shape back out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import ScenarioParseError, ScenarioValidationError
from .network import Params
from .oracle import AuditTarget, PlantedVuln, Severity, TargetType
from .registry import ARBITER_POOLS, NodeKind, NodeProfile, Role
from .tasks import Service

SCHEMA_VERSION = 1
_PARAM_FIELDS = set(Params().to_dict())


@dataclass
class TaskSpec:
    task_id: str
    at: int
    user: str
    task_type: TargetType
    service: Service
    escrow: int
    targets: tuple[AuditTarget, ...]


@dataclass
class PocSpec:
    poc_id: str
    at: int
    author: str
    pattern: str
    valid: bool = True
    verdicts: list | None = None


@dataclass
class ClaimSpec:
    offer_id: str
    at: int
    author: str
    user: str
    target: str
    vuln_id: str
    severity: Severity
    price: int
    decision: str | None = None
    decide_at: int | None = None


@dataclass
class Scenario:
    run_seed: int
    params: Params
    nodes: list[dict]
    initial_balances: dict[str, int] = field(default_factory=dict)
    tasks: list[TaskSpec] = field(default_factory=list)
    pocs: list[PocSpec] = field(default_factory=list)
    claims: list[ClaimSpec] = field(default_factory=list)
    name: str = ""

    def profiles(self) -> list[NodeProfile]:
        return [node_profile(n) for n in self.nodes]


def node_profile(spec: dict) -> NodeProfile:
    return NodeProfile(
        node_id=spec["id"],
        kind=NodeKind(spec.get("kind", "Ordinary")),
        roles=frozenset(Role(r) for r in spec.get("roles", [])),
        position=tuple(spec.get("position", (0.0, 0.0))),
        ranking=spec.get("ranking", 0),
        capacity=spec.get("capacity", 1),
        skill=spec.get("skill", 1.0),
        failure_prob=spec.get("failure_prob", 0.0),
    )


class _Fields:
    """Typed field access that reports the JSON path on failure."""

    def __init__(self, obj: Any, path: str):
        if not isinstance(obj, dict):
            raise ScenarioParseError(f"{path}: expected an object, got {type(obj).__name__}")
        self.obj, self.path = obj, path

    def get(self, key: str, kind, default=...):
        if key not in self.obj:
            if default is ...:
                raise ScenarioParseError(f"{self.path}.{key}: missing required field")
            return default
        value = self.obj[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, bool) or not isinstance(value, kind):
            raise ScenarioParseError(f"{self.path}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
        return value

    def enum(self, key: str, enum, default=...):
        raw = self.get(key, str, default)
        if raw is default and default is not ...:
            return default
        try:
            return enum(raw)
        except ValueError:
            choices = ", ".join(e.value for e in enum)
            raise ScenarioParseError(f"{self.path}.{key}: {raw!r} is not one of {choices}") from None


def _targets(raw, path: str) -> tuple[AuditTarget, ...]:
    if not isinstance(raw, list):
        raise ScenarioParseError(f"{path}: expected a list")
    out = []
    for i, t in enumerate(raw):
        f = _Fields(t, f"{path}[{i}]")
        planted = []
        vulns = f.get("planted", list, [])
        for j, v in enumerate(vulns):
            g = _Fields(v, f"{path}[{i}].planted[{j}]")
            try:
                planted.append(
                    PlantedVuln(
                        g.get("id", str),
                        g.get("pattern", str),
                        g.enum("severity", Severity),
                        g.get("detectability", float, 1.0),
                    )
                )
            except ValueError as exc:
                raise ScenarioParseError(f"{path}[{i}].planted[{j}]: {exc}") from None
        out.append(AuditTarget(f.get("id", str), f.enum("type", TargetType), tuple(planted)))
    return tuple(out)


def parse_scenario(data: Any, name: str = "") -> Scenario:
    top = _Fields(data, "$")
    schema = top.get("schema", int)
    if schema != SCHEMA_VERSION:
        raise ScenarioParseError(f"$.schema: unsupported version {schema}")
    raw_params = top.get("params", dict, {})
    unknown = set(raw_params) - _PARAM_FIELDS
    if unknown:
        raise ScenarioParseError(f"$.params: unknown field(s) {sorted(unknown)}")
    defaults = Params()
    for key, value in raw_params.items():
        want = getattr(defaults, key)
        ok = (
            isinstance(value, bool) if isinstance(want, bool)
            else isinstance(value, dict) if isinstance(want, dict)
            else isinstance(value, int) and not isinstance(value, bool) if isinstance(want, int)
            else isinstance(value, (int, float)) and not isinstance(value, bool)
        )
        if not ok:
            raise ScenarioParseError(f"$.params.{key}: unexpected value {value!r}")
    try:
        params = Params(**raw_params)
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"$.params: {exc}") from None

    nodes = []
    for i, n in enumerate(top.get("nodes", list)):
        f = _Fields(n, f"$.nodes[{i}]")
        spec = {"id": f.get("id", str), "kind": f.enum("kind", NodeKind, NodeKind.ORDINARY).value}
        roles = f.get("roles", list, [])
        try:
            spec["roles"] = sorted(Role(r).value for r in roles)
        except ValueError:
            raise ScenarioParseError(f"$.nodes[{i}].roles: unknown role in {roles!r}") from None
        pos = f.get("position", list, [0.0, 0.0])
        if len(pos) != 2 or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in pos):
            raise ScenarioParseError(f"$.nodes[{i}].position: expected [x, y]")
        spec["position"] = [float(pos[0]), float(pos[1])]
        spec["ranking"] = f.get("ranking", int, 0)
        spec["capacity"] = f.get("capacity", float, 1.0)
        spec["skill"] = f.get("skill", float, 1.0)
        spec["failure_prob"] = f.get("failure_prob", float, 0.0)
        spec["work_proofs"] = f.get("work_proofs", int, 0)
        nodes.append(spec)

    balances = top.get("initial_balances", dict, {})
    for k, v in balances.items():
        if isinstance(v, bool) or not isinstance(v, int):
            raise ScenarioParseError(f"$.initial_balances.{k}: expected int, got {v!r}")

    tasks = []
    for i, t in enumerate(top.get("tasks", list, [])):
        f = _Fields(t, f"$.tasks[{i}]")
        tasks.append(
            TaskSpec(
                f.get("id", str),
                f.get("at", int, 0),
                f.get("user", str),
                f.enum("type", TargetType),
                f.enum("service", Service, Service.AUTOMATIC),
                f.get("escrow", int, 0),
                _targets(f.get("targets", list), f"$.tasks[{i}].targets"),
            )
        )

    pocs = []
    for i, p in enumerate(top.get("pocs", list, [])):
        f = _Fields(p, f"$.pocs[{i}]")
        verdicts = f.get("verdicts", list, None)
        if verdicts is not None and any(v not in ("Accept", "Reject") for v in verdicts):
            raise ScenarioParseError(f"$.pocs[{i}].verdicts: entries must be Accept or Reject")
        pocs.append(PocSpec(f.get("id", str), f.get("at", int, 0), f.get("author", str), f.get("pattern", str),
                            f.get("valid", bool, True), verdicts))

    claims = []
    for i, c in enumerate(top.get("claims", list, [])):
        f = _Fields(c, f"$.claims[{i}]")
        g = _Fields(f.get("finding", dict), f"$.claims[{i}].finding")
        decision = f.get("decision", str, None)
        if decision is not None and decision not in ("Claim", "Decline"):
            raise ScenarioParseError(f"$.claims[{i}].decision: must be Claim, Decline or absent")
        claims.append(
            ClaimSpec(
                f.get("id", str),
                f.get("at", int, 0),
                f.get("author", str),
                f.get("user", str),
                g.get("target", str),
                g.get("vuln", str),
                g.enum("severity", Severity),
                f.get("price", int),
                decision,
                f.get("decide_at", int, None),
            )
        )

    scenario = Scenario(top.get("run_seed", int, 0), params, nodes, dict(balances), tasks, pocs, claims, name)
    validate(scenario)
    return scenario


def validate(s: Scenario) -> None:
    problems = list(s.params.problems())
    if not 0 <= s.run_seed < 2**64:
        problems.append("run_seed must be a 64-bit unsigned integer")
    by_id: dict[str, dict] = {}
    for n in s.nodes:
        if n["id"] in by_id:
            problems.append(f"duplicate node id {n['id']}")
        by_id[n["id"]] = n
        roles = set(n["roles"])
        if n["kind"] == "Fog" and roles:
            problems.append(f"fog node {n['id']} holds roles")
        for arbiter, pool in ARBITER_POOLS.items():
            if arbiter.value in roles and pool.value not in roles:
                problems.append(f"{n['id']}: {arbiter.value} requires {pool.value}")
        if "CRO" in roles and n["capacity"] <= 0:
            problems.append(f"{n['id']}: CRO capacity must be > 0")
        if not 0 <= n["skill"] <= 1 or not 0 <= n["failure_prob"] <= 1:
            problems.append(f"{n['id']}: skill and failure_prob must lie in [0, 1]")
        if n["ranking"] < 0 or n["work_proofs"] < 0:
            problems.append(f"{n['id']}: ranking and work_proofs must be >= 0")

    def has(node_id, role):
        return node_id in by_id and role in by_id[node_id]["roles"]

    for node_id, amount in s.initial_balances.items():
        if node_id not in by_id:
            problems.append(f"initial_balances names unknown node {node_id}")
        if amount < 0:
            problems.append(f"initial balance of {node_id} is negative")
    if (s.tasks or s.pocs or s.claims) and not any(n["kind"] == "Fog" for n in s.nodes):
        problems.append("scenario needs at least one fog node")

    seen_targets, seen_vulns, seen_ids = set(), set(), set()
    for t in s.tasks:
        if t.task_id in seen_ids:
            problems.append(f"duplicate task id {t.task_id}")
        seen_ids.add(t.task_id)
        if t.user not in by_id:
            problems.append(f"task {t.task_id} references unknown node {t.user}")
        elif not has(t.user, "User"):
            problems.append(f"task {t.task_id}: {t.user} does not hold the User role")
        if t.at < 0 or t.escrow < 0:
            problems.append(f"task {t.task_id}: at and escrow must be >= 0")
        if not t.targets:
            problems.append(f"task {t.task_id} has no targets")
        for target in t.targets:
            if target.target_type is not t.task_type:
                problems.append(f"task {t.task_id}: target {target.target_id} is not a {t.task_type.value}")
            if target.target_id in seen_targets:
                problems.append(f"duplicate target id {target.target_id}")
            seen_targets.add(target.target_id)
            for v in target.planted:
                if v.vuln_id in seen_vulns:
                    problems.append(f"duplicate vuln id {v.vuln_id}")
                seen_vulns.add(v.vuln_id)

    seen_pocs = set()
    for p in s.pocs:
        if p.poc_id in seen_pocs:
            problems.append(f"duplicate POC id {p.poc_id}")
        seen_pocs.add(p.poc_id)
        if p.author not in by_id:
            problems.append(f"POC {p.poc_id} references unknown node {p.author}")
        elif not has(p.author, "POCD"):
            problems.append(f"POC {p.poc_id}: {p.author} does not hold the POCD role")
        if p.verdicts is not None and len(p.verdicts) != s.params.quorum:
            problems.append(f"POC {p.poc_id}: {len(p.verdicts)} verdicts for quorum {s.params.quorum}")
        if p.at < 0:
            problems.append(f"POC {p.poc_id}: at must be >= 0")

    seen_offers = set()
    for c in s.claims:
        if c.offer_id in seen_offers:
            problems.append(f"duplicate claim id {c.offer_id}")
        seen_offers.add(c.offer_id)
        for who, role in ((c.author, "WHH"), (c.user, "User")):
            if who not in by_id:
                problems.append(f"claim {c.offer_id} references unknown node {who}")
            elif not has(who, role):
                problems.append(f"claim {c.offer_id}: {who} does not hold the {role} role")
        if c.price < 0 or c.at < 0:
            problems.append(f"claim {c.offer_id}: price and at must be >= 0")
        if c.decide_at is not None and c.decide_at <= c.at:
            problems.append(f"claim {c.offer_id}: decide_at must come after at")
    if problems:
        raise ScenarioValidationError("; ".join(problems))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, name=path.stem)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"risk_distribution"``."""
    ref = resources.files("sapiens_sim") / "scenarios" / f"{name}.json"
    with resources.as_file(ref) as p:
        if not p.exists():
            raise FileNotFoundError(name)
        return p


def _target_dict(t: AuditTarget) -> dict:
    return {
        "id": t.target_id,
        "type": t.target_type.value,
        "planted": [
            {"id": v.vuln_id, "pattern": v.pattern, "severity": v.severity.value, "detectability": v.base_detectability}
            for v in t.planted
        ],
    }


def scenario_to_dict(s: Scenario) -> dict:
    params = s.params.to_dict()
    params["capacity_step"] = float(s.params.capacity_step)
    out = {
        "schema": SCHEMA_VERSION,
        "run_seed": s.run_seed,
        "params": params,
        "nodes": s.nodes,
        "initial_balances": s.initial_balances,
        "tasks": [
            {"id": t.task_id, "at": t.at, "user": t.user, "type": t.task_type.value, "service": t.service.value,
             "escrow": t.escrow, "targets": [_target_dict(x) for x in t.targets]}
            for t in s.tasks
        ],
        "pocs": [],
        "claims": [],
    }
    for p in s.pocs:
        d = {"id": p.poc_id, "at": p.at, "author": p.author, "pattern": p.pattern, "valid": p.valid}
        if p.verdicts is not None:
            d["verdicts"] = p.verdicts
        out["pocs"].append(d)
    for c in s.claims:
        d = {"id": c.offer_id, "at": c.at, "author": c.author, "user": c.user, "price": c.price,
             "finding": {"target": c.target, "vuln": c.vuln_id, "severity": c.severity.value}}
        if c.decision is not None:
            d["decision"] = c.decision
        if c.decide_at is not None:
            d["decide_at"] = c.decide_at
        out["claims"].append(d)
    return out
