"""Shared protocol state: one ledger, one registry, one bank, plus fog storage."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .errors import InsufficientNodes
from .incentive import Bank, Funding, RewardEvent, Situation
from .ledger import SYNC_TRIGGERS, Block, Ledger, sync_views
from .registry import NodeProfile, Registry, as_fraction

DEFAULT_REWARDS = {s: 1 for s in Situation}


@dataclass
class Params:
    segments: int = 4
    redundancy: int = 2
    quorum: int = 3
    max_rounds: int = 5
    capacity_step: Fraction = Fraction(1)
    ranking_step: int = 1
    w_pow: float = 0.5
    w_dist: float = 0.5
    rewards: dict = field(default_factory=lambda: dict(DEFAULT_REWARDS))
    fp_rate: float = 0.0
    mint_enabled: bool = False
    pow_difficulty: int = 8
    wha_count: int = 1
    wha_reject_prob: float = 0.0
    poca_error_rate: float = 0.0
    claim_ttl: int = 10

    def __post_init__(self):
        self.capacity_step = as_fraction(self.capacity_step)
        self.rewards = {Situation(int(k)): int(v) for k, v in self.rewards.items()}
        for s in Situation:
            self.rewards.setdefault(s, 1)

    def problems(self) -> list[str]:
        out = []
        if self.segments < 1:
            out.append("segments must be >= 1")
        if self.redundancy < 1:
            out.append("redundancy must be >= 1")
        if self.quorum < 1 or self.quorum % 2 == 0:
            out.append("quorum must be a positive odd integer")
        if self.max_rounds < 1:
            out.append("max_rounds must be >= 1")
        if self.capacity_step <= 0:
            out.append("capacity_step must be > 0")
        if self.ranking_step < 0:
            out.append("ranking_step must be >= 0")
        if not (0 <= self.w_pow <= 1 and 0 <= self.w_dist <= 1) or abs(self.w_pow + self.w_dist - 1) > 1e-9:
            out.append("w_pow and w_dist must lie in [0, 1] and sum to 1")
        if any(v < 0 for v in self.rewards.values()):
            out.append("reward amounts must be >= 0")
        for name in ("fp_rate", "wha_reject_prob", "poca_error_rate"):
            if not 0 <= getattr(self, name) <= 1:
                out.append(f"{name} must lie in [0, 1]")
        if not 0 <= self.pow_difficulty <= 32:
            out.append("pow_difficulty must lie in [0, 32]")
        if self.wha_count < 1:
            out.append("wha_count must be >= 1")
        if self.claim_ttl < 1:
            out.append("claim_ttl must be >= 1")
        return out

    def to_dict(self) -> dict:
        return {
            "segments": self.segments,
            "redundancy": self.redundancy,
            "quorum": self.quorum,
            "max_rounds": self.max_rounds,
            "capacity_step": str(self.capacity_step),
            "ranking_step": self.ranking_step,
            "w_pow": self.w_pow,
            "w_dist": self.w_dist,
            "rewards": {str(int(k)): v for k, v in sorted(self.rewards.items())},
            "fp_rate": self.fp_rate,
            "mint_enabled": self.mint_enabled,
            "pow_difficulty": self.pow_difficulty,
            "wha_count": self.wha_count,
            "wha_reject_prob": self.wha_reject_prob,
            "poca_error_rate": self.poca_error_rate,
            "claim_ttl": self.claim_ttl,
        }


@dataclass
class FogStore:
    """What a fog node keeps: adopted POCs, delivered reports, sealed envelopes."""

    pocs: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    envelopes: dict = field(default_factory=dict)


class Network:
    def __init__(self, params: Params | None = None, run_seed: int = 0, algorithm: str = "sha256",
                 wha_policy: Callable | None = None):
        self.params = params or Params()
        self.run_seed = run_seed
        self.ledger = Ledger(algorithm)
        self.registry = Registry(self.ledger, self.params.capacity_step, self.params.ranking_step)
        self.bank = Bank(self.ledger, self.params.mint_enabled)
        self.tasks: dict = {}
        self.pocs: dict = {}
        self.offers: dict = {}
        self.reviews: dict = {}
        self.fogs: dict[str, FogStore] = {}
        self.views: dict[str, tuple[Block, ...]] = {}
        self.traces: dict[str, list[dict]] = {}
        self.wha_policy = wha_policy

    @property
    def tick(self) -> int:
        return self.ledger.now

    def add_node(self, profile: NodeProfile, balance: int = 0) -> str:
        node_id = self.registry.register_node(profile)
        self.bank.open_account(node_id)
        if balance:
            self.bank.endow(node_id, balance)
        if profile.kind.value == "Fog":
            self.fogs[node_id] = FogStore()
        self.views[node_id] = ()
        return node_id

    def nearest_fog(self, node_id: str) -> str:
        fogs = self.registry.fog_nodes()
        if not fogs:
            raise InsufficientNodes("no fog node registered")
        return min(fogs, key=lambda f: (self.registry.distance(f.node_id, node_id), f.node_id)).node_id

    def trace(self, subject: str, event: str, **fields: Any) -> None:
        self.traces.setdefault(subject, []).append({"tick": self.tick, "event": event, **fields})

    def funding_for(self, task_id: str | None) -> Funding | None:
        """Mint when enabled; otherwise the task's escrow; None if neither applies."""
        if self.params.mint_enabled:
            return Funding.mint()
        return Funding.escrow(task_id) if task_id is not None else None

    def reward_event(self, situation: Situation, beneficiary: str, task_id: str | None, subject: str = ""):
        funding = self.funding_for(task_id)
        if funding is None:
            return None
        return RewardEvent(situation, beneficiary, self.params.rewards[situation], funding, subject or (task_id or ""))

    def seal(self) -> Block | None:
        """Seal this tick's transactions and synchronize views on completion events."""
        block = self.ledger.seal()
        if block is not None:
            for tx in block.transactions:
                if tx.kind in SYNC_TRIGGERS:
                    sync_views(self.views, self.ledger, tx)
                    break
        return block
