"""Deterministic simulator of a blockchain-backed security-audit marketplace."""

from .errors import *  # noqa: F401,F403
from .incentive import Bank, Funding, RewardEvent, Situation, replay_balances
from .ledger import Block, Ledger, Transaction, TxKind, query, sync_views, verify_chain
from .network import Network, Params
from .oracle import AuditTarget, PlantedVuln, Severity, TargetType, classify_risk, detect
from .registry import NodeKind, NodeProfile, Outcome, Registry, Role, WorkProof
from .scenario import Scenario, bundled_scenario, load_scenario, parse_scenario
from .scheduler import SelectionRequest, select_arbiters, select_by_proximity_pow
from .sim import RunMetrics, RunResult, emit_report, run
from .tasks import Service, Task, TaskStatus

__version__ = "0.1.0"
