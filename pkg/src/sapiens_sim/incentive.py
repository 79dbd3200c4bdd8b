"""SACF token accounting: escrow, rewards, settlement and penalties.

All amounts are integers in the smallest SACF unit. Every balance change goes
through :meth:`Bank._move`, which writes exactly one ledger transaction whose
memo names the source and destination accounts, so the full account state can
be rebuilt from the chain alone (:func:`replay_balances`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

from .errors import EscrowExhausted, InsufficientFunds, InternalInvariantViolation, InvalidTransition, UnknownNode
from .ledger import TRANSFER_KINDS, Ledger, TxKind
from .registry import Outcome, Registry

MINT_ACCOUNT = "protocol-mint"
GENESIS = "genesis"


class Situation(IntEnum):
    POC_ADOPTED = 1
    POC_AUDIT_ADOPTED = 2
    VULN_ADOPTED = 3
    VULN_AUDIT_ADOPTED = 4
    AUDIT_SERVICE_COMPLETE = 5


def escrow_account(task_id: str) -> str:
    return f"escrow:{task_id}"


@dataclass(frozen=True)
class Funding:
    """Where a reward is paid from: a task escrow, the protocol mint, or a buyer."""

    kind: str
    ref: str = ""

    @classmethod
    def escrow(cls, task_id: str) -> "Funding":
        return cls("escrow", task_id)

    @classmethod
    def mint(cls) -> "Funding":
        return cls("mint")

    @classmethod
    def account(cls, owner: str) -> "Funding":
        return cls("account", owner)

    @property
    def source(self) -> str:
        if self.kind == "escrow":
            return escrow_account(self.ref)
        if self.kind == "mint":
            return MINT_ACCOUNT
        return self.ref

    def __str__(self) -> str:
        return self.kind if self.kind == "mint" else f"{self.kind}:{self.ref}"


@dataclass(frozen=True)
class RewardEvent:
    situation: Situation
    beneficiary: str
    amount: int
    funding: Funding
    subject: str = ""

    def __post_init__(self):
        object.__setattr__(self, "situation", Situation(self.situation))
        if self.amount < 0:
            raise ValueError("negative reward")


@dataclass
class Settlement:
    task_id: str
    paid: list
    refund: int


class Bank:
    def __init__(self, ledger: Ledger, mint_enabled: bool = False, check_conservation: bool = True):
        self.ledger = ledger
        self.mint_enabled = mint_enabled
        self.check_conservation = check_conservation
        self.accounts: dict[str, int] = {MINT_ACCOUNT: 0}
        self.closed: set[str] = set()
        self.mint_counter = 0
        self.initial_supply = 0
        self.earned: dict[str, int] = {}

    def open_account(self, owner: str) -> None:
        self.accounts.setdefault(owner, 0)

    def balance(self, owner: str) -> int:
        try:
            return self.accounts[owner]
        except KeyError:
            raise UnknownNode(owner) from None

    def total(self) -> int:
        return sum(self.accounts.values())

    def conservation_holds(self) -> bool:
        return self.total() == self.initial_supply + self.mint_counter

    def _move(self, src: str, dst: str, amount: int, kind: TxKind, actor: str, subject: str, **memo) -> None:
        if amount < 0:
            raise ValueError("negative transfer")
        if dst not in self.accounts or dst in self.closed:
            raise InvalidTransition(f"account {dst} is not open")
        if src == GENESIS:
            self.initial_supply += amount
        elif src == MINT_ACCOUNT:
            if not self.mint_enabled:
                raise InvalidTransition("minting is disabled")
            self.mint_counter += amount
        else:
            if src not in self.accounts or src in self.closed:
                raise InvalidTransition(f"account {src} is not open")
            if self.accounts[src] < amount:
                raise InsufficientFunds(f"{src} holds {self.accounts[src]}, needs {amount}")
            self.accounts[src] -= amount
        self.accounts[dst] += amount
        self.ledger.record(kind, actor, subject, amount=amount, memo={"from": src, "to": dst, **memo})
        if self.check_conservation and not self.conservation_holds():
            raise InternalInvariantViolation(
                self.ledger.now, f"supply {self.total()} != {self.initial_supply} + minted {self.mint_counter}"
            )

    def endow(self, owner: str, amount: int) -> None:
        """Initial allocation; counts toward the initial total supply."""
        self._move(GENESIS, owner, amount, TxKind.ENDOWMENT, owner, owner)

    def escrow(self, user: str, task_id: str, amount: int) -> int:
        acct = escrow_account(task_id)
        if acct in self.accounts:
            raise InvalidTransition(f"{acct} already exists")
        if self.balance(user) < amount:
            raise InsufficientFunds(f"{user} holds {self.accounts[user]}, escrow needs {amount}")
        self.open_account(acct)
        self._move(user, acct, amount, TxKind.ESCROW, user, task_id)
        return self.accounts[acct]

    def reward(self, event: RewardEvent) -> None:
        src = event.funding.source
        if event.funding.kind == "escrow" and self.accounts.get(src, 0) < event.amount:
            raise EscrowExhausted(f"{src} holds {self.accounts.get(src, 0)}, reward needs {event.amount}")
        self._move(
            src,
            event.beneficiary,
            event.amount,
            TxKind.REWARD,
            event.beneficiary,
            event.subject or event.funding.ref,
            situation=int(event.situation),
            funding=str(event.funding),
        )
        self.earned[event.beneficiary] = self.earned.get(event.beneficiary, 0) + event.amount

    def settle(self, task_id: str, user: str, owed=(), failed: bool = False) -> Settlement:
        """Pay what a finished task owes and return the rest of its escrow to the user.

        When escrow-funded rewards exceed the escrow, each is scaled by
        ``escrow / owed_total`` with floor division; the remainder goes back
        to the user. A failed task pays nothing and refunds everything left.
        """
        acct = escrow_account(task_id)
        if acct not in self.accounts or acct in self.closed:
            raise InvalidTransition(f"{acct} is not open")
        paid = []
        if not failed:
            owed = list(owed)
            from_escrow = [e for e in owed if e.funding.kind == "escrow"]
            if any(e.funding.ref != task_id for e in from_escrow):
                raise ValueError("settlement may only spend its own escrow")
            available = self.accounts[acct]
            need = sum(e.amount for e in from_escrow)
            for event in owed:
                if event.funding.kind == "escrow" and need > available:
                    event = replace(event, amount=event.amount * available // need)
                self.reward(event)
                paid.append(event)
        refund = self.accounts[acct]
        self._move(acct, user, refund, TxKind.REFUND, user, task_id)
        self.closed.add(acct)
        return Settlement(task_id, paid, refund)

    def penalize(self, registry: Registry, node_id: str, outcome: Outcome, reason: str = ""):
        """Capacity or ranking penalty. Never confiscates SACF."""
        registry.live(node_id)
        outcome = Outcome(outcome)
        if outcome is Outcome.COMPLETED:
            raise ValueError("completion is not a penalty")
        self.ledger.record(TxKind.PENALTY, node_id, node_id, memo={"outcome": outcome.value, "reason": reason})
        return registry.record_outcome(node_id, outcome)

    def snapshot(self) -> dict[str, int]:
        return {k: self.accounts[k] for k in sorted(self.accounts)}


def replay_balances(chain: Ledger) -> tuple[dict[str, int], int, int]:
    """Rebuild (balances, minted, initial_supply) from the chain alone."""
    balances = {MINT_ACCOUNT: 0}
    minted = supply = 0
    for tx in chain.transactions():
        if tx.kind is TxKind.NODE_REGISTERED:
            balances.setdefault(tx.actor, 0)
            continue
        if tx.kind not in TRANSFER_KINDS:
            continue
        src, dst = tx.note("from"), tx.note("to")
        if src is None or dst is None:
            continue
        balances.setdefault(dst, 0)
        if src == GENESIS:
            supply += tx.amount
        elif src == MINT_ACCOUNT:
            minted += tx.amount
        else:
            balances[src] = balances.get(src, 0) - tx.amount
        balances[dst] += tx.amount
    return {k: balances[k] for k in sorted(balances)}, minted, supply


def balances_csv(balances: dict[str, int]) -> str:
    lines = ["owner,balance"] + [f"{owner},{balances[owner]}" for owner in sorted(balances)]
    return "\n".join(lines) + "\n"
