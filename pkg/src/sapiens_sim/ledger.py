"""Append-only hash-chained ledger.

Byte layout used for digesting (all JSON is compact, ``sort_keys=True``,
ASCII-only, UTF-8 encoded):

* a transaction encodes as the array
  ``[tx_id, kind, actor, subject, amount, logical_time, payload_digest, memo]``
  where ``memo`` is a list of ``[key, value]`` string pairs;
* ``content_hash`` is the hex digest of the encoded list of transactions;
* a block's full digest is the hex digest of
  ``[index, prev_hash, content_hash, sealed_at]``.

Block 0 links to :data:`ZERO_DIGEST`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import CorruptChain, EmptyBatch

DEFAULT_DIGEST = "sha256"
ZERO_DIGEST = "0" * 64
LEDGER_FORMAT = "sapiens-ledger"
LEDGER_VERSION = 1


class TxKind(str, Enum):
    TASK_SUBMITTED = "TaskSubmitted"
    SEGMENT_ASSIGNED = "SegmentAssigned"
    POC_SUBMITTED = "PocSubmitted"
    POC_VERDICT = "PocVerdict"
    VULN_SUBMITTED = "VulnSubmitted"
    VULN_VERDICT = "VulnVerdict"
    CLAIM_OFFERED = "ClaimOffered"
    CLAIM_DECIDED = "ClaimDecided"
    REPORT_DELIVERED = "ReportDelivered"
    ESCROW = "Escrow"
    REWARD = "Reward"
    PENALTY = "Penalty"
    NODE_ABANDONED = "NodeAbandoned"
    # bookkeeping kinds needed to replay the whole economy from genesis
    NODE_REGISTERED = "NodeRegistered"
    WORK_PROOF = "WorkProofAccepted"
    ENDOWMENT = "Endowment"
    REFUND = "Refund"
    TASK_TRANSITION = "TaskTransition"
    ARBITERS_ASSIGNED = "ArbitersAssigned"


TRANSFER_KINDS = frozenset({TxKind.ESCROW, TxKind.REWARD, TxKind.PENALTY, TxKind.ENDOWMENT, TxKind.REFUND})


def canonical_bytes(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, ensure_ascii=True).encode("utf-8")


def hex_digest(data: bytes, algorithm: str = DEFAULT_DIGEST) -> str:
    return hashlib.new(algorithm, data).hexdigest()


def digest_of(obj: Any, algorithm: str = DEFAULT_DIGEST) -> str:
    """Digest of an arbitrary JSON-serializable payload."""
    return hex_digest(canonical_bytes(obj), algorithm)


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    kind: TxKind
    actor: str
    subject: str
    amount: int = 0
    logical_time: int = 0
    payload_digest: str = ZERO_DIGEST
    memo: tuple[tuple[str, str], ...] = ()

    def note(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.memo:
            if k == key:
                return v
        return default

    def encode(self) -> list:
        return [
            self.tx_id,
            self.kind.value,
            self.actor,
            self.subject,
            self.amount,
            self.logical_time,
            self.payload_digest,
            [list(pair) for pair in self.memo],
        ]

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "kind": self.kind.value,
            "actor": self.actor,
            "subject": self.subject,
            "amount": self.amount,
            "logical_time": self.logical_time,
            "payload_digest": self.payload_digest,
            "memo": [list(pair) for pair in self.memo],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Transaction":
        return cls(
            tx_id=d["tx_id"],
            kind=TxKind(d["kind"]),
            actor=d["actor"],
            subject=d["subject"],
            amount=d["amount"],
            logical_time=d["logical_time"],
            payload_digest=d["payload_digest"],
            memo=tuple((k, v) for k, v in d.get("memo", [])),
        )


def content_hash(transactions: Iterable[Transaction], algorithm: str = DEFAULT_DIGEST) -> str:
    return hex_digest(canonical_bytes([tx.encode() for tx in transactions]), algorithm)


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: str
    content_hash: str
    sealed_at: int
    transactions: tuple[Transaction, ...]

    def header(self) -> list:
        return [self.index, self.prev_hash, self.content_hash, self.sealed_at]

    def digest(self, algorithm: str = DEFAULT_DIGEST) -> str:
        return hex_digest(canonical_bytes(self.header()), algorithm)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prev_hash": self.prev_hash,
            "content_hash": self.content_hash,
            "sealed_at": self.sealed_at,
            "transactions": [tx.to_dict() for tx in self.transactions],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Block":
        return cls(
            index=d["index"],
            prev_hash=d["prev_hash"],
            content_hash=d["content_hash"],
            sealed_at=d["sealed_at"],
            transactions=tuple(Transaction.from_dict(t) for t in d["transactions"]),
        )


@dataclass(frozen=True)
class Verification:
    valid: bool
    first_bad_index: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.valid


def _block_problem(blocks: Sequence[Block], i: int, last_time: int, algorithm: str) -> str | None:
    block = blocks[i]
    if block.index != i:
        return f"index {block.index} at position {i}"
    expected_prev = ZERO_DIGEST if i == 0 else blocks[i - 1].digest(algorithm)
    if block.prev_hash != expected_prev:
        return "prev_hash does not link to the preceding block"
    if content_hash(block.transactions, algorithm) != block.content_hash:
        return "content_hash does not match transactions"
    if not block.transactions:
        return "empty block"
    times = [tx.logical_time for tx in block.transactions]
    if any(b < a for a, b in zip(times, times[1:])) or times[0] < last_time:
        return "logical_time decreases"
    if block.sealed_at != times[-1]:
        return "sealed_at differs from the last transaction time"
    return None


def verify_chain(blocks: "Sequence[Block] | Ledger", algorithm: str | None = None) -> Verification:
    """Check every block invariant; report the lowest offending index."""
    if isinstance(blocks, Ledger):
        algorithm = algorithm or blocks.algorithm
        blocks = blocks.blocks
    algorithm = algorithm or DEFAULT_DIGEST
    last_time = 0
    for i in range(len(blocks)):
        problem = _block_problem(blocks, i, last_time, algorithm)
        if problem is not None:
            return Verification(False, i, problem)
        last_time = blocks[i].sealed_at
    return Verification(True)


class Ledger:
    """The single authoritative chain owned by one simulation."""

    def __init__(self, algorithm: str = DEFAULT_DIGEST, verify_on_append: bool = True):
        if hashlib.new(algorithm).digest_size != 32:
            raise ValueError(f"{algorithm} is not a 256-bit digest")
        self.algorithm = algorithm
        self.verify_on_append = verify_on_append
        self.blocks: list[Block] = []
        self.pending: list[Transaction] = []
        self.now = 0
        self._seq = 0

    def __len__(self) -> int:
        return len(self.blocks)

    def record(
        self,
        kind: TxKind,
        actor: str,
        subject: str,
        amount: int = 0,
        payload: Any = None,
        memo: Mapping[str, Any] | None = None,
        payload_digest: str | None = None,
    ) -> Transaction:
        """Stage a transaction stamped with the current tick.

        ``payload`` is digested; pass ``payload_digest`` instead when only a
        precomputed digest may leave the caller.
        """
        if amount < 0:
            raise ValueError("negative amount")
        if amount and kind not in TRANSFER_KINDS:
            raise ValueError(f"{kind.value} transactions carry no amount")
        self._seq += 1
        tx = Transaction(
            tx_id=f"tx{self._seq:07d}",
            kind=kind,
            actor=actor,
            subject=subject,
            amount=amount,
            logical_time=self.now,
            payload_digest=payload_digest or (ZERO_DIGEST if payload is None else digest_of(payload, self.algorithm)),
            memo=tuple((str(k), str(v)) for k, v in (memo or {}).items()),
        )
        self.pending.append(tx)
        return tx

    def append_block(self, pending: Sequence[Transaction]) -> Block:
        if not pending:
            raise EmptyBatch("cannot seal an empty batch")
        if self.verify_on_append:
            check = verify_chain(self.blocks, self.algorithm)
            if not check:
                raise CorruptChain(check.first_bad_index, check.reason)
        index = len(self.blocks)
        prev = ZERO_DIGEST if index == 0 else self.blocks[-1].digest(self.algorithm)
        txs = tuple(pending)
        block = Block(
            index=index,
            prev_hash=prev,
            content_hash=content_hash(txs, self.algorithm),
            sealed_at=max(tx.logical_time for tx in txs),
            transactions=txs,
        )
        self.blocks.append(block)
        return block

    def seal(self) -> Block | None:
        """Seal staged transactions into a block, if there are any."""
        if not self.pending:
            return None
        block = self.append_block(self.pending)
        self.pending = []
        return block

    def transactions(self) -> Iterator[Transaction]:
        for block in self.blocks:
            yield from block.transactions

    def head_digest(self) -> str:
        return self.blocks[-1].digest(self.algorithm) if self.blocks else ZERO_DIGEST

    def block_of(self, tx_id: str) -> int:
        for block in self.blocks:
            if any(tx.tx_id == tx_id for tx in block.transactions):
                return block.index
        raise KeyError(tx_id)


def query(
    chain: Ledger,
    kind: TxKind | None = None,
    actor: str | None = None,
    subject: str | None = None,
    since: int | None = None,
    until: int | None = None,
) -> list[Transaction]:
    """Matching transactions in ledger order. ``until`` is inclusive."""
    check = verify_chain(chain)
    if not check:
        raise CorruptChain(check.first_bad_index, check.reason)
    out = []
    for tx in chain.transactions():
        if kind is not None and tx.kind != kind:
            continue
        if actor is not None and tx.actor != actor:
            continue
        if subject is not None and tx.subject != subject:
            continue
        if since is not None and tx.logical_time < since:
            continue
        if until is not None and tx.logical_time > until:
            continue
        out.append(tx)
    return out


SYNC_TRIGGERS = frozenset({TxKind.REPORT_DELIVERED, TxKind.CLAIM_DECIDED})


def sync_views(views: dict[str, tuple[Block, ...]], chain: Ledger, trigger: Transaction) -> dict[str, tuple[Block, ...]]:
    """Bring every node view to the chain prefix ending at the trigger's block."""
    if trigger.kind not in SYNC_TRIGGERS:
        raise ValueError(f"{trigger.kind.value} does not trigger synchronization")
    idx = chain.block_of(trigger.tx_id)
    prefix = tuple(chain.blocks[: idx + 1])
    for node in views:
        views[node] = prefix
    return views


def dump_ledger(chain: Ledger, path: str | Path) -> None:
    lines = [json.dumps({"format": LEDGER_FORMAT, "version": LEDGER_VERSION, "digest": chain.algorithm}, sort_keys=True)]
    lines += [json.dumps(block.to_dict(), sort_keys=True, separators=(",", ":")) for block in chain.blocks]
    Path(path).write_text("\n".join(lines) + "\n")


def load_ledger(path: str | Path) -> Ledger:
    """Read a dump without verifying it; call :func:`verify_chain` next."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty ledger file")
    header = json.loads(text[0])
    if header.get("format") != LEDGER_FORMAT or header.get("version") != LEDGER_VERSION:
        raise ValueError(f"{path}: unsupported ledger header {header!r}")
    chain = Ledger(header["digest"])
    chain.blocks = [Block.from_dict(json.loads(line)) for line in text[1:] if line.strip()]
    if chain.blocks:
        chain.now = chain.blocks[-1].sealed_at
    chain._seq = sum(len(b.transactions) for b in chain.blocks)
    return chain
