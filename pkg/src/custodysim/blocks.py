"""Blocks, the mempool and the greedy FIFO block builder."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .ledger import Transaction

HEADER_SIZE = 1909


@dataclass(frozen=True)
class Block:
    height: int
    parent_digest: bytes
    proposer: int
    timestamp: float
    transactions: tuple = ()
    header_size: int = HEADER_SIZE
    # Extra byte folded into the digest; lets tests (and the equivocating
    # fault model) mint two distinct blocks from the same contents.
    salt: int = 0


def block_size(block: Block) -> int:
    """Header plus the serialized size of every included transaction."""
    return block.header_size + sum(tx.size for tx in block.transactions)


def block_gas(block: Block) -> int:
    return sum(tx.gas for tx in block.transactions)


def block_digest(block: Block) -> bytes:
    """256-bit digest over the canonical serialization of the block."""
    h = hashlib.sha256()
    h.update(struct.pack(">Q", block.height))
    h.update(block.parent_digest)
    h.update(struct.pack(">Qd", block.proposer, block.timestamp))
    h.update(struct.pack(">Q", block.salt))
    for tx in block.transactions:
        h.update(struct.pack(">QQQ", tx.uid, tx.gas, tx.size))
        h.update(tx.evidence_id.value)
        h.update(tx.issuer.value)
    return h.digest()


def genesis_digest(chain_tag: bytes = b"genesis") -> bytes:
    return hashlib.sha256(chain_tag).digest()


class Mempool:
    """FIFO queue of pending transactions.

    Transactions leave the pool only when seen in a committed block;
    building a block does not consume them.
    """

    def __init__(self):
        self._pending: list[Transaction] = []
        self._uids: set[int] = set()

    def submit(self, tx: Transaction) -> None:
        if tx.uid in self._uids:
            return
        self._pending.append(tx)
        self._uids.add(tx.uid)

    def remove_committed(self, uids: Iterable[int]) -> None:
        drop = set(uids)
        if not drop & self._uids:
            return
        self._pending = [tx for tx in self._pending if tx.uid not in drop]
        self._uids -= drop

    def drop(self, uid: int) -> None:
        self.remove_committed([uid])

    @property
    def pending(self) -> tuple:
        return tuple(self._pending)

    def __len__(self):
        return len(self._pending)

    def __contains__(self, uid: int):
        return uid in self._uids

    def stuck_head(self, gas_limit: int) -> Optional[Transaction]:
        """Head transaction that can never fit in any block, if there is one."""
        if self._pending and self._pending[0].gas > gas_limit:
            return self._pending[0]
        return None


def build_block(mempool: Mempool, gas_limit: int, height: int,
                parent_digest: bytes, proposer: int, period_start: float,
                header_size: int = HEADER_SIZE) -> Block:
    """Fill a block from the mempool in strict FIFO order.

    Filling stops at the first transaction that does not fit under the
    gas limit: no reordering, no gap-filling. A head transaction whose
    gas alone exceeds the limit blocks the queue (see Mempool.stuck_head).
    """
    chosen = []
    gas = 0
    for tx in mempool.pending:
        if gas + tx.gas > gas_limit:
            break
        chosen.append(tx)
        gas += tx.gas
    return Block(height=height, parent_digest=parent_digest, proposer=proposer,
                 timestamp=period_start, transactions=tuple(chosen),
                 header_size=header_size)
