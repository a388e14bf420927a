"""Three-phase proof-of-authority consensus state machine.

One proposer per (height, round); pre-prepare carries the full block,
prepare and commit carry only its digest. A validator commits once it
has seen 2f+1 commit votes, where f = floor((n-1)/3). Liveness under a
faulty proposer comes from a timeout-driven round change.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .blocks import Block, block_digest, block_gas


class ConsensusError(Exception):
    pass


class NotProposer(ConsensusError):
    pass


def max_faulty(n: int) -> int:
    if n < 1:
        raise ValueError("need at least one validator")
    return (n - 1) // 3


def quorum_size(n: int) -> int:
    """Votes needed to advance a phase: 2f+1 out of n = 3f+1."""
    return 2 * max_faulty(n) + 1


def select_proposer(height: int, round_: int, n: int) -> int:
    """Deterministic round-robin proposer election."""
    if n < 1:
        raise ValueError("need at least one validator")
    return (height + round_) % n


class MsgType(enum.Enum):
    PRE_PREPARE = "pre-prepare"
    PREPARE = "prepare"
    COMMIT = "commit"


@dataclass(frozen=True)
class ConsensusMessage:
    type: MsgType
    height: int
    round: int
    digest: bytes
    sender: int
    block: Optional[Block] = None


class Phase(enum.Enum):
    AWAITING = "awaiting-proposal"
    PRE_PREPARED = "pre-prepared"
    PREPARED = "prepared"
    COMMITTED = "committed"


class Validator:
    """One validator's consensus state.

    The environment supplies broadcasting, timers, block construction and
    a commit hook; the state machine itself is driven purely by
    start_height(), handle() and timer callbacks.
    """

    def __init__(self, index: int, n: int, gas_limit: int,
                 round_timeout: float,
                 broadcast: Callable[[ConsensusMessage], None],
                 send_to: Callable[[int, ConsensusMessage], None],
                 set_timer: Callable[[float, Callable[[], None]], None],
                 build_block: Callable[[int, int, float], Block],
                 on_commit: Callable[[Block], None],
                 genesis: bytes):
        self.index = index
        self.n = n
        self.gas_limit = gas_limit
        self.round_timeout = round_timeout
        self._broadcast = broadcast
        self._send_to = send_to
        self._set_timer = set_timer
        self._build_block = build_block
        self._on_commit = on_commit

        self.chain: list[Block] = []
        self.chain_digests: list[bytes] = [genesis]
        self.height = 0
        self.round = 0
        self.phase = Phase.AWAITING
        self.active = False
        self.period_start = 0.0
        self.locked_block: Optional[Block] = None
        self.locked = False  # True once this height reached Prepared
        self.prepare_votes: dict[bytes, set[int]] = {}
        self.commit_votes: dict[bytes, set[int]] = {}
        self._future: dict[tuple[int, int], list[ConsensusMessage]] = {}

    # -- driving --------------------------------------------------------

    @property
    def head_digest(self) -> bytes:
        return self.chain_digests[-1]

    def is_proposer(self, round_: Optional[int] = None) -> bool:
        r = self.round if round_ is None else round_
        return select_proposer(self.height, r, self.n) == self.index

    def start_height(self, period_start: float) -> None:
        """Begin consensus for the next height; called at a period boundary."""
        self.active = True
        self.round = 0
        self.phase = Phase.AWAITING
        self.period_start = period_start
        self.locked_block = None
        self.locked = False
        self.prepare_votes = {}
        self.commit_votes = {}
        self._arm_timer()
        if self.is_proposer():
            block = self._build_block(self.height, self.round, period_start)
            self.propose(block)
        self._replay_buffered()

    def propose(self, block: Block) -> None:
        if not self.is_proposer():
            raise NotProposer(
                f"validator {self.index} is not the proposer for "
                f"(height={self.height}, round={self.round})")
        msg = ConsensusMessage(MsgType.PRE_PREPARE, self.height, self.round,
                               block_digest(block), self.index, block)
        self._broadcast(msg)

    # -- message handling ----------------------------------------------

    def handle(self, msg: ConsensusMessage) -> None:
        if msg.height < self.height:
            return  # stale
        if msg.height > self.height:
            self._buffer(msg)
            return
        if not self.active:
            self._buffer(msg)
            return
        if msg.round < self.round:
            return  # stale round
        if msg.round > self.round:
            if self._try_fast_forward(msg):
                pass  # round advanced; fall through to process msg
            else:
                self._buffer(msg)
                return
        if msg.type is MsgType.PRE_PREPARE:
            self._on_pre_prepare(msg)
        elif msg.type is MsgType.PREPARE:
            self._on_prepare(msg)
        else:
            self._on_commit_msg(msg)

    def _try_fast_forward(self, msg: ConsensusMessage) -> bool:
        """Catch up to a later round on a valid proposal for that round."""
        if msg.type is not MsgType.PRE_PREPARE:
            return False
        if msg.sender != select_proposer(self.height, msg.round, self.n):
            return False
        if self.locked and self.locked_block is not None \
                and msg.digest != block_digest(self.locked_block):
            return False
        self._enter_round(msg.round)
        return True

    def _enter_round(self, round_: int) -> None:
        self.round = round_
        self.phase = Phase.AWAITING
        self.prepare_votes = {}
        self.commit_votes = {}
        if not self.locked:
            self.locked_block = None
        self._arm_timer()
        self._replay_buffered()

    def _on_pre_prepare(self, msg: ConsensusMessage) -> None:
        if self.phase is not Phase.AWAITING:
            return
        if msg.sender != select_proposer(self.height, self.round, self.n):
            return  # wrong proposer
        block = msg.block
        if block is None:
            return
        if block.parent_digest != self.head_digest:
            return  # does not extend our chain
        if block_gas(block) > self.gas_limit:
            return  # violates the block gas limit
        if self.locked and self.locked_block is not None \
                and msg.digest != block_digest(self.locked_block):
            return  # locked on a different block
        self.locked_block = block
        self.phase = Phase.PRE_PREPARED
        self._vote(MsgType.PREPARE, msg.digest)
        self._check_quorums()

    def _on_prepare(self, msg: ConsensusMessage) -> None:
        self.prepare_votes.setdefault(msg.digest, set()).add(msg.sender)
        self._check_quorums()

    def _on_commit_msg(self, msg: ConsensusMessage) -> None:
        self.commit_votes.setdefault(msg.digest, set()).add(msg.sender)
        self._check_quorums()

    def _check_quorums(self) -> None:
        if self.locked_block is None:
            return
        digest = block_digest(self.locked_block)
        q = quorum_size(self.n)
        if self.phase is Phase.PRE_PREPARED \
                and len(self.prepare_votes.get(digest, ())) >= q:
            self.phase = Phase.PREPARED
            self.locked = True
            self._vote(MsgType.COMMIT, digest)
        if self.phase is Phase.PREPARED \
                and len(self.commit_votes.get(digest, ())) >= q:
            self._commit(self.locked_block)

    def _vote(self, type_: MsgType, digest: bytes) -> None:
        self._broadcast(ConsensusMessage(type_, self.height, self.round,
                                         digest, self.index))

    def _commit(self, block: Block) -> None:
        self.phase = Phase.COMMITTED
        self.chain.append(block)
        self.chain_digests.append(block_digest(block))
        self.height += 1
        self.round = 0
        self.active = False
        self.locked_block = None
        self.locked = False
        self.prepare_votes = {}
        self.commit_votes = {}
        self.phase = Phase.AWAITING
        self._on_commit(block)

    # -- round change ---------------------------------------------------

    def _arm_timer(self) -> None:
        height, round_ = self.height, self.round
        self._set_timer(self.round_timeout,
                        lambda: self._on_round_timeout(height, round_))

    def _on_round_timeout(self, height: int, round_: int) -> None:
        if not self.active or self.height != height or self.round != round_:
            return  # stale timer
        self._enter_round(round_ + 1)
        if self.is_proposer():
            block = self.locked_block if self.locked else \
                self._build_block(self.height, self.round, self.period_start)
            self.propose(block)
        self._replay_buffered()

    # -- buffering ------------------------------------------------------

    def _buffer(self, msg: ConsensusMessage) -> None:
        self._future.setdefault((msg.height, msg.round), []).append(msg)

    def _replay_buffered(self) -> None:
        key = (self.height, self.round)
        for msg in self._future.pop(key, []):
            self.handle(msg)
        # drop buffers for heights already behind us
        for key in [k for k in self._future if k[0] < self.height]:
            del self._future[key]
