"""End-to-end simulation: validators, mempools, workload and metrics.

Wires the consensus state machines to the discrete-event network, drives
one proposal per block period and collects per-period metrics (gas rate,
inclusion latency, consensus latency, chain size).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional

from . import blocks as blk
from .blocks import Block, Mempool, block_digest, block_size, build_block
from .consensus import ConsensusMessage, MsgType, Validator, max_faulty
from .ledger import LedgerState, Transaction
from .netsim import LinkModel, Network, Scheduler


class ConfigError(Exception):
    pass


SILENT = "silent"
EQUIVOCATE = "equivocate"


@dataclass(frozen=True)
class ExperimentConfig:
    period: float = 300.0
    gas_limit: int = 805020
    validators: int = 4
    byzantine: tuple = ()  # ((index, "silent"|"equivocate"), ...)
    bandwidth: float = 1_000_000.0
    base_delay: float = 0.0
    jitter: float = 0.0
    prepare_size: int = 128
    commit_size: int = 128
    preprepare_overhead: int = 256
    header_size: int = 1909
    genesis_size: int = 4096
    round_timeout: Optional[float] = None  # default: 2 * period
    seed: int = 0
    periods: int = 100
    drain: bool = True
    max_drain_periods: int = 1000
    reject_invalid_at_mempool: bool = False

    def validate(self) -> None:
        if self.period <= 0:
            raise ConfigError("period must be positive")
        if self.periods <= 0:
            raise ConfigError("duration must be positive")
        if self.validators < 1:
            raise ConfigError("need at least one validator")
        if self.gas_limit < 0:
            raise ConfigError("gas limit cannot be negative")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        for idx, kind in self.byzantine:
            if not 0 <= idx < self.validators:
                raise ConfigError(f"byzantine index {idx} out of range")
            if kind not in (SILENT, EQUIVOCATE):
                raise ConfigError(f"unknown byzantine behavior {kind!r}")
        if self.byzantine:
            f = max_faulty(self.validators)
            if len(self.byzantine) > f:
                raise ConfigError(
                    f"{len(self.byzantine)} faulty validators exceeds the "
                    f"tolerated f={f} for n={self.validators}")

    @property
    def effective_round_timeout(self) -> float:
        return self.round_timeout if self.round_timeout is not None \
            else 2.0 * self.period


@dataclass
class MetricsRow:
    period_index: int
    gas_rate: int
    mean_lb: float
    max_lb: float
    mean_lc: float
    committed_block_size: int
    chain_size_bytes: int
    mempool_depth: int


@dataclass
class SimResult:
    config: ExperimentConfig
    rows: list
    chain_digests: dict        # validator index -> final head digest (hex)
    chain_lengths: dict        # validator index -> committed block count
    honest: list               # honest validator indices
    tx_records: dict           # uid -> (issue_time, block_timestamp)
    receipts: dict             # uid -> Receipt (from validator honest[0])
    commit_latencies: list     # (height, seconds)
    periods_elapsed: int
    stuck_transactions: list   # uids flagged as never fitting a block

    @property
    def blocks_per_period(self) -> float:
        if not self.honest:
            return 0.0
        n = min(self.chain_lengths[i] for i in self.honest)
        return n / self.periods_elapsed if self.periods_elapsed else 0.0


class _Node:
    """One validator process: consensus + mempool + ledger replica."""

    def __init__(self, sim: "Simulation", index: int):
        self.sim = sim
        self.index = index
        self.mempool = Mempool()
        self.ledger = LedgerState()
        cfg = sim.config
        self.validator = Validator(
            index=index, n=cfg.validators, gas_limit=cfg.gas_limit,
            round_timeout=cfg.effective_round_timeout,
            broadcast=self._broadcast, send_to=self._send_to,
            set_timer=self._set_timer, build_block=self._build,
            on_commit=self._committed, genesis=sim.genesis)

    # environment hooks -------------------------------------------------

    def _broadcast(self, msg: ConsensusMessage) -> None:
        if msg.type is MsgType.PRE_PREPARE:
            self.sim.note_proposal(msg)
        self.sim.network.broadcast(self.index, msg, self.sim.wire_size(msg))

    def _send_to(self, recipient: int, msg: ConsensusMessage) -> None:
        if msg.type is MsgType.PRE_PREPARE:
            self.sim.note_proposal(msg)
        self.sim.network.send(self.index, recipient, msg, self.sim.wire_size(msg))

    def _set_timer(self, delay: float, callback) -> None:
        self.sim.scheduler.schedule(delay, callback, tag=f"timer:{self.index}")

    def _build(self, height: int, round_: int, period_start: float) -> Block:
        stuck = self.mempool.stuck_head(self.sim.config.gas_limit)
        if stuck is not None:
            self.sim.note_stuck(stuck)
        return build_block(self.mempool, self.sim.config.gas_limit, height,
                           self.validator.head_digest, self.index,
                           period_start, self.sim.config.header_size)

    def _committed(self, block: Block) -> None:
        now = self.sim.scheduler.now
        for tx in block.transactions:
            receipt = self.ledger.apply(tx, block.timestamp)
            self.sim.note_receipt(self.index, receipt)
        self.mempool.remove_committed(tx.uid for tx in block.transactions)
        self.sim.note_commit(self.index, block, now)

    # inbound -----------------------------------------------------------

    def deliver(self, message) -> None:
        if isinstance(message, ConsensusMessage):
            self.validator.handle(message)
        else:  # a Transaction broadcast by a client
            self._admit(message)

    def _admit(self, tx: Transaction) -> None:
        if self.sim.config.reject_invalid_at_mempool \
                and self.ledger.validate(tx) is not None:
            return
        self.mempool.submit(tx)


class _SilentNode(_Node):
    """Receives everything, sends nothing (network-muted), never acts."""

    def deliver(self, message) -> None:
        if not isinstance(message, ConsensusMessage):
            self._admit(message)
        # consensus messages are ignored entirely


class _EquivocatingNode(_Node):
    """Proposes two conflicting blocks to disjoint halves; withholds votes.

    Tracks the chain honestly (so later equivocations still carry a
    plausible parent digest) but its prepare/commit votes are dropped.
    """

    def _broadcast(self, msg: ConsensusMessage) -> None:
        if msg.type is MsgType.PRE_PREPARE:
            self.sim.note_proposal(msg)
            others = sorted(self.sim.network.node_ids())
            half = len(others) // 2
            alt_block = replace(msg.block, salt=msg.block.salt + 1)
            alt = ConsensusMessage(msg.type, msg.height, msg.round,
                                   block_digest(alt_block), msg.sender,
                                   alt_block)
            self.sim.note_proposal(alt)
            for recipient in others[:half]:
                self.sim.network.send(self.index, recipient, msg,
                                      self.sim.wire_size(msg))
            for recipient in others[half:]:
                self.sim.network.send(self.index, recipient, alt,
                                      self.sim.wire_size(alt))
            return
        # withhold prepare/commit votes


class Simulation:
    def __init__(self, config: ExperimentConfig, workload: list):
        config.validate()
        self.config = config
        self.workload = sorted(workload, key=lambda tx: (tx.issue_time, tx.uid))
        rng = random.Random(config.seed)
        self.scheduler = Scheduler()
        self.network = Network(
            self.scheduler,
            LinkModel(config.bandwidth, config.base_delay),
            jitter=config.jitter, rng=rng)
        self.genesis = blk.genesis_digest()
        behaviors = dict(config.byzantine)
        self.nodes: dict[int, _Node] = {}
        for i in range(config.validators):
            kind = behaviors.get(i)
            if kind == SILENT:
                node = _SilentNode(self, i)
                self.network.mute(i)
            elif kind == EQUIVOCATE:
                node = _EquivocatingNode(self, i)
            else:
                node = _Node(self, i)
            self.nodes[i] = node
            self.network.add_node(i, node.deliver)
        self.honest = [i for i in range(config.validators) if i not in behaviors]

        # bookkeeping
        self._proposal_times: dict[tuple[int, int], float] = {}
        self._commit_counts: dict[int, int] = {}
        self._tx_records: dict[int, tuple] = {}
        self._receipts: dict[int, object] = {}
        self._commit_latencies: list = []
        self._block_by_height: dict[int, Block] = {}
        self._commit_round: dict[int, int] = {}
        self._stuck: list = []
        self._period_of_height: dict[int, int] = {}
        self._periods_elapsed = 0

    # hooks from nodes --------------------------------------------------

    def wire_size(self, msg: ConsensusMessage) -> int:
        cfg = self.config
        if msg.type is MsgType.PRE_PREPARE:
            return cfg.preprepare_overhead + block_size(msg.block)
        if msg.type is MsgType.PREPARE:
            return cfg.prepare_size
        return cfg.commit_size

    def note_proposal(self, msg: ConsensusMessage) -> None:
        self._proposal_times.setdefault((msg.height, msg.round),
                                        self.scheduler.now)

    def note_commit(self, index: int, block: Block, now: float) -> None:
        self._commit_counts[index] = self._commit_counts.get(index, 0) + 1
        if index != self._reference_validator():
            return
        height = block.height
        self._block_by_height[height] = block
        # measure from the most recent proposal for this height (the
        # committing round's broadcast time)
        t0 = None
        for r in range(64):
            if (height, r) in self._proposal_times:
                t0 = self._proposal_times[(height, r)]
        if t0 is not None:
            self._commit_latencies.append((height, now - t0))
        for tx in block.transactions:
            self._tx_records.setdefault(tx.uid, (tx.issue_time, block.timestamp))

    def note_receipt(self, index: int, receipt) -> None:
        if index == self._reference_validator():
            self._receipts.setdefault(receipt.tx_uid, receipt)

    def note_stuck(self, tx: Transaction) -> None:
        if tx.uid not in self._stuck:
            self._stuck.append(tx.uid)

    def _reference_validator(self) -> int:
        return self.honest[0] if self.honest else 0

    # driving -----------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.config
        for tx in self.workload:
            self.scheduler.schedule_at(
                tx.issue_time,
                lambda t=tx: self.network.inject(t, t.size),
                tag=f"issue:{tx.uid}")

        period = 0          # index of the period whose block is next due
        boundary = cfg.period
        max_periods = cfg.periods + (cfg.max_drain_periods if cfg.drain else 0)
        while True:
            self.scheduler.run_until(boundary)
            self._periods_elapsed = period + 1
            if period + 1 >= max_periods:
                break
            if period + 1 >= cfg.periods and self._drained():
                break
            # start the next height on every idle validator; a validator
            # still mid-consensus skips this boundary (round changes run on)
            next_start = boundary - cfg.period  # block timestamp: period start
            for node in self.nodes.values():
                v = node.validator
                if not v.active and not isinstance(node, _SilentNode):
                    self._period_of_height[v.height] = period
                    v.start_height(next_start)
            period += 1
            boundary += cfg.period
        # settle in-flight consensus messages
        self.scheduler.run_until(boundary + cfg.period)
        return self._result()

    def _drained(self) -> bool:
        if not self.config.drain:
            return True
        ref = self.nodes[self._reference_validator()]
        return len(ref.mempool) == 0

    def kickoff(self) -> None:
        """Start the first height at time 0 (used by step-wise tests)."""
        for node in self.nodes.values():
            if not isinstance(node, _SilentNode):
                node.validator.start_height(0.0)

    # metrics -----------------------------------------------------------

    def _result(self) -> SimResult:
        cfg = self.config
        T = cfg.period
        periods = self._periods_elapsed
        gas_by_period = [0] * periods
        lb_by_period: list[list[float]] = [[] for _ in range(periods)]
        for tx in self.workload:
            p = min(int(tx.issue_time // T), periods - 1)
            gas_by_period[p] += tx.gas
        for uid, (issue_time, block_ts) in self._tx_records.items():
            lb = block_ts + T - issue_time
            p = min(int(issue_time // T), periods - 1)
            lb_by_period[p].append(lb)

        size_by_period = {}
        lc_by_period = {}
        chain_bytes = cfg.genesis_size
        chain_size_series = [cfg.genesis_size] * periods
        for height in sorted(self._block_by_height):
            block = self._block_by_height[height]
            p = int(round(block.timestamp / T))
            size_by_period[p] = block_size(block)
        for height, lat in self._commit_latencies:
            block = self._block_by_height.get(height)
            if block is not None:
                p = int(round(block.timestamp / T))
                lc_by_period[p] = lat
        running = cfg.genesis_size
        for p in range(periods):
            running += size_by_period.get(p, 0)
            chain_size_series[p] = running

        rows = []
        depth_series = self._mempool_depth_series(periods)
        for p in range(periods):
            lbs = lb_by_period[p]
            rows.append(MetricsRow(
                period_index=p,
                gas_rate=gas_by_period[p],
                mean_lb=sum(lbs) / len(lbs) if lbs else math.nan,
                max_lb=max(lbs) if lbs else math.nan,
                mean_lc=lc_by_period.get(p, math.nan),
                committed_block_size=size_by_period.get(p, 0),
                chain_size_bytes=chain_size_series[p],
                mempool_depth=depth_series[p]))

        digests = {i: self.nodes[i].validator.head_digest.hex()
                   for i in self.nodes}
        lengths = {i: len(self.nodes[i].validator.chain) for i in self.nodes}
        return SimResult(
            config=cfg, rows=rows, chain_digests=digests,
            chain_lengths=lengths, honest=list(self.honest),
            tx_records=dict(self._tx_records), receipts=dict(self._receipts),
            commit_latencies=list(self._commit_latencies),
            periods_elapsed=periods, stuck_transactions=list(self._stuck))

    def _mempool_depth_series(self, periods: int) -> list:
        # reconstructed after the fact: txs issued minus txs included,
        # evaluated at each period boundary
        issued = sorted(self.workload, key=lambda tx: tx.issue_time)
        included_at: dict[int, float] = {}
        T = self.config.period
        for uid, (_, block_ts) in self._tx_records.items():
            included_at[uid] = block_ts + T  # roughly the commit boundary
        series = []
        for p in range(periods):
            t = (p + 1) * T
            depth = sum(1 for tx in issued
                        if tx.issue_time <= t
                        and included_at.get(tx.uid, float("inf")) > t)
            series.append(depth)
        return series


def run_experiment(config: ExperimentConfig, workload: list) -> SimResult:
    """Build a simulation from a config and a workload and run it."""
    return Simulation(config, workload).run()
