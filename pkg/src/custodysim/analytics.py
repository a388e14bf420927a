"""Closed-form performance models and gas-limit planning.

Covers block inclusion and consensus latency, maximum block size (both
the knapsack oracle and its closed form), header overhead, chain growth
rate, and the lower/upper-bound procedure for choosing the block gas
limit.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import ledger
from .ledger import TxKind

MIB = 2 ** 20
GIB = 2 ** 30
YEAR_SECONDS = 365 * 24 * 3600


class AnalyticsError(Exception):
    pass


class CapacityTooLargeForExactDP(AnalyticsError):
    pass


class InvalidMaxSize(AnalyticsError):
    pass


class InvalidBounds(AnalyticsError):
    pass


@dataclass(frozen=True)
class ChainParams:
    period: float = 300.0            # block period T, seconds
    gas_limit: int = 805020          # block gas limit G
    header_size: int = 1909          # bytes
    bandwidth: float = 1_000_000.0   # slowest-link bytes/second
    prepare_size: int = 128
    commit_size: int = 128
    preprepare_overhead: int = 256

    def __post_init__(self):
        if self.period <= 0 or self.header_size <= 0 or self.bandwidth <= 0:
            raise ValueError("period, header size and bandwidth must be positive")
        if self.gas_limit < 0:
            raise ValueError("gas limit cannot be negative")


@dataclass(frozen=True)
class TxType:
    """One transaction type with its fixed size and gas cost."""

    name: str
    size: int
    gas: int

    def __post_init__(self):
        if self.size <= 0 or self.gas <= 0:
            raise ValueError("size and gas must be positive")


TRANSFER = TxType("transfer", ledger.TRANSFER_SIZE, ledger.TRANSFER_GAS)
REMOVE = TxType("remove", ledger.REMOVE_SIZE, ledger.REMOVE_GAS)


def create_type(length: int) -> TxType:
    return TxType(f"create({length})", ledger.create_size(length),
                  ledger.create_gas(length))


def standard_catalog() -> tuple:
    """All transaction types: transfer, remove, create(0)..create(1024)."""
    return (TRANSFER, REMOVE) + tuple(
        create_type(l) for l in range(ledger.MAX_DESCRIPTION_LEN + 1))


# -- latency -----------------------------------------------------------


def block_inclusion_latency(tx_issue_time: float, block_creation_time: float,
                            period: float) -> float:
    """Time from issue to the end of the including block's period."""
    return block_creation_time + period - tx_issue_time


def consensus_latency(blk_size: int, params: ChainParams) -> float:
    """Approximate commit time: total phase bytes over the slowest link."""
    total = (params.preprepare_overhead + blk_size
             + params.prepare_size + params.commit_size)
    return total / params.bandwidth


# -- maximum block size ------------------------------------------------


def max_block_size_closed_form(gas_limit: int, catalog: Sequence[TxType],
                               header_size: int = 1909) -> int:
    """Header plus as many copies of the dominant type as the gas allows."""
    dominant = dominance_check(catalog)
    if dominant is None:
        raise AnalyticsError(
            "no single dominant transaction type; use the knapsack solver")
    return header_size + (gas_limit // dominant.gas) * dominant.size


def ukp_max_value(capacity: int, items: Sequence[TxType]) -> int:
    """Exact unbounded-knapsack optimum (value = size, weight = gas).

    Runs the DP over the value axis: minimal gas for every achievable
    byte total, then the largest total whose gas fits. Equivalent to the
    classic capacity-axis table but tractable for gas limits in the
    millions.
    """
    if capacity < 0:
        raise ValueError("capacity cannot be negative")
    if not items:
        return 0
    best_ratio = max(it.size / it.gas for it in items)
    vmax = int(capacity * best_ratio) + max(it.size for it in items) + 1
    # the min-gas table is capacity-independent, so build it once per
    # (items, power-of-two length) and reuse it across queries
    min_gas = _min_gas_table(tuple(items), 1 << vmax.bit_length())
    achievable = np.nonzero(min_gas[: vmax + 1] <= capacity)[0]
    return int(achievable.max()) if achievable.size else 0


@functools.lru_cache(maxsize=8)
def _min_gas_table(items: tuple, length: int) -> np.ndarray:
    """min_gas[v] = least gas achieving exactly v bytes, for v < length."""
    sentinel = np.int64(2 ** 62)
    min_gas = np.full(length, sentinel, dtype=np.int64)
    min_gas[0] = 0
    for it in items:
        s, g = it.size, it.gas
        pad = (-length) % s
        table = np.concatenate([min_gas, np.full(pad, sentinel, dtype=np.int64)])
        table = table.reshape(-1, s)                  # row q holds values q*s+r
        q = np.arange(table.shape[0], dtype=np.int64)[:, None]
        shifted = table - q * g
        np.minimum.accumulate(shifted, axis=0, out=shifted)
        table = shifted + q * g
        min_gas = table.reshape(-1)[:length]
    return min_gas


def ukp_max_value_dense(capacity: int, items: Sequence[TxType]) -> int:
    """Classic O(n*G) capacity-axis table; independent cross-check."""
    best = [0] * (capacity + 1)
    for w in range(1, capacity + 1):
        b = best[w - 1]
        for it in items:
            if it.gas <= w:
                cand = best[w - it.gas] + it.size
                if cand > b:
                    b = cand
        best[w] = b
    return best[capacity] if capacity >= 0 else 0


def max_block_size_ukp(gas_limit: int, catalog: Sequence[TxType],
                       header_size: int = 1909,
                       capacity_cap: int = 100_000_000) -> int:
    """Maximum block size via the exact knapsack solver."""
    if gas_limit > capacity_cap:
        raise CapacityTooLargeForExactDP(
            f"gas limit {gas_limit} exceeds the exact-solver cap "
            f"{capacity_cap}; use the closed form")
    return header_size + ukp_max_value(gas_limit, catalog)


def dominance_check(catalog: Sequence[TxType]) -> Optional[TxType]:
    """Transaction type that dominates every other one, if any.

    K dominates J when ceil(size(J)/size(K)) copies of K fit in J's gas:
    any J in a block can then be swapped for copies of K without losing
    bytes or gaining gas, so optimal blocks contain only K.
    """
    if not catalog:
        raise ValueError("catalog cannot be empty")
    return _dominance_cached(tuple(catalog))


@functools.lru_cache(maxsize=64)
def _dominance_cached(catalog: tuple) -> Optional[TxType]:
    for k in catalog:
        if all(j is k or math.ceil(j.size / k.size) * k.gas <= j.gas
               for j in catalog):
            return k
    return None


def gas_limit_range_for_max_size(max_size: int, catalog: Sequence[TxType],
                                 header_size: int = 1909) -> tuple:
    """Gas-limit interval realizing a target maximum block size.

    The target must lie on the lattice header + k * size(dominant).
    """
    dominant = dominance_check(catalog)
    if dominant is None:
        raise AnalyticsError("no dominant transaction type")
    payload = max_size - header_size
    if payload < 0 or payload % dominant.size != 0:
        raise InvalidMaxSize(
            f"{max_size} is not header + k*{dominant.size} for integer k")
    k = payload // dominant.size
    return k * dominant.gas, k * dominant.gas + dominant.gas - 1


# -- chain growth ------------------------------------------------------


def header_overhead(t: float, period: float, header_size: int = 1909) -> Fraction:
    """Cumulative header bytes after running for t seconds (exact)."""
    if t < 0:
        raise ValueError("t cannot be negative")
    return Fraction(header_size) * Fraction(t) / Fraction(period)


def growth_rate(t1: float, t2: float, period: float,
                tx_multiset: Iterable[tuple], header_size: int = 1909) -> Fraction:
    """Chain bytes added over (t1, t2]: header term plus included tx sizes.

    tx_multiset is an iterable of (TxType, count) pairs for the
    transactions included in the interval.
    """
    if t2 < t1:
        raise ValueError("interval end precedes its start")
    content = sum(tx_type.size * count for tx_type, count in tx_multiset)
    return header_overhead(t2 - t1, period, header_size) + content


# -- gas-limit planning ------------------------------------------------


@dataclass(frozen=True)
class GasLimitPlan:
    max_rate_bound: int       # lower bound from the peak gas rate
    avg_rate_bound: int       # lower bound from the mean gas rate
    latency_bound: int        # upper bound from the consensus-latency target
    recommendation: int
    tag: str                  # "ideal" | "average-bounded" | "latency-tradeoff"


def plan_gas_limit(max_rate_bound: int, avg_rate_bound: int,
                   latency_bound: int) -> GasLimitPlan:
    """Pick a block gas limit from the three bounds.

    If the peak-rate lower bound fits under the latency upper bound, any
    value in between works (midpoint by default). Otherwise fall back to
    the average-rate lower bound; the limit is never set below it, since
    that makes transaction latency grow without bound.
    """
    if avg_rate_bound > max_rate_bound:
        raise InvalidBounds(
            f"average gas rate {avg_rate_bound} exceeds peak {max_rate_bound}")
    if max_rate_bound <= latency_bound:
        return GasLimitPlan(max_rate_bound, avg_rate_bound, latency_bound,
                            (max_rate_bound + latency_bound) // 2, "ideal")
    if avg_rate_bound <= latency_bound:
        return GasLimitPlan(max_rate_bound, avg_rate_bound, latency_bound,
                            latency_bound, "average-bounded")
    return GasLimitPlan(max_rate_bound, avg_rate_bound, latency_bound,
                        avg_rate_bound, "latency-tradeoff")


@dataclass(frozen=True)
class GasRateSummary:
    series: tuple   # gas per period, indexed by period
    peak: int
    mean: float


def gas_rate(transactions: Iterable, period: float) -> GasRateSummary:
    """Per-period gas consumption of a timestamped transaction multiset."""
    txs = list(transactions)
    if not txs:
        return GasRateSummary((), 0, 0.0)
    last = max(int(tx.issue_time // period) for tx in txs)
    series = [0] * (last + 1)
    for tx in txs:
        series[int(tx.issue_time // period)] += tx.gas
    return GasRateSummary(tuple(series), max(series),
                          sum(series) / len(series))


# -- report rows -------------------------------------------------------


@dataclass(frozen=True)
class GrowthReportRow:
    creations_per_year: int
    content_bytes: int
    total_bytes: Fraction
    overhead_pct: float

    @property
    def content_mib(self) -> float:
        return self.content_bytes / MIB

    @property
    def total_mib(self) -> float:
        return float(self.total_bytes) / MIB


def annual_growth_row(n: int, period: float = 300.0,
                      header_size: int = 1909) -> GrowthReportRow:
    """Growth over one year for n creations/removals and 10n transfers."""
    multiset = [(create_type(ledger.MAX_DESCRIPTION_LEN), n),
                (REMOVE, n), (TRANSFER, 10 * n)]
    content = sum(t.size * c for t, c in multiset)
    total = growth_rate(0, YEAR_SECONDS, period, multiset, header_size)
    overhead = header_overhead(YEAR_SECONDS, period, header_size)
    return GrowthReportRow(n, content, total,
                           float(overhead / total) * 100.0)


def annual_growth_table(period: float = 300.0,
                        workloads: Sequence[int] = (10_000, 100_000, 1_000_000),
                        header_size: int = 1909) -> list:
    return [annual_growth_row(n, period, header_size) for n in workloads]


def annual_header_overhead_sweep(
        periods_minutes: Sequence[int] = (1, 2, 5, 10, 15, 30, 60),
        header_size: int = 1909) -> list:
    """(period minutes, header bytes per year) for a sweep of block periods."""
    return [(m, header_overhead(YEAR_SECONDS, m * 60, header_size))
            for m in periods_minutes]
