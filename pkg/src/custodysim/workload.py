"""Synthetic workload generation for simulations and analytics.

Issue times are uniform within each block period (with a small end-of-
period margin so transactions can reach every mempool before the period
closes). All draws come from a seeded generator.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from . import analytics
from .ledger import (Address, EvidenceId, TRANSFER_GAS, Transaction,
                     create_tx, remove_tx, transfer_tx)


class InvalidSpec(Exception):
    pass


@dataclass(frozen=True)
class RateSpec:
    """Constant rate: a fixed number of transfers per period."""

    tx_per_period: int
    periods: int


@dataclass(frozen=True)
class RampSpec:
    """Gas rate climbing linearly from start to end over the run."""

    start_gas_per_period: int
    end_gas_per_period: int
    periods: int


def _uniform_times(rng: random.Random, period_index: int, period: float,
                   count: int, margin: float) -> list:
    start = period_index * period
    width = period * (1.0 - margin)
    return sorted(start + rng.random() * width for _ in range(count))


def _random_address(rng: random.Random) -> Address:
    return Address(rng.getrandbits(160).to_bytes(20, "big"))


def _random_id(rng: random.Random) -> EvidenceId:
    return EvidenceId(rng.getrandbits(256).to_bytes(32, "big"))


def constant_rate_workload(spec: RateSpec, seed: int, period: float,
                           margin: float = 0.01) -> list:
    """Transfer transactions at a fixed per-period count."""
    if spec.tx_per_period < 0 or spec.periods <= 0:
        raise InvalidSpec("counts must be non-negative, duration positive")
    rng = random.Random(seed)
    txs = []
    uid = 1
    for p in range(spec.periods):
        for t in _uniform_times(rng, p, period, spec.tx_per_period, margin):
            txs.append(transfer_tx(uid, _random_address(rng), _random_id(rng),
                                   _random_address(rng), t))
            uid += 1
    return txs


def ramp_workload(spec: RampSpec, seed: int, period: float,
                  margin: float = 0.01) -> list:
    """Transfers whose per-period gas tracks a linear ramp.

    The per-period count is the ramp target divided by the transfer gas
    cost, rounded down, so the issued gas rate never overshoots the
    target.
    """
    if spec.periods <= 0 or spec.start_gas_per_period < 0 \
            or spec.end_gas_per_period < spec.start_gas_per_period:
        raise InvalidSpec("ramp must be non-decreasing over a positive run")
    rng = random.Random(seed)
    txs = []
    uid = 1
    span = spec.end_gas_per_period - spec.start_gas_per_period
    for p in range(spec.periods):
        frac = p / (spec.periods - 1) if spec.periods > 1 else 1.0
        target = spec.start_gas_per_period + frac * span
        count = int(target // TRANSFER_GAS)
        for t in _uniform_times(rng, p, period, count, margin):
            txs.append(transfer_tx(uid, _random_address(rng), _random_id(rng),
                                   _random_address(rng), t))
            uid += 1
    return txs


def annual_multiset(n: int) -> list:
    """(type, count) multiset: n full-description creates, n removes,
    10n transfers."""
    if n < 0:
        raise InvalidSpec("count cannot be negative")
    return [(analytics.create_type(1024), n), (analytics.REMOVE, n),
            (analytics.TRANSFER, 10 * n)]


def annual_workload(n: int, seed: int, period: float,
                    duration: float = analytics.YEAR_SECONDS,
                    margin: float = 0.01) -> list:
    """Timestamped transactions realizing the annual multiset."""
    rng = random.Random(seed)
    txs: list[Transaction] = []
    uid = 1
    total_periods = int(duration // period)

    def issue(builder, count):
        nonlocal uid
        for _ in range(count):
            p = rng.randrange(total_periods)
            t = p * period + rng.random() * period * (1.0 - margin)
            txs.append(builder(uid, t))
            uid += 1

    issue(lambda u, t: create_tx(u, _random_address(rng), _random_id(rng),
                                 "x" * 1024, t), n)
    issue(lambda u, t: remove_tx(u, _random_address(rng), _random_id(rng), t), n)
    issue(lambda u, t: transfer_tx(u, _random_address(rng), _random_id(rng),
                                   _random_address(rng), t), 10 * n)
    txs.sort(key=lambda tx: (tx.issue_time, tx.uid))
    return txs
