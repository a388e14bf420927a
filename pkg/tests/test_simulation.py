import math

import pytest

from custodysim.ledger import Address, EvidenceId, create_tx, transfer_tx
from custodysim.simulation import (EQUIVOCATE, SILENT, ConfigError,
                                   ExperimentConfig, run_experiment)
from custodysim.workload import RampSpec, RateSpec, constant_rate_workload, \
    ramp_workload

T = 300.0


def _cfg(**kw):
    defaults = dict(period=T, gas_limit=805020, validators=4, seed=0,
                    periods=10)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def _run(periods=10, tx_per_period=2, **kw):
    cfg = _cfg(periods=periods, **kw)
    wl = constant_rate_workload(RateSpec(tx_per_period, periods),
                                seed=cfg.seed, period=T)
    return run_experiment(cfg, wl)


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig().validate()

    @pytest.mark.parametrize("kw", [
        dict(period=0), dict(periods=0), dict(validators=0),
        dict(gas_limit=-1), dict(bandwidth=0),
        dict(byzantine=((9, SILENT),)),
        dict(byzantine=((1, "weird"),)),
        dict(validators=4, byzantine=((1, SILENT), (2, SILENT))),
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            _cfg(**kw).validate()

    def test_round_timeout_defaults_to_two_periods(self):
        assert _cfg().effective_round_timeout == 2 * T
        assert _cfg(round_timeout=10.0).effective_round_timeout == 10.0


class TestHonestRun:
    def test_all_validators_agree(self):
        result = _run()
        digests = set(result.chain_digests.values())
        assert len(digests) == 1
        assert set(result.chain_lengths.values()) == {10}

    def test_one_block_per_period(self):
        result = _run(periods=20)
        assert set(result.chain_lengths.values()) == {20}
        assert result.blocks_per_period >= 0.95

    def test_deterministic_per_seed(self):
        a, b = _run(seed=5), _run(seed=5)
        assert a.chain_digests == b.chain_digests
        assert [(r.period_index, r.gas_rate, r.mean_lb, r.mean_lc)
                for r in a.rows] == \
            [(r.period_index, r.gas_rate, r.mean_lb, r.mean_lc)
             for r in b.rows]

    def test_different_seed_different_chain(self):
        assert _run(seed=1).chain_digests != _run(seed=2).chain_digests

    def test_all_transactions_committed_with_receipts(self):
        result = _run(periods=8, tx_per_period=3)
        assert len(result.tx_records) == 24
        assert set(result.receipts) == set(result.tx_records)

    def test_inclusion_latency_bounds(self):
        result = _run(periods=30, tx_per_period=4)
        lbs = [r.mean_lb for r in result.rows if not math.isnan(r.mean_lb)]
        mean = sum(lbs) / len(lbs)
        # uniform issue times within the period: mean inclusion near T/2
        assert abs(mean - T / 2) < 0.1 * T
        assert all(r.max_lb <= T for r in result.rows
                   if not math.isnan(r.max_lb))

    def test_consensus_latency_matches_transport_model(self):
        result = _run(periods=10, tx_per_period=2, bandwidth=1e6)
        # block with 2 transfers: (256 + 2257 + 128 + 128) / 1e6
        lcs = {lat for _, lat in result.commit_latencies}
        assert any(abs(l - 2.769e-3) < 1e-9 for l in lcs)

    def test_chain_size_accumulates(self):
        result = _run(periods=6, tx_per_period=0)
        sizes = [r.chain_size_bytes for r in result.rows]
        assert sizes == sorted(sizes)
        assert sizes[0] >= 4096 + 1909


class TestOverload:
    def test_backlog_grows_past_gas_limit(self):
        # ramp crossing the gas limit: early periods keep up, late ones
        # accumulate a backlog and inclusion latency climbs
        cfg = _cfg(periods=40, drain=False)
        wl = ramp_workload(RampSpec(0, 2 * cfg.gas_limit, 40), seed=3,
                           period=T)
        result = run_experiment(cfg, wl)
        depths = [r.mempool_depth for r in result.rows]
        assert depths[-1] > depths[10]
        late = [r.mean_lb for r in result.rows[25:30]
                if not math.isnan(r.mean_lb)]
        early = [r.mean_lb for r in result.rows[5:10]
                 if not math.isnan(r.mean_lb)]
        assert min(late) > max(early)

    def test_drain_extends_run_until_mempool_empty(self):
        cfg = _cfg(periods=10, gas_limit=161004, drain=True)
        wl = constant_rate_workload(RateSpec(3, 10), seed=1, period=T)
        result = run_experiment(cfg, wl)
        assert result.periods_elapsed > 10
        assert set(result.tx_records) == {tx.uid for tx in wl}

    def test_oversized_transaction_flagged_stuck(self):
        cfg = _cfg(periods=3, gas_limit=100_000, drain=False)
        big = create_tx(1, Address.from_int(1), EvidenceId.from_int(1),
                        "x" * 1024, 10.0)  # 897367 gas can never fit
        result = run_experiment(cfg, [big])
        assert result.stuck_transactions == [1]
        assert 1 not in result.tx_records


class TestAdmissionPolicy:
    def test_invalid_transactions_rejected_at_mempool(self):
        bad = transfer_tx(1, Address.from_int(1), EvidenceId.from_int(9),
                          Address.from_int(2), 10.0)  # unknown evidence
        permissive = run_experiment(_cfg(periods=3), [bad])
        strict = run_experiment(
            _cfg(periods=3, reject_invalid_at_mempool=True), [bad])
        assert 1 in permissive.receipts and not permissive.receipts[1].succeeded
        assert 1 not in strict.tx_records


class TestByzantine:
    def test_silent_validator_safety_and_liveness(self):
        cfg = _cfg(periods=20, byzantine=((3, SILENT),),
                   round_timeout=0.5 * T)
        wl = constant_rate_workload(RateSpec(2, 20), seed=4, period=T)
        result = run_experiment(cfg, wl)
        honest = {result.chain_digests[i] for i in result.honest}
        assert len(honest) == 1
        assert result.blocks_per_period >= 0.9

    def test_equivocating_validator_safety_and_liveness(self):
        cfg = _cfg(periods=20, byzantine=((2, EQUIVOCATE),),
                   round_timeout=0.5 * T)
        wl = constant_rate_workload(RateSpec(2, 20), seed=4, period=T)
        result = run_experiment(cfg, wl)
        honest = {result.chain_digests[i] for i in result.honest}
        assert len(honest) == 1
        assert result.blocks_per_period >= 0.9

    def test_honest_replicas_apply_same_receipts(self):
        cfg = _cfg(periods=12, byzantine=((0, SILENT),),
                   round_timeout=0.5 * T)
        wl = constant_rate_workload(RateSpec(2, 12), seed=6, period=T)
        result = run_experiment(cfg, wl)
        assert set(result.receipts) == set(result.tx_records)
