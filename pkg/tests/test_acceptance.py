"""Acceptance suite: the nine release criteria, one printed verdict each.

Each test prints a single "[acceptance] criterion N ...: PASS|FAIL" line
outside pytest's capture so the verdicts are visible in any run.
"""
import csv
import math
import random
import time

import pytest

from custodysim import analytics, ledger
from custodysim.analytics import (ChainParams, MIB, YEAR_SECONDS,
                                  consensus_latency, header_overhead,
                                  max_block_size_closed_form,
                                  max_block_size_ukp, standard_catalog)
from custodysim.cli import main as cli_main
from custodysim.ledger import (Address, EvidenceNotFound, LedgerState,
                               NotCreator, NotOwner, TRANSFER_GAS, TxKind)
from custodysim.simulation import (EQUIVOCATE, SILENT, ExperimentConfig,
                                   run_experiment)
from custodysim.store import (EvidenceStore, Frontend, IntegrityViolation,
                              LocalLedgerClient)
from custodysim.workload import (RampSpec, RateSpec, constant_rate_workload,
                                 ramp_workload)

from conftest import random_ops
from naive_ledger import NaiveLedger

T = 300.0


def _report(capsys, num, label, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    with capsys.disabled():
        print(f"[acceptance] criterion {num} {label}: {verdict}{suffix}")
    assert ok, f"criterion {num} {label}: {detail}"


def test_criterion_1_annual_growth_table(tmp_path, capsys):
    out = tmp_path / "table2.csv"
    t0 = time.perf_counter()
    code = cli_main(["analyze", "table2", "--period", "300",
                     "--out", str(out)])
    elapsed = time.perf_counter() - t0
    rows = {r[0]: [float(x) for x in r[1:]]
            for r in list(csv.reader(out.open()))[1:]}
    expected = {
        "10000": (29.7, 221.08, 86.56),
        "100000": (297.0, 488.45, 39.18),
        "1000000": (2.9 * 1024, 3.09 * 1024, 6.05),
    }
    ok = code == 0 and elapsed < 1.0
    for n, (content, total, pct) in expected.items():
        got = rows[n]
        ok = ok and abs(got[0] - content) <= 0.005 * content
        ok = ok and abs(got[1] - total) <= 0.005 * total
        ok = ok and abs(got[2] - pct) <= 0.005 * pct
    _report(capsys, 1, "annual growth table", ok, f"{elapsed:.2f}s")


def test_criterion_2_header_overhead(capsys):
    t0 = time.perf_counter()
    overhead = header_overhead(YEAR_SECONDS, 300.0)
    elapsed = time.perf_counter() - t0
    ok = overhead == 200_674_080 \
        and abs(float(overhead) / MIB - 191.38) <= 1.0 \
        and elapsed < 1.0
    _report(capsys, 2, "header overhead at five-minute period", ok,
            f"{int(overhead)} bytes/year")


def test_criterion_3_knapsack_oracle(capsys):
    catalog = standard_catalog()
    rng = random.Random(0)
    values = sorted({rng.randrange(10 ** 7 + 1) for _ in range(1000)})
    values += [k * TRANSFER_GAS + r
               for k in range(11) for r in (0, TRANSFER_GAS - 1)]
    t0 = time.perf_counter()
    mismatches = sum(
        1 for g in values
        if max_block_size_closed_form(g, catalog) != max_block_size_ukp(g, catalog))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60.0
    _report(capsys, 3, "closed form vs knapsack solver", ok,
            f"{len(values)} gas limits, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_4_cost_model_anchors(capsys):
    anchors = [
        (TxKind.TRANSFER, 0, 80502, 174),
        (TxKind.REMOVE, 0, 236478, 142),
        (TxKind.CREATE, 0, 170207, 207),
        (TxKind.CREATE, 1024, 897367, 1233),
    ]
    ok = all(ledger.tx_gas(kind, l) == gas and ledger.tx_size(kind, l) == size
             for kind, l, gas, size in anchors)
    _report(capsys, 4, "transaction cost anchors", ok)


def test_criterion_5_inclusion_latency_regimes(capsys):
    t0 = time.perf_counter()
    ok = True
    details = []
    for gas_limit in (161004, 402510, 805020):
        cfg = ExperimentConfig(period=T, gas_limit=gas_limit, periods=200,
                               seed=gas_limit)
        wl = ramp_workload(RampSpec(0, 2 * gas_limit, 200), seed=1, period=T)
        result = run_experiment(cfg, wl)
        rows = result.rows[:200]
        cross = next((r.period_index for r in rows if r.gas_rate > gas_limit),
                     None)
        ok = ok and cross is not None

        lb_by_period = {}
        for uid, (issue, block_ts) in result.tx_records.items():
            lb_by_period.setdefault(int(issue // T), []).append(
                block_ts + T - issue)

        # (a) under the limit: mean near T/2, max bounded by T
        under = [lb for p in range(cross) for lb in lb_by_period.get(p, [])]
        mean_under = sum(under) / len(under)
        ok = ok and abs(mean_under - T / 2) <= 0.1 * (T / 2)
        ok = ok and max(under) <= T

        # (b) over the limit: 5-period windowed means strictly increase
        windows = []
        for start in range(cross, 200 - 4, 5):
            lbs = [lb for p in range(start, start + 5)
                   for lb in lb_by_period.get(p, [])]
            if lbs:
                windows.append(sum(lbs) / len(lbs))
        ok = ok and len(windows) >= 3
        ok = ok and all(b > a for a, b in zip(windows, windows[1:]))
        details.append(f"G={gas_limit}: cross@{cross} "
                       f"mean={mean_under:.1f}s windows={len(windows)}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    _report(capsys, 5, "inclusion latency under/over the gas limit", ok,
            "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_6_consensus_latency_model(capsys):
    cfg = ExperimentConfig(period=T, periods=5, bandwidth=1_000_000.0)
    result = run_experiment(cfg, [])  # empty blocks only
    measured = [lat for _, lat in result.commit_latencies]
    predicted = consensus_latency(1909, ChainParams(bandwidth=1_000_000.0))
    ok = bool(measured) and all(
        abs(lat - predicted) <= 0.05 * predicted for lat in measured)
    _report(capsys, 6, "consensus latency vs transport model", ok,
            f"measured={measured[0] * 1e3:.3f}ms predicted={predicted * 1e3:.3f}ms")


def test_criterion_7_safety_and_liveness_under_faults(capsys):
    t0 = time.perf_counter()
    rng = random.Random(42)
    disagreements = 0
    min_growth = math.inf
    for run in range(100):
        behavior = SILENT if run % 2 == 0 else EQUIVOCATE
        cfg = ExperimentConfig(
            period=T, periods=12, validators=4, seed=rng.getrandbits(32),
            byzantine=((rng.randrange(4), behavior),), round_timeout=0.5 * T)
        wl = constant_rate_workload(RateSpec(2, 12), seed=rng.getrandbits(32),
                                    period=T)
        result = run_experiment(cfg, wl)
        if len({result.chain_digests[i] for i in result.honest}) != 1:
            disagreements += 1
        min_growth = min(min_growth, result.blocks_per_period)
    elapsed = time.perf_counter() - t0
    ok = disagreements == 0 and min_growth >= 0.9 and elapsed < 60.0
    _report(capsys, 7, "safety and liveness with one faulty validator", ok,
            f"100 runs, {disagreements} disagreements, "
            f"min growth {min_growth:.3f} blocks/period, {elapsed:.1f}s")


def test_criterion_8_ledger_oracle_equivalence(capsys):
    rng = random.Random(7)
    mismatches = 0
    for _ in range(1000):
        ops = random_ops(rng, rng.randrange(1, 201))
        state, reference = LedgerState(), NaiveLedger()
        for tx in ops:
            receipt = state.apply(tx, tx.issue_time)
            expected = reference.apply(tx, tx.issue_time)
            got = None if receipt.succeeded else receipt.reason.value
            if got != expected:
                mismatches += 1
        snapshot = sorted(
            (e.id.value, e.creator.value, e.owner.value, e.description,
             tuple(a.value for a in e.taddr), tuple(e.ttime))
            for e in state.evidences.values())
        if snapshot != reference.snapshot():
            mismatches += 1
    ok = mismatches == 0
    _report(capsys, 8, "ledger vs naive reference", ok,
            f"1000 sequences, {mismatches} mismatches")


def test_criterion_9_end_to_end_custody_flow(tmp_path, capsys):
    alice, bob, carol = (Address.from_label(n)
                         for n in ("alice", "bob", "carol"))
    store = EvidenceStore(tmp_path / "store")
    frontend = Frontend(store, LocalLedgerClient(), seed=3)

    eid = frontend.submit_evidence(alice, b"disk image bytes", "laptop")
    frontend.transfer_evidence(alice, eid, bob)
    frontend.transfer_evidence(bob, eid, carol)
    ok = frontend.acquire_evidence(carol, eid) == b"disk image bytes"
    ok = ok and frontend.client.get_entry(eid).taddr == [alice, bob, carol]
    with pytest.raises(NotOwner):
        frontend.acquire_evidence(bob, eid)
    with pytest.raises(NotCreator):
        frontend.discard_evidence(carol, eid)
    frontend.discard_evidence(alice, eid)
    ok = ok and eid not in store
    with pytest.raises(EvidenceNotFound):
        frontend.client.get_entry(eid)

    # tamper detection on a second piece of evidence
    eid2 = frontend.submit_evidence(alice, b"pristine", "photo")
    (store.root / f"{eid2.hex}.bin").write_bytes(b"doctored")
    with pytest.raises(IntegrityViolation):
        frontend.acquire_evidence(alice, eid2)
    _report(capsys, 9, "end-to-end custody flow", ok)
