"""Command-line interface: experiments, analytics reports, custody ops.

Exit codes: 0 on success, 1 on an operation error (ledger/store refusal,
failed check), 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from concurrent import futures
from pathlib import Path

from . import analytics, workload
from .analytics import MIB, ChainParams, standard_catalog
from .config import ConfigError, build_config, parse_byzantine, read_config_file
from .ledger import (Address, EvidenceId, LedgerError, LedgerState)
from .netsim import LinkModel
from .simulation import ExperimentConfig, run_experiment
from .store import (EvidenceStore, Frontend, LocalLedgerClient, StoreError)

METRICS_COLUMNS = ("period_index", "gas_rate", "mean_lb", "max_lb", "mean_lc",
                   "committed_block_size", "chain_size_bytes", "mempool_depth")

_METRICS_HELP = """\
metrics CSV columns:
  period_index          block-period index, starting at 0
  gas_rate              gas issued during the period
  mean_lb / max_lb      block inclusion latency (s) of txs issued in the period
  mean_lc               measured consensus latency (s) of the period's block
  committed_block_size  bytes of the block committed for the period
  chain_size_bytes      cumulative chain size incl. genesis
  mempool_depth         pending transactions at the period boundary
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="custodysim",
        description="Deterministic custody-ledger blockchain simulator "
                    "and performance analytics.")
    sub = parser.add_subparsers(dest="command", required=True)

    # sim -------------------------------------------------------------
    sim = sub.add_parser("sim", help="run simulations")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)

    run_p = sim_sub.add_parser(
        "run", help="run one experiment",
        epilog=_METRICS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_sim_flags(run_p)
    run_p.set_defaults(func=cmd_sim_run)

    sweep_p = sim_sub.add_parser(
        "sweep", help="run one experiment per value of a swept parameter",
        epilog=_METRICS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_sim_flags(sweep_p)
    sweep_p.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...",
                         help="parameter to sweep, e.g. gas-limit=161004,805020")
    sweep_p.add_argument("--parallel-sweep", action="store_true",
                         help="run the sweep configurations concurrently")
    sweep_p.set_defaults(func=cmd_sim_sweep)

    # analyze ---------------------------------------------------------
    ana = sub.add_parser("analyze", help="closed-form performance reports")
    ana_sub = ana.add_subparsers(dest="analyze_command", required=True)

    t2 = ana_sub.add_parser(
        "table2", help="annual growth for 10k/100k/1M yearly creations",
        description="CSV columns: workload_n, content_mib, total_mib, "
                    "overhead_pct (MiB units).")
    t2.add_argument("--period", type=float, default=300.0,
                    help="block period in seconds (default 300)")
    t2.add_argument("--out", type=Path, help="write CSV here instead of stdout")
    t2.set_defaults(func=cmd_analyze_table2)

    f3 = ana_sub.add_parser(
        "fig3", help="annual header overhead for a sweep of block periods",
        description="CSV columns: period_minutes, header_bytes_per_year, "
                    "header_mib_per_year.")
    f3.add_argument("--minutes", default="1,2,5,10,15,30,60",
                    help="comma-separated block periods in minutes")
    f3.add_argument("--out", type=Path, help="write CSV here instead of stdout")
    f3.set_defaults(func=cmd_analyze_fig3)

    plan = ana_sub.add_parser(
        "plan-gas-limit", help="choose a block gas limit from rate/latency bounds")
    plan.add_argument("--max-gas-rate", type=int, required=True,
                      help="peak per-period gas rate (lower bound)")
    plan.add_argument("--avg-gas-rate", type=int, required=True,
                      help="mean per-period gas rate")
    group = plan.add_mutually_exclusive_group(required=True)
    group.add_argument("--upper-bound", type=int,
                       help="gas-limit upper bound, given directly")
    group.add_argument("--max-consensus-latency", type=float,
                       help="derive the upper bound from this latency target (s)")
    plan.add_argument("--bandwidth", type=float, default=1_000_000.0,
                      help="slowest-link bandwidth, bytes/s (default 1e6)")
    plan.set_defaults(func=cmd_analyze_plan)

    ukp = ana_sub.add_parser(
        "ukp-check", help="verify the closed-form max block size against "
                          "the knapsack solver")
    ukp.add_argument("--samples", type=int, default=1000)
    ukp.add_argument("--max-gas", type=int, default=10_000_000)
    ukp.add_argument("--seed", type=int, default=0)
    ukp.set_defaults(func=cmd_analyze_ukp)

    # ledger ----------------------------------------------------------
    led = sub.add_parser("ledger", help="manual custody operations against "
                                        "a local store")
    led.add_argument("--store", type=Path, default=Path("custody-store"),
                     help="store directory (default ./custody-store)")
    led_sub = led.add_subparsers(dest="ledger_command", required=True)

    c = led_sub.add_parser("create", help="register a new evidence file")
    c.add_argument("--file", type=Path, required=True)
    c.add_argument("--desc", default="")
    c.add_argument("--as", dest="identity", required=True,
                   help="acting identity (label, hashed to an address)")
    c.set_defaults(func=cmd_ledger_create)

    t = led_sub.add_parser("transfer", help="hand evidence to a new owner")
    t.add_argument("id")
    t.add_argument("--to", required=True)
    t.add_argument("--as", dest="identity", required=True)
    t.set_defaults(func=cmd_ledger_transfer)

    r = led_sub.add_parser("remove", help="remove the ledger entry (creator only)")
    r.add_argument("id")
    r.add_argument("--as", dest="identity", required=True)
    r.set_defaults(func=cmd_ledger_remove)

    s = led_sub.add_parser("show", help="print the custody history of an entry")
    s.add_argument("id")
    s.set_defaults(func=cmd_ledger_show)

    a = led_sub.add_parser("acquire", help="fetch the blob (current owner only)")
    a.add_argument("id")
    a.add_argument("--as", dest="identity", required=True)
    a.add_argument("--out", type=Path, help="write the blob here")
    a.set_defaults(func=cmd_ledger_acquire)

    d = led_sub.add_parser("discard", help="remove entry and blob (creator only)")
    d.add_argument("id")
    d.add_argument("--as", dest="identity", required=True)
    d.set_defaults(func=cmd_ledger_discard)

    return parser


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="metrics CSV path")
    p.add_argument("--period", type=float, help="block period T in seconds")
    p.add_argument("--gas-limit", type=int)
    p.add_argument("--validators", type=int)
    p.add_argument("--byzantine", metavar="IDX:BEHAVIOR[,..]",
                   help="fault spec, behaviors: silent | equivocate")
    p.add_argument("--periods", type=int, help="number of issue periods")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--round-timeout", type=float)
    p.add_argument("--workload", default="rate:2",
                   help="'rate:N' transfers per period or 'ramp:START:END' "
                        "gas per period (default rate:2)")


# -- sim commands ------------------------------------------------------


def _config_from_args(args) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "period": args.period,
        "gas_limit": args.gas_limit,
        "validators": args.validators,
        "periods": args.periods,
        "bandwidth": args.bandwidth,
        "round_timeout": args.round_timeout,
        "byzantine": parse_byzantine(args.byzantine) if args.byzantine else None,
    }
    return build_config(file_values, overrides)


def _workload_from_args(args, config: ExperimentConfig) -> list:
    spec = args.workload
    try:
        if spec.startswith("rate:"):
            return workload.constant_rate_workload(
                workload.RateSpec(int(spec.split(":")[1]), config.periods),
                config.seed, config.period)
        if spec.startswith("ramp:"):
            _, start, end = spec.split(":")
            return workload.ramp_workload(
                workload.RampSpec(int(start), int(end), config.periods),
                config.seed, config.period)
    except (ValueError, workload.InvalidSpec) as err:
        raise ConfigError(f"bad workload spec {spec!r}: {err}") from err
    raise ConfigError(f"bad workload spec {spec!r}")


def _write_metrics(rows, path) -> None:
    out = sys.stdout if path is None else open(path, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([row.period_index, row.gas_rate,
                             f"{row.mean_lb:.6f}", f"{row.max_lb:.6f}",
                             f"{row.mean_lc:.9f}", row.committed_block_size,
                             row.chain_size_bytes, row.mempool_depth])
    finally:
        if path is not None:
            out.close()


def _run_one(config: ExperimentConfig, args):
    txs = _workload_from_args(args, config)
    return run_experiment(config, txs)


def cmd_sim_run(args) -> int:
    config = _config_from_args(args)
    result = _run_one(config, args)
    _write_metrics(result.rows, args.out)
    print(f"periods elapsed: {result.periods_elapsed}", file=sys.stderr)
    for idx in sorted(result.chain_digests):
        mark = "honest" if idx in result.honest else "byzantine"
        print(f"validator {idx} ({mark}): height {result.chain_lengths[idx]} "
              f"head {result.chain_digests[idx][:16]}", file=sys.stderr)
    return 0


def cmd_sim_sweep(args) -> int:
    base = _config_from_args(args)
    key, _, values = args.sweep.partition("=")
    key = key.replace("-", "_")
    if not values or not hasattr(base, key):
        raise ConfigError(f"bad sweep spec {args.sweep!r}")
    try:
        parsed = [int(v) if v.isdigit() else float(v) for v in values.split(",")]
    except ValueError as err:
        raise ConfigError(f"bad sweep values in {args.sweep!r}") from err
    configs = [ExperimentConfig(**{**base.__dict__, key: v}) for v in parsed]
    for cfg in configs:
        cfg.validate()

    if args.parallel_sweep:
        with futures.ProcessPoolExecutor() as pool:
            results = list(pool.map(_sweep_task,
                                    [(cfg, args.workload) for cfg in configs]))
    else:
        results = [_sweep_task((cfg, args.workload)) for cfg in configs]

    for value, result in zip(parsed, results):
        if args.out:
            path = args.out.with_name(f"{args.out.stem}_{key}_{value}{args.out.suffix}")
            _write_metrics(result.rows, path)
            where = str(path)
        else:
            where = "-"
        print(f"{key}={value}: periods={result.periods_elapsed} "
              f"min_height={min(result.chain_lengths[i] for i in result.honest)} "
              f"metrics={where}")
    return 0


def _sweep_task(item):
    cfg, spec = item
    ns = argparse.Namespace(workload=spec)
    txs = _workload_from_args(ns, cfg)
    return run_experiment(cfg, txs)


# -- analyze commands --------------------------------------------------


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_analyze_table2(args) -> int:
    rows = analytics.annual_growth_table(period=args.period)
    out = _open_out(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(["workload_n", "content_mib", "total_mib", "overhead_pct"])
        for row in rows:
            writer.writerow([row.creations_per_year, f"{row.content_mib:.2f}",
                             f"{row.total_mib:.2f}", f"{row.overhead_pct:.2f}"])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_analyze_fig3(args) -> int:
    try:
        minutes = [int(m) for m in args.minutes.split(",")]
    except ValueError as err:
        raise ConfigError(f"bad minutes list {args.minutes!r}") from err
    out = _open_out(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(["period_minutes", "header_bytes_per_year",
                         "header_mib_per_year"])
        for m, overhead in analytics.annual_header_overhead_sweep(minutes):
            writer.writerow([m, int(overhead), f"{float(overhead) / MIB:.2f}"])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_analyze_plan(args) -> int:
    if args.upper_bound is not None:
        upper = args.upper_bound
    else:
        params = ChainParams(bandwidth=args.bandwidth)
        budget = args.max_consensus_latency * args.bandwidth
        max_size = int(budget) - params.preprepare_overhead \
            - params.prepare_size - params.commit_size
        payload = max(0, max_size - params.header_size)
        k = payload // analytics.TRANSFER.size
        lattice_size = params.header_size + k * analytics.TRANSFER.size
        _, upper = analytics.gas_limit_range_for_max_size(
            lattice_size, standard_catalog())
    plan = analytics.plan_gas_limit(args.max_gas_rate, args.avg_gas_rate, upper)
    print(f"lower bound (peak rate):    {plan.max_rate_bound}")
    print(f"lower bound (average rate): {plan.avg_rate_bound}")
    print(f"upper bound (latency):      {plan.latency_bound}")
    print(f"recommended gas limit:      {plan.recommendation}  [{plan.tag}]")
    return 0


def cmd_analyze_ukp(args) -> int:
    catalog = standard_catalog()
    rng = random.Random(args.seed)
    transfer_gas = analytics.TRANSFER.gas
    values = sorted({rng.randrange(args.max_gas + 1) for _ in range(args.samples)})
    values += [k * transfer_gas + r for k in range(11) for r in (0, transfer_gas - 1)]
    mismatches = 0
    for g in values:
        closed = analytics.max_block_size_closed_form(g, catalog)
        exact = analytics.max_block_size_ukp(g, catalog)
        if closed != exact:
            mismatches += 1
            print(f"MISMATCH at G={g}: closed={closed} dp={exact}")
    print(f"checked {len(values)} gas limits, {mismatches} mismatches")
    return 0 if mismatches == 0 else 1


# -- ledger commands ---------------------------------------------------


def _ledger_context(store_root: Path):
    store = EvidenceStore(store_root)
    state_path = store_root / "ledger.json"
    client = LocalLedgerClient()
    if state_path.exists():
        _load_ledger(client, state_path)
    frontend = Frontend(store, client, seed=random.SystemRandom().getrandbits(32))
    return store, client, frontend, state_path


def _load_ledger(client: LocalLedgerClient, path: Path) -> None:
    data = json.loads(path.read_text())
    client._time = data["clock"]
    client._uid = data["uid"]
    state = LedgerState()
    for raw in data["entries"]:
        eid = EvidenceId.from_hex(raw["id"])
        state.create_evidence(Address.from_hex(raw["creator"]), eid,
                              raw["description"], raw["ttime"][0])
        entry = state.evidences[eid]
        entry.owner = Address.from_hex(raw["owner"])
        entry.taddr = [Address.from_hex(a) for a in raw["taddr"]]
        entry.ttime = list(raw["ttime"])
    client.state = state


def _save_ledger(client: LocalLedgerClient, path: Path) -> None:
    entries = []
    for entry in client.state.evidences.values():
        entries.append({
            "id": entry.id.hex,
            "creator": entry.creator.hex,
            "owner": entry.owner.hex,
            "description": entry.description,
            "taddr": [a.hex for a in entry.taddr],
            "ttime": entry.ttime,
        })
    path.write_text(json.dumps(
        {"clock": client.now(), "uid": client._uid, "entries": entries},
        indent=2, sort_keys=True))


def _identity(label: str) -> Address:
    if len(label) == 40:
        try:
            return Address.from_hex(label)
        except ValueError:
            pass
    return Address.from_label(label)


def cmd_ledger_create(args) -> int:
    _, client, frontend, state_path = _ledger_context(args.store)
    blob = args.file.read_bytes()
    evidence_id = frontend.submit_evidence(_identity(args.identity), blob,
                                           args.desc)
    _save_ledger(client, state_path)
    print(evidence_id.hex)
    return 0


def cmd_ledger_transfer(args) -> int:
    _, client, frontend, state_path = _ledger_context(args.store)
    frontend.transfer_evidence(_identity(args.identity),
                               EvidenceId.from_hex(args.id),
                               _identity(args.to))
    _save_ledger(client, state_path)
    print("transferred")
    return 0


def cmd_ledger_remove(args) -> int:
    _, client, frontend, state_path = _ledger_context(args.store)
    frontend.discard_evidence(_identity(args.identity),
                              EvidenceId.from_hex(args.id))
    _save_ledger(client, state_path)
    print("removed")
    return 0


def cmd_ledger_show(args) -> int:
    _, client, _, _ = _ledger_context(args.store)
    entry = client.get_entry(EvidenceId.from_hex(args.id))
    print(f"id:          {entry.id.hex}")
    print(f"description: {entry.description}")
    print(f"creator:     {entry.creator.hex}")
    print(f"owner:       {entry.owner.hex}")
    print("custody history:")
    for addr, when in zip(entry.taddr, entry.ttime):
        print(f"  {addr.hex} @ {when}")
    return 0


def cmd_ledger_acquire(args) -> int:
    _, _, frontend, _ = _ledger_context(args.store)
    blob = frontend.acquire_evidence(_identity(args.identity),
                                     EvidenceId.from_hex(args.id))
    if args.out:
        args.out.write_bytes(blob)
        print(f"wrote {len(blob)} bytes to {args.out}")
    else:
        sys.stdout.buffer.write(blob)
    return 0


def cmd_ledger_discard(args) -> int:
    return cmd_ledger_remove(args)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (LedgerError, StoreError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
