"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from wdmsim.errors import ConfigError, InvariantViolation
from wdmsim.metrics import CellKey, Metrics, emit_table
from wdmsim.simkernel import Mode, SimConfig, Start, TimingConfig, run
from wdmsim.topology import BUILTINS, NetworkGraph, builtin_topology, load_topology
from wdmsim.workload import Arrival, BaselineConfig, Pairs, WorkloadSpec, generate

SWEEP_CASES = [(4, 1), (16, 4), (64, 16)]
SWEEP_PARALLELISM = [1, 4, 8, 16]
SWEEP_MODES = [Mode.BASELINE, Mode.PROPOSED_CONNECTION]


@dataclass(frozen=True)
class RunConfig:
    topology: str = "single-switch"
    W: int = 4
    control_count: int = 1
    parallelism: int = 1
    mode: Mode = Mode.PROPOSED_CONNECTION
    timing: TimingConfig = field(default_factory=TimingConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    seed: int = 0
    seeds: int = 1
    output: str = "table"
    dynamic_control: bool = False
    start: Start = Start.REPLY
    start_delay_us: float = 10.0

    def sim_config(self, seed: int | None = None) -> SimConfig:
        cfg = SimConfig(
            W=self.W, control_count=self.control_count, parallelism=self.parallelism,
            mode=self.mode, timing=self.timing, baseline=self.baseline,
            dynamic_control=self.dynamic_control, start=self.start,
            start_delay_us=self.start_delay_us,
            seed=self.seed if seed is None else seed,
        )
        cfg.check()
        return cfg

    def graph(self) -> NetworkGraph:
        if self.topology in BUILTINS:
            return builtin_topology(self.topology)
        if not Path(self.topology).exists():
            raise ConfigError(
                f"topology {self.topology!r} is neither a builtin ({', '.join(sorted(BUILTINS))}) "
                "nor an existing file"
            )
        return load_topology(self.topology)


def _run_cell(args: tuple[RunConfig, int]) -> Metrics:
    config, seed = args
    graph = config.graph()
    requests = generate(replace(config.workload, seed=seed), graph)
    return run(config.sim_config(seed), graph, requests)


def _run_cells(
    cells: list[tuple[CellKey, RunConfig]], seeds: list[int], jobs: int
) -> dict[CellKey, list[Metrics]]:
    tasks = [(cfg, s) for _, cfg in cells for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_run_cell, tasks))
    else:
        out = [_run_cell(t) for t in tasks]
    results: dict[CellKey, list[Metrics]] = {}
    for i, (key, _) in enumerate(cells):
        results[key] = out[i * len(seeds):(i + 1) * len(seeds)]
    return results


def _seeds(config: RunConfig) -> list[int]:
    return [config.seed + i for i in range(config.seeds)]


def _emit(results: dict[CellKey, list[Metrics]], config: RunConfig, csv_path: str | None) -> None:
    table, csv_text = emit_table(results)
    if csv_path:
        Path(csv_path).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text if config.output == "csv" else table)


def run_once(config: RunConfig, csv_path: str | None = None, jobs: int = 1) -> dict[CellKey, list[Metrics]]:
    config.sim_config()
    key = (config.W, config.control_count, config.parallelism, config.mode.value)
    results = _run_cells([(key, config)], _seeds(config), jobs)
    _emit(results, config, csv_path)
    return results


def sweep_cells(config: RunConfig) -> list[tuple[CellKey, RunConfig]]:
    cells = []
    for W, c in SWEEP_CASES:
        for p in SWEEP_PARALLELISM:
            for mode in SWEEP_MODES:
                cfg = replace(config, W=W, control_count=c, parallelism=p, mode=mode)
                cells.append(((W, c, p, mode.value), cfg))
    return cells


def run_paper_sweep(config: RunConfig, csv_path: str | None = None, jobs: int = 1) -> dict[CellKey, list[Metrics]]:
    cells = sweep_cells(config)
    for _, cfg in cells:
        cfg.sim_config()
    results = _run_cells(cells, _seeds(config), jobs)
    _emit(results, config, csv_path)
    return results


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wdmsim", description="Simulate control-wavelength WDM routing.")
    p.add_argument("--topology", default="single-switch",
                   help=f"builtin name ({', '.join(sorted(BUILTINS))}) or JSON topology file")
    p.add_argument("--wavelengths", type=int, default=4, help="wavelengths per link (W)")
    p.add_argument("--control", type=int, default=1, help="initial control wavelengths per link")
    p.add_argument("--parallelism", type=int, default=1, help="flit lanes per switch port")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.PROPOSED_CONNECTION.value)
    p.add_argument("--requests", type=int, default=100)
    p.add_argument("--flits", type=int, default=100, help="flits per request")
    p.add_argument("--pairs", choices=[x.value for x in Pairs], default=Pairs.SINGLE_SWITCH.value)
    p.add_argument("--arrival", choices=[x.value for x in Arrival], default=Arrival.ALL_AT_ZERO.value)
    p.add_argument("--rate", type=float, default=None, help="poisson arrival rate per us")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds per cell")
    p.add_argument("--prop-delay-us", type=float, default=1.0)
    p.add_argument("--proc-time-us", type=float, default=2.0)
    p.add_argument("--flit-cycle-us", type=float, default=1.0)
    p.add_argument("--oe-conversion-us", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=BaselineConfig.alpha,
                   help="baseline blocking scale: q = min(0.95, alpha/W)")
    p.add_argument("--dynamic-control", action="store_true")
    p.add_argument("--start", choices=[s.value for s in Start], default=Start.REPLY.value)
    p.add_argument("--start-delay-us", type=float, default=10.0)
    p.add_argument("--format", choices=["table", "csv"], default="table")
    p.add_argument("--csv", metavar="PATH", help="also write CSV to PATH")
    p.add_argument("--paper-sweep", action="store_true",
                   help="run the three (W, control) cases x parallelism {1,4,8,16} x both protocols")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for multi-cell runs")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    if ns.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    workload = WorkloadSpec(
        request_count=ns.requests, flits_per_request=ns.flits,
        arrival=Arrival(ns.arrival), rate_per_us=ns.rate, pairs=Pairs(ns.pairs), seed=ns.seed,
    )
    workload.check()
    return RunConfig(
        topology=ns.topology, W=ns.wavelengths, control_count=ns.control,
        parallelism=ns.parallelism, mode=Mode(ns.mode),
        timing=TimingConfig(ns.prop_delay_us, ns.proc_time_us, ns.flit_cycle_us, ns.oe_conversion_us),
        workload=workload, baseline=BaselineConfig(alpha=ns.alpha),
        seed=ns.seed, seeds=ns.seeds, output=ns.format,
        dynamic_control=ns.dynamic_control, start=Start(ns.start),
        start_delay_us=ns.start_delay_us,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error reported by the parser
        return int(exc.code or 0)
    try:
        config = config_from_args(ns)
        if ns.paper_sweep:
            run_paper_sweep(config, ns.csv, ns.jobs)
        else:
            run_once(config, ns.csv, ns.jobs)
    except InvariantViolation as exc:
        print(f"wdmsim: invariant violation: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"wdmsim: configuration error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
