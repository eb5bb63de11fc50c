"""Command line entry point: ``offloadkit <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from offloadkit.decision import RttEstimate, collect_node_scores, partition_task, total_offloading_score
from offloadkit.domain import ExecutionMode, NodeClass
from offloadkit.harness.scenario import (
    DEFAULT_SWEEP_MODES,
    SWEEP_PARAMS,
    Scenario,
    ScenarioError,
    run_scenario,
    sweep,
    sweep_values,
    write_csv,
)
from offloadkit.harness.testbed import simulated_testbed
from offloadkit.net.discovery import BeaconListen, ParseError, Registry, discover
from offloadkit.net.worker import BEACON_PORT, WorkerConfig, worker_serve
from offloadkit.orchestrator import Clock, Orchestrator, OrchestratorConfig
from offloadkit.profiler import (
    StaticContext,
    WorkloadSpec,
    benchmark_score,
    local_runner,
    profile_node,
    run_fft,
    run_mandelbrot,
    simulated_runner,
)

EXIT_OK = 0
EXIT_SCENARIO_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _host_port(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    try:
        return host or "0.0.0.0", int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _load_registry(path: str | None) -> Registry:
    if path is None:
        return simulated_testbed()
    if not Path(path).is_file():
        raise UsageError(f"registry file not found: {path}")
    return Registry.load(path)


def _load_scenario(args: argparse.Namespace) -> Scenario:
    if not Path(args.scenario).is_file():
        raise UsageError(f"scenario file not found: {args.scenario}")
    scenario = Scenario.load(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.clock is not None:
        scenario = replace(scenario, cfg=replace(scenario.cfg, clock=Clock(args.clock)))
    return scenario


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_bench(args: argparse.Namespace) -> int:
    man_spec = WorkloadSpec.mandelbrot(args.size, args.size, args.max_iter, runs=args.runs)
    fft_spec = WorkloadSpec.fft(args.fft_size, runs=args.runs)
    man = run_mandelbrot(man_spec)
    fft = run_fft(fft_spec)
    print(json.dumps({
        "mandelbrot": man.to_json(),
        "fft": fft.to_json(),
        "benchmark_gflops": benchmark_score(man, fft),
    }, indent=2))
    return EXIT_OK


def cmd_worker(args: argparse.Namespace) -> int:
    host, port = args.listen
    node_class = NodeClass(args.node_class)
    mobile = node_class is NodeClass.MOBILE
    ctx = StaticContext(
        node_id=args.node_id,
        node_class=node_class,
        cpu_clock_ghz=args.clock_ghz,
        cpu_cores=args.cores,
        memory_gb=args.memory_gb,
        battery_level_pct=args.battery if mobile else None,
        charging=args.charging if mobile else None,
    )
    if args.benchmark_gflops is not None:
        profile = profile_node(ctx, simulated_runner(args.benchmark_gflops))
    else:
        profile = profile_node(ctx, local_runner, deadline_s=600)
    logging.info("profile: %s", json.dumps(profile.to_json()))
    worker_serve(WorkerConfig(profile=profile, host=host, port=port, beacon=args.beacon,
                              beacon_port=args.beacon_port, task_delay_s=args.task_delay))
    return EXIT_OK


def cmd_discover(args: argparse.Namespace) -> int:
    if args.registry:
        if not Path(args.registry).is_file():
            raise UsageError(f"registry file not found: {args.registry}")
        registry = discover(args.registry)
    else:
        registry = discover(BeaconListen(window_s=args.window, port=args.port))
    print(json.dumps(registry.to_json(), indent=2))
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    orchestrator = Orchestrator(registry, OrchestratorConfig(probe_bytes=args.probe_bytes))
    connected = []
    for node_id, endpoint in orchestrator.remotes.items():
        profile = endpoint.get_profile()
        rtt = (RttEstimate(node_id, 0.0) if args.zero_rtt
               else endpoint.estimate_rtt(args.probe_bytes, args.task_bytes))
        connected.append((profile, rtt))
    scores = collect_node_scores(orchestrator.local.get_profile(), connected)
    plan = partition_task(scores)
    if args.json:
        print(json.dumps({"scores": scores.to_json(), "plan": plan.to_json(),
                          "total_offloading_score": total_offloading_score(scores)}, indent=2))
        return EXIT_OK
    print(f"{'node':<16} {'score':>12} {'eligible':>9} {'share_pct':>10}")
    for node_id, s in scores.scores.items():
        share = plan.shares.get(node_id)
        share_text = "-" if share is None else f"{share:.3f}"
        print(f"{node_id:<16} {s.score:>12.4f} {str(s.eligible):>9} {share_text:>10}")
    print(f"total offloading score: {total_offloading_score(scores):.4f}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    result = run_scenario(scenario)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(result.rows, fh)
    else:
        write_csv(result.rows, sys.stdout)
    for mode, error in result.errors:
        print(f"error: {mode}: {error}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_SCENARIO_ERROR


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    values = sweep_values(args.start, args.stop, args.steps, log_scale=not args.linear)
    modes = [ExecutionMode.parse(m) for m in args.modes] if args.modes else None
    result = sweep(scenario, args.param, values, modes or DEFAULT_SWEEP_MODES)
    _emit(result.to_csv(), args.out)
    crossovers = result.crossovers
    if not crossovers:
        print(f"no crossover in [{args.start}, {args.stop}]", file=sys.stderr)
    for c in crossovers:
        print(f"crossover {args.param} in ({c.below!r}, {c.above!r}): "
              f"{c.winner_below} -> {c.winner_above}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offloadkit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run the benchmark workloads locally")
    p.add_argument("--size", type=int, default=800, help="Mandelbrot grid edge in pixels")
    p.add_argument("--max-iter", type=int, default=256)
    p.add_argument("--fft-size", type=int, default=1 << 20)
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("worker", help="start a worker daemon")
    p.add_argument("--listen", type=_host_port, default=("0.0.0.0", 47475), metavar="HOST:PORT")
    p.add_argument("--node-id", required=True)
    p.add_argument("--class", dest="node_class", choices=[c.value for c in NodeClass], default="Cloudlet")
    p.add_argument("--beacon", type=_on_off, default=False, metavar="on|off")
    p.add_argument("--beacon-port", type=int, default=BEACON_PORT)
    p.add_argument("--clock-ghz", type=float, default=2.0)
    p.add_argument("--cores", type=int, default=os.cpu_count() or 1)
    p.add_argument("--memory-gb", type=float, default=4.0)
    p.add_argument("--battery", type=float, default=100.0)
    p.add_argument("--charging", action="store_true")
    p.add_argument("--benchmark-gflops", type=float, help="skip benchmarking and report this score")
    p.add_argument("--task-delay", type=float, default=0.0, help="stall every task reply (fault injection)")
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("discover", help="print the registry")
    p.add_argument("--registry", help="static registry file; omit to listen for beacons")
    p.add_argument("--window", type=float, default=2.0, help="beacon listen window in seconds")
    p.add_argument("--port", type=int, default=BEACON_PORT)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("score", help="print node scores and the partition plan")
    p.add_argument("--registry", help="registry file; defaults to the simulated testbed")
    p.add_argument("--zero-rtt", action="store_true", help="score every node with zero network cost")
    p.add_argument("--task-bytes", type=int, default=0)
    p.add_argument("--probe-bytes", type=int, default=1024)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score)

    for name, func, help_text in (("run", cmd_run, "run one scenario file"),
                                  ("sweep", cmd_sweep, "sweep a parameter and report crossovers")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--clock", choices=[c.value for c in Clock])
        p.set_defaults(func=func)
    p.add_argument("--param", choices=SWEEP_PARAMS, default="cost_per_byte")
    p.add_argument("--start", type=float, default=10.0)
    p.add_argument("--stop", type=float, default=10_000.0)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--linear", action="store_true", help="linear instead of log spacing")
    p.add_argument("--modes", nargs="+", help="modes to compare, e.g. LocalOnly FullOffload:cloudlet")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ParseError, ValueError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_SCENARIO_ERROR


if __name__ == "__main__":
    sys.exit(main())
