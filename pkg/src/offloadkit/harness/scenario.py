"""Scenario files, the experiment matrix runner, CSV output and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from offloadkit.domain import ExecutionMode, LinkModel, NodeId, SearchTask
from offloadkit.harness.corpus import corpus_words, default_pattern, generate_corpus
from offloadkit.harness.testbed import simulated_testbed
from offloadkit.net.discovery import ParseError, Registry
from offloadkit.orchestrator import Clock, Orchestrator, OrchestratorConfig, RepeatSummary

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scenario", "mode", "corpus_words", "nodes", "shares_pct",
    "mean_s", "min_s", "max_s", "transfer_s_total", "compute_s_max", "timeouts",
]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ModeRun:
    """One mode, optionally restricted to a subset of the registry's offloadees."""

    mode: ExecutionMode
    nodes: tuple[NodeId, ...] | None = None

    @classmethod
    def from_json(cls, data: str | Mapping[str, Any]) -> ModeRun:
        if isinstance(data, str):
            return cls(ExecutionMode.parse(data))
        nodes = data.get("nodes")
        return cls(ExecutionMode.from_json(data), None if nodes is None else tuple(nodes))

    def to_json(self) -> dict[str, Any]:
        data = self.mode.to_json()
        if self.nodes is not None:
            data["nodes"] = list(self.nodes)
        return data


@dataclass(frozen=True)
class Scenario:
    name: str
    registry: Registry
    corpus: str | int
    modes: tuple[ModeRun, ...]
    cfg: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    cost_per_byte: float | None = None
    pattern: str | None = None
    seed: int = 1

    @property
    def words(self) -> int:
        return corpus_words(self.corpus)

    @property
    def effective_cfg(self) -> OrchestratorConfig:
        if self.cost_per_byte is None:
            return self.cfg
        return replace(self.cfg, cost_per_byte=self.cost_per_byte)

    def task(self) -> SearchTask:
        text = generate_corpus(self.words, self.seed)
        pattern = self.pattern.encode("ascii") if self.pattern else default_pattern(text, self.seed)
        return SearchTask(f"{self.name}-{self.seed}", text, pattern)

    @classmethod
    def from_json(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> Scenario:
        try:
            modes = tuple(ModeRun.from_json(m) for m in data["modes"])
            cost = data.get("cost_per_byte")
            scenario = cls(
                name=str(data["name"]),
                registry=_load_registry(data.get("registry", "testbed"), base_dir),
                corpus=data.get("corpus", "Small"),
                modes=modes,
                cfg=OrchestratorConfig.from_json(data.get("cfg", {})),
                cost_per_byte=None if cost is None else float(cost),
                pattern=data.get("pattern"),
                seed=int(data.get("seed", 1)),
            )
            corpus_words(scenario.corpus)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid scenario: {exc}") from exc
        if not scenario.modes:
            raise ScenarioError("scenario lists no modes")
        return scenario

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        return cls.from_json(data, path.parent)


def _load_registry(spec: Any, base_dir: Path | None) -> Registry:
    if spec == "testbed":
        return simulated_testbed()
    if isinstance(spec, Mapping) and "testbed" in spec:
        return simulated_testbed(offloadees=spec["testbed"])
    if isinstance(spec, list):
        return Registry.from_json(spec)
    if isinstance(spec, str):
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Registry.load(path)
    raise ParseError(f"cannot interpret registry {spec!r}")


def restrict(registry: Registry, nodes: Iterable[NodeId] | None) -> Registry:
    """The local node plus the listed offloadees, in registry order."""
    if nodes is None:
        return registry
    wanted = set(nodes)
    unknown = wanted - set(registry.entries)
    if unknown:
        raise ScenarioError(f"unknown nodes {sorted(unknown)}")
    return Registry({n: e for n, e in registry.entries.items() if e.local or n in wanted})


@dataclass(frozen=True)
class ScenarioRow:
    scenario: str
    mode: str
    corpus_words: int
    nodes: tuple[NodeId, ...]
    shares_pct: dict[NodeId, float]
    mean_s: float
    min_s: float
    max_s: float
    transfer_s_total: float
    compute_s_max: float
    timeouts: int

    def csv_fields(self) -> list[str]:
        return [
            self.scenario,
            self.mode,
            str(self.corpus_words),
            ";".join(self.nodes),
            ";".join(f"{node}={share!r}" for node, share in self.shares_pct.items()),
            repr(self.mean_s),
            repr(self.min_s),
            repr(self.max_s),
            repr(self.transfer_s_total),
            repr(self.compute_s_max),
            str(self.timeouts),
        ]


def summarize(scenario: Scenario, run: ModeRun, registry: Registry, summary: RepeatSummary) -> ScenarioRow:
    reports = summary.reports
    first = reports[0]
    transfer = [sum(r.transfer_out_s + r.transfer_back_s for r in rep.records) for rep in reports]
    compute = [max((r.compute_s for r in rep.records), default=0.0) for rep in reports]
    return ScenarioRow(
        scenario=scenario.name,
        mode=str(run.mode),
        corpus_words=scenario.words,
        nodes=tuple(registry.entries),
        shares_pct=dict(first.plan.shares) if first.plan else {},
        mean_s=summary.mean_s,
        min_s=summary.min_s,
        max_s=summary.max_s,
        transfer_s_total=sum(transfer) / len(transfer),
        compute_s_max=sum(compute) / len(compute),
        timeouts=sum(rep.timeouts for rep in reports),
    )


@dataclass
class ScenarioResult:
    rows: list[ScenarioRow]
    errors: list[tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.errors


def run_scenario(scenario: Scenario, task: SearchTask | None = None) -> ScenarioResult:
    """One row per mode; a failing mode is logged and skipped."""
    task = task or scenario.task()
    cfg = scenario.effective_cfg
    rows, errors = [], []
    for run in scenario.modes:
        try:
            registry = restrict(scenario.registry, run.nodes)
            summary = Orchestrator(registry, cfg).run_repeated(task, run.mode)
            rows.append(summarize(scenario, run, registry, summary))
        except Exception as exc:  # noqa: BLE001 - a row failure must not stop the matrix
            log.error("%s / %s failed: %s", scenario.name, run.mode, exc)
            errors.append((str(run.mode), f"{type(exc).__name__}: {exc}"))
    return ScenarioResult(rows, errors)


def write_csv(rows: Iterable[ScenarioRow], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())


def rows_to_csv(rows: Iterable[ScenarioRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# --- sweeps ---------------------------------------------------------------------

SWEEP_PARAMS = ("cost_per_byte", "bandwidth")
DEFAULT_SWEEP_MODES = (ExecutionMode.local_only(), ExecutionMode.full_offload("cloudlet"))


@dataclass(frozen=True)
class SweepPoint:
    value: float
    mean_s: dict[str, float]

    @property
    def winner(self) -> str:
        return min(self.mean_s, key=self.mean_s.__getitem__)


@dataclass(frozen=True)
class Crossover:
    below: float
    above: float
    winner_below: str
    winner_above: str

    @property
    def midpoint(self) -> float:
        return math.sqrt(self.below * self.above) if self.below > 0 else (self.below + self.above) / 2


@dataclass(frozen=True)
class SweepResult:
    param: str
    modes: tuple[str, ...]
    points: tuple[SweepPoint, ...]

    @property
    def crossovers(self) -> list[Crossover]:
        found = []
        for a, b in zip(self.points, self.points[1:]):
            if a.winner != b.winner:
                found.append(Crossover(a.value, b.value, a.winner, b.winner))
        return found

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.param, *self.modes, "winner"])
        for p in self.points:
            writer.writerow([repr(p.value), *(repr(p.mean_s[m]) for m in self.modes), p.winner])
        return buf.getvalue()


def sweep_values(start: float, stop: float, steps: int, log_scale: bool = True) -> list[float]:
    if steps < 2:
        raise ValueError("a sweep needs at least two steps")
    if log_scale:
        if start <= 0 or stop <= 0:
            raise ValueError("log-scale sweeps need positive bounds")
        ratio = (stop / start) ** (1 / (steps - 1))
        return [start * ratio**i for i in range(steps)]
    return [start + (stop - start) * i / (steps - 1) for i in range(steps)]


def _with_bandwidth(registry: Registry, bandwidth: float) -> Registry:
    entries = {}
    for node_id, entry in registry.entries.items():
        if entry.link is not None:
            entry = replace(entry, link=LinkModel(entry.link.latency_s, bandwidth))
        entries[node_id] = entry
    return Registry(entries)


def sweep(
    scenario: Scenario,
    param: str,
    values: Sequence[float],
    modes: Sequence[ExecutionMode] = DEFAULT_SWEEP_MODES,
) -> SweepResult:
    """Mean makespan of each mode at each parameter value."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    task = scenario.task()
    points = []
    for value in values:
        registry, cfg = scenario.registry, scenario.effective_cfg
        if param == "cost_per_byte":
            cfg = replace(cfg, cost_per_byte=value)
        else:
            registry = _with_bandwidth(registry, value)
        orchestrator = Orchestrator(registry, cfg)
        points.append(SweepPoint(value, {
            str(mode): orchestrator.run_repeated(task, mode).mean_s for mode in modes
        }))
    return SweepResult(param, tuple(str(m) for m in modes), tuple(points))


def simulated(scenario: Scenario) -> Scenario:
    return replace(scenario, cfg=replace(scenario.cfg, clock=Clock.SIMULATED))

