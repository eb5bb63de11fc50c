"""End-to-end execution of a search task in any offloading mode."""

from __future__ import annotations

import logging
import statistics
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from offloadkit.decision import (
    NodeScores,
    ScoreWeights,
    collect_node_scores,
    equal_plan,
    partition_task,
)
from offloadkit.domain import (
    ExecutionMode,
    ExecutionReport,
    ModeKind,
    NodeId,
    NodeRecord,
    PartitionPlan,
    SearchTask,
    SubTask,
)
from offloadkit.net.discovery import Registry
from offloadkit.net.endpoints import (
    Endpoint,
    LocalEndpoint,
    RemoteEndpoint,
    SimulatedEndpoint,
    SubtaskOutcome,
)
from offloadkit.net.link import DEFAULT_PROBE_BYTES
from offloadkit.workload import merge_results, split_text

log = logging.getLogger(__name__)


class Clock(str, Enum):
    WALL = "wall"
    SIMULATED = "sim"


class TargetUnknown(ValueError):
    pass


@dataclass(frozen=True)
class OrchestratorConfig:
    timeout_s: float = 10.0
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    clock: Clock = Clock.WALL
    repetitions: int = 1
    cost_per_byte: float = 100.0
    probe_bytes: int = DEFAULT_PROBE_BYTES

    def __post_init__(self) -> None:
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.cost_per_byte < 0:
            raise ValueError("cost_per_byte must be >= 0")

    def to_json(self) -> dict[str, Any]:
        return {
            "timeout_s": self.timeout_s,
            "weights": self.weights.to_json(),
            "clock": self.clock.value,
            "repetitions": self.repetitions,
            "cost_per_byte": self.cost_per_byte,
            "probe_bytes": self.probe_bytes,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> OrchestratorConfig:
        return cls(
            timeout_s=float(data.get("timeout_s", 10.0)),
            weights=ScoreWeights.from_json(data.get("weights", {})),
            clock=Clock(data.get("clock", Clock.WALL.value)),
            repetitions=int(data.get("repetitions", 1)),
            cost_per_byte=float(data.get("cost_per_byte", 100.0)),
            probe_bytes=int(data.get("probe_bytes", DEFAULT_PROBE_BYTES)),
        )


@dataclass(frozen=True)
class RepeatSummary:
    mean_s: float
    min_s: float
    max_s: float
    reports: tuple[ExecutionReport, ...]


def build_endpoints(registry: Registry, cfg: OrchestratorConfig) -> tuple[LocalEndpoint, dict[NodeId, Endpoint]]:
    """Local endpoint plus one endpoint per offloadee, in registry order."""
    local_id = registry.local_id
    if local_id is None:
        raise ValueError("registry has no local node")
    local_entry = registry[local_id]
    if local_entry.profile is None:
        raise ValueError(f"local node {local_id!r} needs a profile")
    remotes: dict[NodeId, Endpoint] = {}
    for entry in registry.offloadees():
        if entry.simulated:
            remotes[entry.node_id] = SimulatedEndpoint(entry.profile, entry.link, cfg.cost_per_byte, entry.stall_s)
        else:
            host, port = entry.host_port()
            remotes[entry.node_id] = RemoteEndpoint(entry.node_id, entry.node_class, host, port)
    simulated = cfg.clock is Clock.SIMULATED
    if simulated:
        real = [node for node, ep in remotes.items() if not ep.simulated]
        if real:
            raise ValueError(f"simulated clock needs simulated nodes only; real: {real}")
    return LocalEndpoint(local_entry.profile, cfg.cost_per_byte, simulated=simulated), remotes


class _ResultBoard:
    """Exactly-once slot per chunk; offers after ``close`` are refused."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._slots: dict[int, SubtaskOutcome] = {}
        self._closed = False

    def offer(self, index: int, outcome: SubtaskOutcome) -> bool:
        with self._lock:
            if self._closed or index in self._slots:
                return False
            self._slots[index] = outcome
            return True

    def close(self) -> dict[int, SubtaskOutcome]:
        with self._lock:
            self._closed = True
            return dict(self._slots)


class Orchestrator:
    """Runs tasks against one registry.

    ``discarded_replies`` collects ``(task_id, chunk_index)`` for every
    remote reply that arrived after its subtask had been reprocessed.
    """

    def __init__(self, registry: Registry, cfg: OrchestratorConfig = OrchestratorConfig()):
        self.registry = registry
        self.cfg = cfg
        self.local, self.remotes = build_endpoints(registry, cfg)
        self.discarded_replies: list[tuple[str, int]] = []
        self.last_scores: NodeScores | None = None

    # --- planning -----------------------------------------------------------

    def _target(self, mode: ExecutionMode) -> NodeId:
        if mode.target not in self.remotes:
            raise TargetUnknown(f"{mode.target!r} is not an offloadee in the registry")
        return mode.target

    def score(self, candidates: list[NodeId], task_bytes: int) -> NodeScores:
        connected = []
        for node_id in candidates:
            endpoint = self.remotes[node_id]
            try:
                connected.append((endpoint.get_profile(),
                                  endpoint.estimate_rtt(self.cfg.probe_bytes, task_bytes)))
            except (ConnectionError, TimeoutError, OSError) as exc:
                log.warning("leaving %s out of scoring: %s", node_id, exc)
        return collect_node_scores(self.local.get_profile(), connected, self.cfg.weights)

    def plan(self, task: SearchTask, mode: ExecutionMode) -> PartitionPlan:
        local_id = self.local.node_id
        kind = mode.kind
        if kind is ModeKind.LOCAL_ONLY:
            return PartitionPlan({local_id: 100.0})
        if kind is ModeKind.FULL_OFFLOAD:
            return PartitionPlan({self._target(mode): 100.0})
        if kind is ModeKind.PARTIAL_EQUAL:
            return equal_plan([local_id, *self.remotes])
        candidates = [self._target(mode)] if kind is ModeKind.PARTIAL_ENGINE_SINGLE_SITE else list(self.remotes)
        self.last_scores = self.score(candidates, len(task.text))
        return partition_task(self.last_scores)

    # --- execution ----------------------------------------------------------

    def execute(self, task: SearchTask, mode: ExecutionMode) -> ExecutionReport:
        plan = self.plan(task, mode)
        subtasks = split_text(task.text, plan, len(task.pattern), task_id=task.task_id, pattern=task.pattern)
        owners = plan.nodes
        if self.cfg.clock is Clock.SIMULATED:
            records, outcomes, makespan = self._run_simulated(subtasks, owners)
        else:
            records, outcomes, makespan = self._run_wall(subtasks, owners)
        merged = merge_results((sub, outcomes[sub.chunk_index].matches) for sub in subtasks)
        return ExecutionReport(mode, tuple(records), makespan, plan, merged.offsets)

    def _endpoint(self, node_id: NodeId) -> Endpoint:
        return self.local if node_id == self.local.node_id else self.remotes[node_id]

    def _run_simulated(self, subtasks: list[SubTask], owners: list[NodeId]):
        timeout = self.cfg.timeout_s
        outcomes: dict[int, SubtaskOutcome] = {}
        records: dict[int, NodeRecord] = {}
        finish: list[float] = []
        local_busy_until = 0.0
        late: list[tuple[SubTask, NodeId, SubtaskOutcome]] = []
        for sub, node_id in zip(subtasks, owners):
            outcome = self._endpoint(node_id).run_subtask(sub)
            if node_id == self.local.node_id:
                local_busy_until = outcome.elapsed_s
            elif outcome.elapsed_s > timeout:
                late.append((sub, node_id, outcome))
                continue
            outcomes[sub.chunk_index] = outcome
            records[sub.chunk_index] = _record(node_id, sub, outcome)
            finish.append(outcome.elapsed_s)

        # reprocessing starts at the deadline, once the local share is done
        clock = max([timeout, local_busy_until]) if late else 0.0
        for sub, node_id, outcome in late:
            self.discarded_replies.append((sub.task_id, sub.chunk_index))
            redo = self.local.run_subtask(sub)
            clock += redo.compute_s
            outcomes[sub.chunk_index] = redo
            records[sub.chunk_index] = NodeRecord(
                node_id=node_id,
                bytes_sent=outcome.bytes_sent,
                transfer_out_s=min(outcome.transfer_out_s, timeout),
                compute_s=redo.compute_s,
                timed_out=True,
                reprocessed_locally=True,
                chunk_bytes=len(sub.chunk),
            )
            finish.append(clock)
        ordered = [records[sub.chunk_index] for sub in subtasks]
        return ordered, outcomes, max(finish, default=0.0)

    def _run_wall(self, subtasks: list[SubTask], owners: list[NodeId]):
        timeout = self.cfg.timeout_s
        # a stalled worker can still reply within this window; that reply is discarded
        socket_timeout = timeout + max(1.0, timeout)
        board = _ResultBoard()
        records: dict[int, NodeRecord] = {}
        local_id = self.local.node_id
        pool = ThreadPoolExecutor(max_workers=max(1, len(subtasks)), thread_name_prefix="subtask")
        start = time.perf_counter()
        try:
            futures: dict[int, Future] = {}
            for sub, node_id in zip(subtasks, owners):
                endpoint = self._endpoint(node_id)
                futures[sub.chunk_index] = pool.submit(endpoint.run_subtask, sub, socket_timeout)
            remote = [futures[s.chunk_index] for s, n in zip(subtasks, owners) if n != local_id]
            wait(remote, timeout=max(0.0, start + timeout - time.perf_counter()))

            redo: list[tuple[SubTask, NodeId, bool]] = []
            for sub, node_id in zip(subtasks, owners):
                fut = futures[sub.chunk_index]
                if node_id == local_id:
                    outcome = fut.result()
                elif not fut.done():
                    redo.append((sub, node_id, True))
                    fut.add_done_callback(self._late_reply_handler(board, sub))
                    continue
                elif fut.exception() is not None:
                    log.warning("%s failed chunk %d: %s", node_id, sub.chunk_index, fut.exception())
                    redo.append((sub, node_id, False))
                    continue
                else:
                    outcome = fut.result()
                board.offer(sub.chunk_index, outcome)
                records[sub.chunk_index] = _record(node_id, sub, outcome)

            for sub, node_id, timed_out in redo:
                outcome = self.local.run_subtask(sub)
                board.offer(sub.chunk_index, outcome)
                records[sub.chunk_index] = NodeRecord(
                    node_id=node_id,
                    compute_s=outcome.compute_s,
                    timed_out=timed_out,
                    reprocessed_locally=True,
                    chunk_bytes=len(sub.chunk),
                )
            outcomes = board.close()
            makespan = time.perf_counter() - start
        finally:
            pool.shutdown(wait=False)
        return [records[sub.chunk_index] for sub in subtasks], outcomes, makespan

    def _late_reply_handler(self, board: _ResultBoard, sub: SubTask):
        def on_done(fut: Future) -> None:
            if fut.cancelled() or fut.exception() is not None:
                return
            if not board.offer(sub.chunk_index, fut.result()):
                log.info("discarding late reply for %s chunk %d", sub.task_id, sub.chunk_index)
                self.discarded_replies.append((sub.task_id, sub.chunk_index))

        return on_done

    def run_repeated(self, task: SearchTask, mode: ExecutionMode) -> RepeatSummary:
        reports = tuple(self.execute(task, mode) for _ in range(self.cfg.repetitions))
        times = [r.total_makespan_s for r in reports]
        low, high = min(times), max(times)
        # identical runs must report mean == min == max despite rounding in the sum
        mean = low if low == high else statistics.fmean(times)
        return RepeatSummary(mean, low, high, reports)


def _record(node_id: NodeId, sub: SubTask, outcome: SubtaskOutcome) -> NodeRecord:
    return NodeRecord(
        node_id=node_id,
        bytes_sent=outcome.bytes_sent,
        bytes_received=outcome.bytes_received,
        transfer_out_s=outcome.transfer_out_s,
        compute_s=outcome.compute_s,
        transfer_back_s=outcome.transfer_back_s,
        chunk_bytes=len(sub.chunk),
    )


def execute(task: SearchTask, mode: ExecutionMode, registry: Registry,
            cfg: OrchestratorConfig = OrchestratorConfig()) -> ExecutionReport:
    return Orchestrator(registry, cfg).execute(task, mode)


def run_repeated(task: SearchTask, mode: ExecutionMode, registry: Registry,
                 cfg: OrchestratorConfig = OrchestratorConfig()) -> RepeatSummary:
    return Orchestrator(registry, cfg).run_repeated(task, mode)
