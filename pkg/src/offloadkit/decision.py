"""Offloading scores, score collection and proportional task partitioning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from offloadkit.domain import (
    NodeClass,
    NodeId,
    NodeProfile,
    OffloadingScore,
    PartitionPlan,
    validate_profile,
)

# stand-in score for a coordinating local node whose own score is <= 0
LOCAL_SCORE_FLOOR = 0.01


class ProfileMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScoreWeights:
    w_b: float = 1.0
    w_p: float = 1.0
    w_m: float = 1.0
    w_rtt: float = 1.0
    w_batt: float = 1.0

    def __post_init__(self) -> None:
        for name in ("w_b", "w_p", "w_m", "w_rtt", "w_batt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def to_json(self) -> dict[str, float]:
        return {"w_b": self.w_b, "w_p": self.w_p, "w_m": self.w_m, "w_rtt": self.w_rtt, "w_batt": self.w_batt}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> ScoreWeights:
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class RttEstimate:
    """Network cost of reaching a node: probe round trip plus payload transfer."""

    node_id: NodeId
    rtt_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rtt_s) and self.rtt_s >= 0):
            raise ValueError(f"rtt_s must be finite and >= 0, got {self.rtt_s!r}")


@dataclass(frozen=True)
class NodeScores:
    self_id: NodeId
    scores: dict[NodeId, OffloadingScore] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.self_id not in self.scores:
            raise ValueError(f"scores must include the local node {self.self_id!r}")

    @property
    def local(self) -> OffloadingScore:
        return self.scores[self.self_id]

    def offloadees(self) -> list[OffloadingScore]:
        return [s for node, s in self.scores.items() if node != self.self_id]

    def to_json(self) -> dict[str, Any]:
        return {"self_id": self.self_id, "scores": [s.to_json() for s in self.scores.values()]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> NodeScores:
        scores = {}
        for item in data["scores"]:
            s = OffloadingScore.from_json(item)
            scores[s.node_id] = s
        return cls(data["self_id"], scores)


def offloading_score(p: NodeProfile, rtt: RttEstimate, w: ScoreWeights = ScoreWeights()) -> OffloadingScore:
    """Weighted capability sum minus network cost and, for unplugged phones, used battery.

    No unit conversion happens: GFLOPS, GHz and GB are added as raw
    magnitudes and seconds and battery percent subtracted the same way.
    The clock term uses the per-core GHz; core count is not scored.
    """
    validate_profile(p)
    if rtt.node_id != p.node_id:
        raise ProfileMismatch(f"RTT estimate is for {rtt.node_id!r}, profile is {p.node_id!r}")
    score = w.w_b * p.benchmark_gflops + w.w_p * p.cpu_clock_ghz + w.w_m * p.memory_gb
    score -= w.w_rtt * rtt.rtt_s
    if p.node_class is NodeClass.MOBILE and p.charging is False:
        score -= w.w_batt * (100.0 - p.battery_level_pct)
    return OffloadingScore(p.node_id, score, score > 0)


def total_offloading_score(scores: NodeScores | Iterable[float]) -> float:
    """Sum of absolute scores. Reporting only; partitioning ignores this."""
    values = [s.score for s in scores.scores.values()] if isinstance(scores, NodeScores) else list(scores)
    if not values:
        raise ValueError("no scores given")
    return sum(abs(v) for v in values)


def collect_node_scores(
    self_profile: NodeProfile,
    connected: Iterable[tuple[NodeProfile, RttEstimate]],
    w: ScoreWeights = ScoreWeights(),
) -> NodeScores:
    local = offloading_score(self_profile, RttEstimate(self_profile.node_id, 0.0), w)
    # the local node is always a participant, whatever its score
    scores = {self_profile.node_id: OffloadingScore(local.node_id, local.score, True)}
    for profile, rtt in connected:
        if profile.node_id in scores:
            raise ValueError(f"duplicate node {profile.node_id!r}")
        scores[profile.node_id] = offloading_score(profile, rtt, w)
    return NodeScores(self_profile.node_id, scores)


def partition_task(scores: NodeScores) -> PartitionPlan:
    """Percent of the task per node, proportional to score.

    Offloadees with a score <= 0 get nothing. The local node always takes
    part; when some offloadee is eligible its weight is floored at
    ``LOCAL_SCORE_FLOOR``, otherwise it simply receives everything.
    """
    eligible = [s for s in scores.offloadees() if s.score > 0]
    if not eligible:
        return PartitionPlan({scores.self_id: 100.0})
    weights = {scores.self_id: max(scores.local.score, LOCAL_SCORE_FLOOR)}
    weights.update((s.node_id, s.score) for s in eligible)
    total = sum(weights.values())
    return PartitionPlan({node: value / total * 100 for node, value in weights.items()})


def equal_plan(nodes: Iterable[NodeId]) -> PartitionPlan:
    nodes = list(nodes)
    return PartitionPlan({node: 100.0 / len(nodes) for node in nodes})
