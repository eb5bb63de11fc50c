"""The divisible task: exact byte-pattern search, chunking and merging.

Chunks overlap by ``len(pattern) - 1`` bytes, so a match that straddles a
nominal boundary is found by the chunk in which it starts and by no other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from offloadkit.domain import NodeId, PartitionPlan, SubTask


class EmptyPattern(ValueError):
    pass


class PlanMismatch(ValueError):
    pass


class TaskIdMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MatchSet:
    offsets: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.offsets, self.offsets[1:])):
            raise ValueError("match offsets must be strictly increasing")

    def __len__(self) -> int:
        return len(self.offsets)

    def to_json(self) -> dict[str, list[int]]:
        return {"offsets": list(self.offsets)}

    @classmethod
    def from_json(cls, data) -> MatchSet:
        return cls(tuple(int(o) for o in data["offsets"]))


def build_failure_table(pattern: bytes) -> list[int]:
    """``widths[i]``: longest proper prefix of ``pattern[:i+1]`` that is also its suffix."""
    if not pattern:
        raise EmptyPattern("pattern must be at least one byte")
    widths = [0] * len(pattern)
    k = 0
    for i in range(1, len(pattern)):
        while k and pattern[i] != pattern[k]:
            k = widths[k - 1]
        if pattern[i] == pattern[k]:
            k += 1
        widths[i] = k
    return widths


def kmp_search(text: bytes, pattern: bytes) -> MatchSet:
    """All start offsets of ``pattern`` in ``text``, overlapping matches included."""
    widths = build_failure_table(pattern)
    m = len(pattern)
    n = len(text)
    if m > n:
        return MatchSet()
    first = pattern[0]
    find = text.find
    found = []
    i = 0
    k = 0
    while i < n:
        if k == 0:
            # state 0 loops on every byte except the first pattern byte
            i = find(first, i)
            if i < 0:
                break
            k = 1
            i += 1
            if m == 1:
                found.append(i - 1)
                k = 0
            continue
        c = text[i]
        while k and c != pattern[k]:
            k = widths[k - 1]
        if c == pattern[k]:
            k += 1
            if k == m:
                found.append(i - m + 1)
                k = widths[k - 1]
        i += 1
    return MatchSet(tuple(found))


def chunk_bounds(length: int, shares: Sequence[float]) -> list[tuple[int, int]]:
    """Nominal ``[start, end)`` per share; round-half-up on cumulative boundaries."""
    bounds = []
    start = 0
    cumulative = 0.0
    for i, share in enumerate(shares):
        cumulative += share
        if i == len(shares) - 1:
            end = length
        else:
            end = min(length, max(start, int(cumulative / 100 * length + 0.5)))
        bounds.append((start, end))
        start = end
    return bounds


def split_text(
    text: bytes,
    plan: PartitionPlan,
    pattern_len: int,
    node_order: Sequence[NodeId] | None = None,
    *,
    task_id: str = "",
    pattern: bytes = b"",
) -> list[SubTask]:
    """Cut ``text`` into one contiguous SubTask per node, in ``node_order``."""
    if pattern_len < 1:
        raise EmptyPattern("pattern_len must be >= 1")
    order = list(plan.shares) if node_order is None else list(node_order)
    if len(order) != len(set(order)) or set(order) != set(plan.shares):
        raise PlanMismatch(f"node order {order} does not match plan nodes {list(plan.shares)}")
    overlap = pattern_len - 1
    bounds = chunk_bounds(len(text), [plan.shares[node] for node in order])
    subtasks = []
    for index, (start, end) in enumerate(bounds):
        if index < len(bounds) - 1:
            end = min(len(text), end + overlap)
        subtasks.append(SubTask(task_id, index, start, text[start:end], pattern))
    return subtasks


def merge_results(subresults: Iterable[tuple[SubTask, MatchSet]]) -> MatchSet:
    """Rebase chunk-local offsets to the parent text and union them."""
    task_id = None
    merged: set[int] = set()
    for sub, matches in subresults:
        if task_id is None:
            task_id = sub.task_id
        elif sub.task_id != task_id:
            raise TaskIdMismatch(f"subresult for {sub.task_id!r} in merge of {task_id!r}")
        merged.update(sub.chunk_offset_bytes + o for o in matches.offsets)
    return MatchSet(tuple(sorted(merged)))
