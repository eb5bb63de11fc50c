"""Analytic cost model for a simulated network link."""

from __future__ import annotations

from offloadkit.domain import LinkModel

DEFAULT_PROBE_BYTES = 1024


def transfer_time(nbytes: int, link: LinkModel) -> float:
    """Seconds to push ``nbytes`` one way: latency plus serialisation."""
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    return link.latency_s + nbytes / link.bandwidth_bytes_per_s


def simulated_rtt(link: LinkModel, probe_bytes: int = DEFAULT_PROBE_BYTES, task_bytes: int = 0) -> float:
    """Probe round trip plus the time to ship the task payload."""
    if probe_bytes < 0 or task_bytes < 0:
        raise ValueError("byte counts must be >= 0")
    return 2 * link.latency_s + (probe_bytes + task_bytes) / link.bandwidth_bytes_per_s
