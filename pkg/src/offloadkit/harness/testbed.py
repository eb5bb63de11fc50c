"""The six-node testbed: two phones, a cloudlet and three cloud instance sizes.

The mobile (small) phone is the offloader. Link models are the default
desk-scale calibration: Wi-Fi-class to nearby peers, slower to the cloud.
"""

from __future__ import annotations

from offloadkit.domain import LinkModel, NodeClass, NodeProfile
from offloadkit.net.discovery import SIMULATED, Registry, RegistryEntry

LOCAL_ID = "mobile-small"

WIFI_LINK = LinkModel(latency_s=0.02, bandwidth_bytes_per_s=3_000_000)
CLOUD_LINK = LinkModel(latency_s=0.05, bandwidth_bytes_per_s=1_500_000)

# node id, class, GFLOPS, GHz, cores, GB
TESTBED_ROWS = [
    ("mobile-small", NodeClass.MOBILE, 1.09, 1.3, 2, 1.0),
    ("mobile-medium", NodeClass.MOBILE, 1.24, 1.4, 2, 1.0),
    ("cloudlet", NodeClass.CLOUDLET, 2.56, 2.5, 4, 16.0),
    ("cloud-small", NodeClass.REMOTE_CLOUD, 2.32, 2.4, 1, 1.0),
    ("cloud-medium", NodeClass.REMOTE_CLOUD, 2.94, 2.8, 4, 7.5),
    ("cloud-large", NodeClass.REMOTE_CLOUD, 3.02, 2.8, 8, 15.0),
]

# nodes serving as offloadees in the multi-site runs
MULTI_SITE_NODES = ["mobile-medium", "cloudlet", "cloud-large"]


def node_profiles(battery_level_pct: float = 100.0, charging: bool = False) -> dict[str, NodeProfile]:
    profiles = {}
    for node_id, node_class, gflops, ghz, cores, mem in TESTBED_ROWS:
        mobile = node_class is NodeClass.MOBILE
        profiles[node_id] = NodeProfile(
            node_id=node_id,
            node_class=node_class,
            benchmark_gflops=gflops,
            cpu_clock_ghz=ghz,
            cpu_cores=cores,
            memory_gb=mem,
            battery_level_pct=battery_level_pct if mobile else None,
            charging=charging if mobile else None,
        )
    return profiles


def link_for(node_class: NodeClass) -> LinkModel:
    return CLOUD_LINK if node_class is NodeClass.REMOTE_CLOUD else WIFI_LINK


def simulated_testbed(offloadees: list[str] | None = None, **profile_kw) -> Registry:
    """Simulated registry with the offloader first; optionally only some offloadees."""
    entries = []
    for node_id, profile in node_profiles(**profile_kw).items():
        local = node_id == LOCAL_ID
        if not local and offloadees is not None and node_id not in offloadees:
            continue
        entries.append(RegistryEntry(
            node_id=node_id,
            address=SIMULATED,
            node_class=profile.node_class,
            link=None if local else link_for(profile.node_class),
            profile=profile,
            local=local,
        ))
    return Registry.of(entries)
