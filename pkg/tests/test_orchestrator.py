import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_search
from offloadkit.domain import ExecutionMode, LinkModel, NodeClass, SearchTask
from offloadkit.harness.corpus import generate_corpus
from offloadkit.harness.testbed import CLOUD_LINK, LOCAL_ID, WIFI_LINK, node_profiles, simulated_testbed
from offloadkit.net.discovery import SIMULATED, Registry, RegistryEntry
from offloadkit.net.link import transfer_time
from offloadkit.net.worker import Worker, WorkerConfig
from offloadkit.orchestrator import (
    Clock,
    Orchestrator,
    OrchestratorConfig,
    TargetUnknown,
    execute,
    run_repeated,
)
from offloadkit.workload import kmp_search

PROFILES = node_profiles()
SIM = OrchestratorConfig(clock=Clock.SIMULATED)
ALL_MODES = [
    ExecutionMode.local_only(),
    ExecutionMode.full_offload("cloudlet"),
    ExecutionMode.partial_equal(),
    ExecutionMode.single_site("cloudlet"),
    ExecutionMode.multi_site(),
]


def local_entry():
    return RegistryEntry(LOCAL_ID, SIMULATED, NodeClass.MOBILE, None, PROFILES[LOCAL_ID], local=True)


def sim_entry(node_id, link=WIFI_LINK, stall_s=0.0):
    p = PROFILES[node_id]
    return RegistryEntry(node_id, SIMULATED, p.node_class, link, p, stall_s=stall_s)


def real_entry(worker):
    p = worker.config.profile
    return RegistryEntry(p.node_id, worker.address_text, p.node_class, None, None)


def test_local_only():
    report = execute(SearchTask("t", b"abcab", b"ab"), ExecutionMode.local_only(), simulated_testbed())
    assert report.matches == (0, 3)
    [record] = report.records
    assert record.bytes_sent == 0 and record.transfer_out_s == 0
    assert report.plan.shares == {LOCAL_ID: 100.0}


def test_partial_equal_one_offloadee():
    registry = Registry.of([local_entry(), sim_entry("cloudlet")])
    text = generate_corpus(200)[:1000]
    report = execute(SearchTask("t", text, b"ab"), ExecutionMode.partial_equal(), registry, SIM)
    assert [r.chunk_bytes for r in report.records] == [501, 500]
    assert list(report.matches) == naive_search(text, b"ab")


def test_partial_equal_covers_all_offloadees():
    report = execute(SearchTask("t", b"ab" * 300, b"ab"), ExecutionMode.partial_equal(), simulated_testbed(), SIM)
    assert len(report.plan.shares) == 6
    assert all(s == pytest.approx(100 / 6) for s in report.plan.shares.values())


def test_simulated_full_offload_makespan():
    registry = Registry.of([local_entry(), sim_entry("cloudlet")])
    text = b"abcdefghij" * 599_999 + b"zzzzzzzzzz"
    cost = 2.56e9 / len(text)  # one second of cloudlet compute
    cfg = OrchestratorConfig(clock=Clock.SIMULATED, cost_per_byte=cost)
    report = execute(SearchTask("t", text, b"jz"), ExecutionMode.full_offload("cloudlet"), registry, cfg)
    [record] = report.records
    assert record.compute_s == pytest.approx(1.0)
    back = transfer_time(16 * len(report.matches), WIFI_LINK)
    assert report.total_makespan_s == transfer_time(len(text), WIFI_LINK) + record.compute_s + back
    assert report.total_makespan_s == pytest.approx(3.04, abs=0.1)


def test_every_mode_finds_every_match():
    text = generate_corpus(3000, seed=4)
    pattern = text[100:104]
    expected = kmp_search(text, pattern).offsets
    orch = Orchestrator(simulated_testbed(), SIM)
    for mode in ALL_MODES:
        report = orch.execute(SearchTask("t", text, pattern), mode)
        assert report.matches == expected, mode


def test_unknown_target():
    with pytest.raises(TargetUnknown):
        execute(SearchTask("t", b"abc", b"a"), ExecutionMode.full_offload("nowhere"), simulated_testbed(), SIM)
    with pytest.raises(TargetUnknown):
        execute(SearchTask("t", b"abc", b"a"), ExecutionMode.full_offload(LOCAL_ID), simulated_testbed(), SIM)


def test_engine_shares_are_proportional():
    text = generate_corpus(20_000)
    orch = Orchestrator(simulated_testbed(), SIM)
    report = orch.execute(SearchTask("t", text, b"abc"), ExecutionMode.multi_site())
    nominal = [r.chunk_bytes - 2 for r in report.records[:-1]] + [report.records[-1].chunk_bytes]
    for record, size in zip(report.records, nominal):
        assert abs(size - report.plan.shares[record.node_id] / 100 * len(text)) <= 1
    assert orch.last_scores.local.node_id == LOCAL_ID


def test_single_site_uses_local_and_target_only():
    report = execute(SearchTask("t", generate_corpus(500), b"ab"),
                     ExecutionMode.single_site("cloudlet"), simulated_testbed(), SIM)
    assert set(report.plan.shares) <= {LOCAL_ID, "cloudlet"}


def test_simulated_stall_is_reprocessed():
    registry = Registry.of([local_entry(), sim_entry("cloudlet", stall_s=5.0), sim_entry("mobile-medium")])
    text = generate_corpus(2000, seed=9)
    pattern = text[50:53]
    cfg = OrchestratorConfig(clock=Clock.SIMULATED, timeout_s=0.1)
    orch = Orchestrator(registry, cfg)
    report = orch.execute(SearchTask("t", text, pattern), ExecutionMode.partial_equal())
    by_node = {r.node_id: r for r in report.records}
    assert by_node["cloudlet"].timed_out and by_node["cloudlet"].reprocessed_locally
    assert not by_node["mobile-medium"].timed_out
    assert report.matches == kmp_search(text, pattern).offsets
    assert report.total_makespan_s >= 0.1
    assert orch.discarded_replies == [("t", 1)]
    assert report.timeouts == 1


def test_stalled_worker_wall_clock():
    text = generate_corpus(5000, seed=3)
    pattern = text[10:14]
    with Worker(WorkerConfig(PROFILES["cloudlet"], task_delay_s=0.4)) as w:
        registry = Registry.of([local_entry(), real_entry(w)])
        orch = Orchestrator(registry, OrchestratorConfig(timeout_s=0.1))
        start = time.perf_counter()
        report = orch.execute(SearchTask("stall", text, pattern), ExecutionMode.full_offload("cloudlet"))
        elapsed = time.perf_counter() - start
        [record] = report.records
        assert record.timed_out and record.reprocessed_locally
        assert report.matches == tuple(naive_search(text, pattern))
        assert elapsed < 0.4
        deadline = time.monotonic() + 2
        while not orch.discarded_replies and time.monotonic() < deadline:
            time.sleep(0.02)
        assert orch.discarded_replies == [("stall", 0)]


def test_real_worker_multi_site():
    text = generate_corpus(4000, seed=5)
    pattern = text[200:203]
    with Worker(WorkerConfig(PROFILES["cloudlet"])) as w:
        registry = Registry.of([local_entry(), real_entry(w)])
        orch = Orchestrator(registry, OrchestratorConfig(timeout_s=5))
        for mode in (ExecutionMode.multi_site(), ExecutionMode.full_offload("cloudlet"),
                     ExecutionMode.partial_equal()):
            report = orch.execute(SearchTask("t", text, pattern), mode)
            assert report.matches == kmp_search(text, pattern).offsets
            assert not any(r.timed_out for r in report.records)


def test_dead_worker_is_reprocessed_not_timed_out():
    with Worker(WorkerConfig(PROFILES["cloudlet"])) as w:
        entry = real_entry(w)
    registry = Registry.of([local_entry(), entry])
    report = execute(SearchTask("t", b"abcabc", b"bc"), ExecutionMode.full_offload("cloudlet"), registry,
                     OrchestratorConfig(timeout_s=1))
    [record] = report.records
    assert record.reprocessed_locally and not record.timed_out
    assert report.matches == (1, 4)


def test_engine_skips_unreachable_nodes():
    with Worker(WorkerConfig(PROFILES["cloudlet"])) as w:
        entry = real_entry(w)
    registry = Registry.of([local_entry(), entry])
    report = execute(SearchTask("t", b"abcabc", b"bc"), ExecutionMode.multi_site(), registry,
                     OrchestratorConfig(timeout_s=1))
    assert report.plan.shares == {LOCAL_ID: 100.0}


def test_simulated_clock_rejects_real_nodes():
    with Worker(WorkerConfig(PROFILES["cloudlet"])) as w:
        registry = Registry.of([local_entry(), real_entry(w)])
        with pytest.raises(ValueError):
            Orchestrator(registry, SIM)


def test_offloading_wins_once_compute_dominates():
    registry = Registry.of([local_entry(), sim_entry("cloudlet")])
    task = SearchTask("t", generate_corpus(40_000), b"abc")
    mode_local, mode_full = ExecutionMode.local_only(), ExecutionMode.full_offload("cloudlet")

    def gap(cost):
        cfg = OrchestratorConfig(clock=Clock.SIMULATED, cost_per_byte=cost, timeout_s=1e6)
        orch = Orchestrator(registry, cfg)
        return orch.execute(task, mode_full).total_makespan_s - orch.execute(task, mode_local).total_makespan_s

    assert gap(10) > 0
    assert gap(100_000) < 0


def test_repeated_simulated_runs_are_identical():
    summary = run_repeated(SearchTask("t", generate_corpus(300), b"ab"), ExecutionMode.multi_site(),
                           simulated_testbed(), OrchestratorConfig(clock=Clock.SIMULATED, repetitions=10))
    assert len(summary.reports) == 10
    assert summary.mean_s == summary.min_s == summary.max_s


def test_single_repetition_summary():
    summary = run_repeated(SearchTask("t", b"abcab", b"ab"), ExecutionMode.local_only(), simulated_testbed(), SIM)
    assert summary.mean_s == summary.min_s == summary.max_s == summary.reports[0].total_makespan_s


def test_wall_clock_repetitions():
    cfg = OrchestratorConfig(repetitions=3)
    summary = run_repeated(SearchTask("t", generate_corpus(1000), b"ab"), ExecutionMode.local_only(),
                           simulated_testbed(), cfg)
    assert summary.min_s <= summary.mean_s <= summary.max_s


def test_config_json_roundtrip():
    cfg = OrchestratorConfig(timeout_s=0.5, clock=Clock.SIMULATED, repetitions=3, cost_per_byte=7)
    assert OrchestratorConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError):
        OrchestratorConfig(timeout_s=0)
    with pytest.raises(ValueError):
        OrchestratorConfig(repetitions=0)


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="ab", max_size=400).map(str.encode),
       st.text(alphabet="ab", min_size=1, max_size=5).map(str.encode),
       st.sampled_from(ALL_MODES), st.sets(st.sampled_from(["cloudlet", "cloud-large", "mobile-medium"])))
def test_correct_under_any_stall_pattern(text, pattern, mode, stalled):
    entries = [local_entry()]
    for node_id in ("cloudlet", "cloud-large", "mobile-medium"):
        link = CLOUD_LINK if node_id.startswith("cloud-") else WIFI_LINK
        entries.append(sim_entry(node_id, link, stall_s=50.0 if node_id in stalled else 0.0))
    cfg = OrchestratorConfig(clock=Clock.SIMULATED, timeout_s=1.0)
    report = execute(SearchTask("t", text, pattern), mode, Registry.of(entries), cfg)
    assert list(report.matches) == naive_search(text, pattern)


def test_generous_link_model_is_accepted():
    registry = Registry.of([local_entry(), sim_entry("cloudlet", LinkModel(0.0, 1e12))])
    report = execute(SearchTask("t", b"x" * 1000, b"x"), ExecutionMode.full_offload("cloudlet"), registry, SIM)
    assert len(report.matches) == 1000
