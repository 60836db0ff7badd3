import random

import pytest
from hypothesis import HealthCheck, settings

from interval_lab.cache import CacheLevelConfig, HierarchyConfig
from interval_lab.trace import Trace, TraceEvent

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            entry = _criteria.setdefault(n, {"title": title, "nodes": set(), "failed": False, "seen": 0})
            entry["nodes"].add(item.nodeid)


def pytest_runtest_logreport(report):
    for entry in _criteria.values():
        if report.nodeid in entry["nodes"]:
            if report.when == "call" or report.failed:
                entry["seen"] += 1
            if report.failed:
                entry["failed"] = True


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        if not e["seen"]:
            status = "SKIP"
        else:
            status = "FAIL" if e["failed"] else "PASS"
        tr.write_line(f"criterion {n:2d} {status}  {e['title']}")


def single_level(size, assoc, line=64, policy="LRU", memory_latency=100, hit_latency=1):
    return HierarchyConfig(
        (CacheLevelConfig("L1", size, assoc, line, hit_latency, policy=policy),),
        memory_latency=memory_latency,
        base_cpi=1.0,
    )


def mem_trace(addrs, line=64, stores=()):
    """One memory event per block index in ``addrs``."""
    evs = []
    for i, b in enumerate(addrs):
        kind = "store" if i in stores else "load"
        evs.append(TraceEvent(0x400000 + 4 * i, 0, int(b) * line, kind))
    return Trace.from_events(evs)


def random_events(rng: random.Random, n, mem_frac=0.5, n_blocks=64, n_bbs=8):
    evs = []
    for i in range(n):
        bb = rng.randrange(n_bbs)
        pc = 0x400000 + 64 * bb + 4 * (i % 4)
        if rng.random() < mem_frac:
            evs.append(TraceEvent(pc, bb, rng.randrange(n_blocks) * 64 + rng.randrange(64), rng.choice(("load", "store"))))
        else:
            evs.append(TraceEvent(pc, bb))
    return evs


@pytest.fixture
def rng():
    return random.Random(12345)
