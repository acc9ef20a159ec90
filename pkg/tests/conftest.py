"""Shared fixtures: session-cached scenario runs so the long simulations
execute once per test session regardless of how many tests inspect them."""

from __future__ import annotations

import dataclasses
import time
from types import SimpleNamespace

import pytest

from edgeform.engine import run_scenario
from edgeform.scenario import load_scenario

BUNDLED = ["fig2a_spanning_tree", "fig2b_cycle", "fig2c_undirected", "fig3_global"]


@pytest.fixture(scope="session")
def scenario_runs():
    """Callable fixture: scenario_runs(name) -> cached run record.

    The first call warms the compiled integration kernel on a tiny horizon so
    one-time JIT compilation does not pollute wall-clock measurements.
    """
    cache: dict[str, SimpleNamespace] = {}
    warm = load_scenario("fig3_global")
    run_scenario(dataclasses.replace(warm, horizon=5 * warm.dt))

    def get(name: str) -> SimpleNamespace:
        if name not in cache:
            cfg = load_scenario(name)
            t0 = time.perf_counter()
            log, metrics = run_scenario(cfg)
            cache[name] = SimpleNamespace(cfg=cfg, log=log, metrics=metrics,
                                          runtime=time.perf_counter() - t0)
        return cache[name]

    return get
