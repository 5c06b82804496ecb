"""Shared fixtures.

The convergence grid and its fine reference trajectory take a few minutes
to build, so they are session-scoped and constructed lazily on first use.
Set ``IONSTEP_TEST_CACHE`` to a writable directory to keep the reference
trajectory between test runs; without it the reference is rebuilt once per
session in a temporary directory.
"""

import os
import time

import pytest

from ionstep.bench import DEFAULT_STEPS, RunConfig, convergence_study
from ionstep.schemes import ALL_SCHEME_KEYS

# Finer steps appended for the explicit Adams schemes, which are unstable
# on all but the tail of the common step ladder and need more points for a
# meaningful slope fit.
AB_EXTENSION_STEPS = (0.003125, 0.0015625)

# Wall-clock seconds spent building the grid, filled in by the fixture.
GRID_TIMING: dict = {}


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    env = os.environ.get("IONSTEP_TEST_CACHE")
    if env:
        os.makedirs(env, exist_ok=True)
        return env
    return str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture(scope="session")
def bench_config(cache_dir):
    return RunConfig(repeats=1, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def grid_result(bench_config):
    """Full error-versus-step grid shared by the acceptance tests."""
    extra = {"ab_2": list(AB_EXTENSION_STEPS), "ab_3": list(AB_EXTENSION_STEPS)}
    t0 = time.perf_counter()
    result = convergence_study(
        bench_config, ALL_SCHEME_KEYS, DEFAULT_STEPS, extra_steps=extra
    )
    GRID_TIMING["wall_s"] = time.perf_counter() - t0
    return result
