import time
import warnings
from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

from insulate.model import Disk, ProblemConfig, Union2
from insulate.phase_field import GridSpec, PFParams, at_minimize, extract_sets

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# interior radial benchmark: unit disk, h = 4, C0 = 1
BENCH_H, BENCH_C0 = 4.0, 1.0
BENCH_R = 1.5402139531585497
BENCH_F = 14.884622970501248

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def _run_pf(cfg, n):
    p = PFParams()
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = at_minimize(cfg, GridSpec(n, 2.2), p)
    ext = extract_sets(res, p)
    return SimpleNamespace(result=res, ext=ext, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def bench_cfg():
    return ProblemConfig(robin_h=BENCH_H, volume_cost=BENCH_C0)


@pytest.fixture(scope="session")
def pf_bench_128(bench_cfg):
    return _run_pf(bench_cfg, 128)


@pytest.fixture(scope="session")
def pf_bench_256(bench_cfg):
    return _run_pf(bench_cfg, 256)


@pytest.fixture(scope="session")
def shared_cfg():
    # small body at 85% of the optimal insulator thickness
    return ProblemConfig(robin_h=BENCH_H, volume_cost=BENCH_C0,
                         omega=Union2(Disk(), Disk((1.459, 0.0), 0.05)))


@pytest.fixture(scope="session")
def pf_shared_256(shared_cfg):
    return _run_pf(shared_cfg, 256)
