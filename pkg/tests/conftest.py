"""Shared Monte Carlo runs and the per-criterion acceptance report.

Each run is a session fixture so that unit tests and acceptance tests
built on the same experiment simulate it only once. Runs use one worker;
determinism across worker counts is tested separately.
"""

from __future__ import annotations

from collections import defaultdict

import pytest

from sojourn_fields.experiments import ExperimentConfig, run_experiment

CAUCHY = {"family": "generalized_cauchy", "sigma": 2.0, "theta": 0.25}
GAUSSIAN = {"family": "gaussian"}
F12 = {"kind": "fisher", "m": 1, "n": 2}
T2 = {"kind": "student", "n": 2}
SCALING_RADII = [32, 64, 128, 256]

# symmetric row-orthonormal 2x2 block of the mix example
ROTATION = [[0.8, 0.6], [0.6, -0.8]]
# Th11: orthogonal, block diagonal with blocks (1, 2)
BLOCK_MIX = [[1.0, 0.0, 0.0], [0.0, 0.8, 0.6], [0.0, 0.6, -0.8]]
# Th3 with mixing across numerator and denominator
CROSS_MIX = [[0.8, 0.6, 0.0], [0.6, -0.8, 0.0], [0.0, 0.0, 1.0]]


def _run(**raw):
    cfg = ExperimentConfig.from_dict(raw)
    return run_experiment(cfg, workers=1)


# -- long range, Fisher ---------------------------------------------------


@pytest.fixture(scope="session")
def fisher_lrd_run():
    """Th7 over the scaling radii at 1000 replications."""
    return _run(covariance=CAUCHY, field=F12, theorem="Th7", radii=SCALING_RADII, replications=1000, spacing=0.5, master_seed=7007)


@pytest.fixture(scope="session")
def fisher_lrd_mixed_run():
    """Th11 counterpart of ``fisher_lrd_run`` at the largest radius."""
    return _run(
        covariance=CAUCHY, field=F12, theorem="Th11", mixing=BLOCK_MIX, radii=[256], replications=1000, spacing=0.5, master_seed=1111
    )


@pytest.fixture(scope="session")
def fisher_lrd_smoke_run():
    """Small Th7 run at r=128."""
    return _run(covariance=CAUCHY, field=F12, theorem="Th7", radii=[128], replications=200, spacing=0.5, master_seed=7128)


# -- long range, Student --------------------------------------------------


@pytest.fixture(scope="session")
def student_lrd_run():
    """Th6 over the scaling radii at 500 replications."""
    return _run(covariance=CAUCHY, field=T2, theorem="Th6", radii=SCALING_RADII, replications=500, spacing=0.5, master_seed=6006)


@pytest.fixture(scope="session")
def moving_level_run():
    """Th8 with ``a(r) = r^0.05``."""
    return _run(
        covariance=CAUCHY,
        field=T2,
        theorem="Th8",
        level={"kind": "power_law", "c": 1.0, "beta": 0.05},
        radii=[256],
        replications=500,
        spacing=0.5,
        master_seed=8008,
    )


# -- short range ----------------------------------------------------------


@pytest.fixture(scope="session")
def gaussian_scaling_run():
    """Th3 over the scaling radii at 500 replications."""
    return _run(covariance=GAUSSIAN, field=F12, theorem="Th3", radii=SCALING_RADII, replications=500, spacing=0.5, master_seed=3003)


@pytest.fixture(scope="session")
def short_range_run():
    """Th3 at r=64, 1000 replications, spacing 0.25."""
    return _run(covariance=GAUSSIAN, field=F12, theorem="Th3", radii=[64], replications=1000, spacing=0.25, master_seed=3064)


@pytest.fixture(scope="session")
def short_range_mixed_run():
    """Th3 with a mixing matrix that couples numerator and denominator."""
    return _run(
        covariance=GAUSSIAN, field=F12, theorem="Th3", mixing=CROSS_MIX, radii=[64], replications=1000, spacing=0.25, master_seed=1064
    )


@pytest.fixture(scope="session")
def first_moment_run():
    """F_{1,2} at level 1 on the r=32 disk, 500 replications."""
    return _run(covariance=GAUSSIAN, field=F12, theorem="Th3", radii=[32], replications=500, spacing=0.25, master_seed=5032)


# -- criterion report -----------------------------------------------------

_OUTCOMES: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = int(marker.args[0])
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _OUTCOMES[n].append((item.name, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        results = _OUTCOMES[n]
        ok = all(passed for _, passed, _ in results)
        failed = [name for name, passed, _ in results if not passed]
        details = " | ".join(d for _, _, d in results if d)
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({len(results)} checks"
        if failed:
            line += f"; failed: {', '.join(failed)}"
        line += ")"
        if details:
            line += f" {details}"
        terminalreporter.write_line(line)
