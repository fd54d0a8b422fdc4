import time
import warnings

import numpy as np
import pytest

from pspam.experiment import CAP, CUP, UNIFORM, ExperimentSpec, run_sweep

# criterion title -> list of (passed, detail); one summary line per criterion
ACCEPTANCE = {}


def record(criterion: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, checks in sorted(ACCEPTANCE.items()):
        failed = [d for ok, d in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = "; ".join(failed) if failed else f"{len(checks)} checks"
        terminalreporter.write_line(f"[{status}] {criterion} ({detail})")


@pytest.fixture(scope="session")
def format_sweeps():
    """Default-link Vpp sweeps (200-530 mV, 2e5 symbols) for uniform, cap and cup, plus wall time."""
    start = time.perf_counter()
    out = {}
    for name, dist in (("uniform", UNIFORM), ("cap", CAP), ("cup", CUP)):
        out[name] = run_sweep(ExperimentSpec(distribution=dist), master_seed=2023)
    return out, time.perf_counter() - start


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_training_len_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="training_len=.*below 4x")
        yield
