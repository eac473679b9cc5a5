import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from varbw.profile import make_profile, propagate_coefficients
from varbw.spectral import SpectralCutoff, breakpoint_grid, synthesize_grid
from varbw.synthetic import random_density

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "demo"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run_cli(*args: str, cwd=None) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "varbw", *map(str, args)]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=cwd)


@pytest.fixture
def cutoff():
    return SpectralCutoff(4.0)


@pytest.fixture
def toy_profile():
    return make_profile([0.0], [1.0, 4.0])


def real_member(profile, cutoff, seed, window=15.0, dx=0.03):
    """A generic real member of the space sampled on a breakpoint-aligned grid."""
    table = propagate_coefficients(profile)
    d = random_density(np.random.default_rng(seed), cutoff, plus_only=True)
    return synthesize_grid(profile, table, cutoff, d, breakpoint_grid(profile, window, dx), real=True)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
