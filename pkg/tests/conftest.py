import re

import pytest
from hypothesis import HealthCheck, settings

from nrcsim import NrcStats, SystemConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def baseline_cfg():
    """100 BS antennas, 20 single-antenna UEs, tau_u = 20, rho_u = 0 dB, rho_d = 20 dB."""
    return SystemConfig.single_antenna(100, 20, 20, rho_u=1.0, rho_d=100.0, coherence_symbols=196)


@pytest.fixture
def baseline_nrc():
    return NrcStats(sigma2_a_d=1e-2, sigma2_c_d=1e-2, delta2_c_d=1e-3, sigma2_c_od=1e-3)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in getattr(rep, "nodeid", ""):
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            m = re.search(r"test_c(\d+)_(\w+)", rep.nodeid)
            if m:
                lines.append((int(m.group(1)), "PASS" if outcome == "passed" else "FAIL",
                              m.group(2)))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, verdict, name in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {name}")
