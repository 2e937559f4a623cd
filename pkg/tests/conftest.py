import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from geodock.io import DatasetSpec, generate_synthetic  # noqa: E402
from geodock.molecule import make_ligand  # noqa: E402


@pytest.fixture(scope="session")
def small_set():
    """Twelve small synthetic ligands and their pocket."""
    return generate_synthetic(DatasetSpec(12, (10, 24), (2, 4), seed=11, pocket_points=60))


def chain(n, spacing=1.5, rotatable=True, radius=1.5):
    """Straight chain along x with ``n`` atoms."""
    pos = np.array([[spacing * k, 0.0, 0.0] for k in range(n)])
    return make_ligand("chain", pos, [radius] * n, [(k, k + 1, rotatable) for k in range(n - 1)])


# -- acceptance summary -------------------------------------------------------
#
# Each acceptance test stores a "criterion" and a "detail" user property. The
# terminal summary prints one PASS or FAIL line per criterion.

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    name = props.get("criterion", report.nodeid.split("::")[-1])
    if report.when == "call" or (report.failed and name not in _ACCEPTANCE):
        verdict = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE[name] = (verdict, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        verdict, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
