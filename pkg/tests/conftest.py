import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from georigid.catalog import beltrami_pullback, sphere_stereo  # noqa: E402
from georigid.equivalence import build_pair  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BELTRAMI_A = "diag(2,1,1,1,1)"


@pytest.fixture(scope="session")
def beltrami_pair():
    return build_pair(sphere_stereo(4), beltrami_pullback(4, BELTRAMI_A))


@pytest.fixture(scope="session")
def beltrami_samples(beltrami_pair):
    return beltrami_pair.sample(100, np.random.default_rng(20240601))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion
# ---------------------------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str, list]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_criterion_"):
        if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _ACCEPTANCE[item.name] = (doc, "PASS" if rep.outcome == "passed" else "FAIL", item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        doc, status, props = _ACCEPTANCE[name]
        num = name.split("_")[2]
        detail = ", ".join(f"{k}={v}" for k, v in props)
        tr.write_line(f"[{status}] criterion {num}: {doc}" + (f" ({detail})" if detail else ""))
