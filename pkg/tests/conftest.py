import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("sumax", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sumax")

# criterion number -> (passed, message); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def rng(request):
    # one fixed stream per test, derived from its node id
    seed = np.frombuffer(request.node.nodeid.encode(), dtype=np.uint8).astype(np.uint64)
    return np.random.default_rng(np.random.SeedSequence(list(seed)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {msg}")
