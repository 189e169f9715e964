import numpy as np
import pytest

from qthermo import protocol

FIRST_LAW_TOL = 1e-10

# every ledger built anywhere in the suite, for the global first-law tally
LEDGERS_SEEN: list = []


@pytest.fixture(autouse=True)
def first_law_guard(monkeypatch):
    """Fail any test that produces a ledger violating dU = Q - W."""
    created = []
    orig = protocol.ProtocolLedger.__init__

    def init(self, *args, **kwargs):
        orig(self, *args, **kwargs)
        created.append(self)

    monkeypatch.setattr(protocol.ProtocolLedger, "__init__", init)
    yield created
    LEDGERS_SEEN.extend(created)
    bad = [(L.kind, L.first_law_residual) for L in created if not L.first_law_residual <= FIRST_LAW_TOL]
    assert not bad, f"first law violated: {bad}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit_h():
    return np.diag([0.0, 1.0]).astype(complex)


@pytest.fixture
def plus():
    return np.full((2, 2), 0.5, dtype=complex)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
    terminalreporter.write_line(f"ledgers checked for the first law across the suite: {len(LEDGERS_SEEN)}")
