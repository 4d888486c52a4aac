import numpy as np
import pytest

from spikerank.events import EventLog
from spikerank.graph import SparseAdjacency

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_log(rng, n_events, n_users, t_max=600.0, integer_times=False):
    if integer_times:
        times = rng.integers(0, int(t_max), size=n_events).astype(float)
    else:
        times = rng.uniform(0, t_max, size=n_events)
    s = rng.integers(0, n_users, size=n_events)
    r = rng.integers(0, n_users, size=n_events)
    return EventLog.from_columns(times, [f"u{i}" for i in s], [f"u{i}" for i in r])


def random_adjacency(rng, n, density):
    dense = (rng.random((n, n)) < density).astype(np.int64)
    np.fill_diagonal(dense, 0)
    return SparseAdjacency.from_dense(dense), dense


@pytest.fixture
def rng():
    return np.random.default_rng(20131009)
