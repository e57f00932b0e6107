import numpy as np
import pytest

from caso.graph import MembershipNetwork, SocialGraph


def random_graph(rng, n, p=0.3, connected_min_degree=False):
    """Erdos-Renyi adjacency as a SocialGraph; optionally every user gets a neighbor."""
    A = np.triu(rng.random((n, n)) < p, 1).astype(float)
    A = A + A.T
    if connected_min_degree:
        for i in np.flatnonzero(A.sum(1) == 0):
            j = (i + 1) % n
            A[i, j] = A[j, i] = 1.0
    return SocialGraph.from_adjacency(A)


def random_memberships(rng, n_users, n_comms, p=0.4, every_user=True):
    Y = rng.random((n_users, n_comms)) < p
    if every_user:
        for i in np.flatnonzero(Y.sum(1) == 0):
            Y[i, rng.integers(n_comms)] = True
    return MembershipNetwork.from_pairs(np.argwhere(Y), n_users, n_comms)


def dense_y(b):
    return b.by_user.toarray()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, one line per criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
