import numpy as np
import pytest

from prioqn.model import NetworkSpec


def station(servers, loads, mu=None, p=None, name=""):
    """One station, one class per rank; ``loads`` are lambda/mu (no routing)."""
    I = len(loads)
    mu = np.ones(I) if mu is None else np.asarray(mu, float)
    P = np.zeros((I, I)) if p is None else np.diag(p)
    lam = np.asarray(loads, float) * mu
    alpha = lam * (1 - np.diag(P))
    return NetworkSpec(1, I, [servers], alpha, mu, P, name)


def random_network(rng, J, I, servers=None, load=0.7, p_route=0.3):
    """Random open network with within-type routing, scaled to a target load."""
    K = I * J
    servers = rng.integers(1, 4, J) if servers is None else np.asarray(servers)
    mu = rng.uniform(0.5, 2.0, K)
    P = np.zeros((K, K))
    for i in range(I):
        block = slice(i * J, (i + 1) * J)
        sub = rng.uniform(0, 1, (J, J)) * (rng.uniform(0, 1, (J, J)) < 0.6)
        rows = sub.sum(axis=1, keepdims=True)
        P[block, block] = np.where(rows > 0, sub / np.maximum(rows, 1e-300), 0) * rng.uniform(0, p_route, (J, 1))
    alpha = rng.uniform(0.1, 1.0, K)
    spec = NetworkSpec(J, I, servers, alpha, mu, P)
    from prioqn.model import solve_traffic
    rho = solve_traffic(spec).rho
    return NetworkSpec(J, I, servers, alpha * load / rho.max(), mu, P)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
