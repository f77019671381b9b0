import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Four-cluster reference chain used throughout the tests and the acceptance suite.
FOUR_CLUSTER_P = np.array([[0.3, 0.7, 0.0, 0.0],
                   [0.0, 0.0, 0.2, 0.8],
                   [0.2, 0.7, 0.0, 0.1],
                   [0.0, 0.0, 0.7, 0.3]])
FOUR_CLUSTER_ALPHA = np.array([0.2, 0.1, 0.4, 0.3])


def four_cluster_sizes(d):
    return tuple(int(round(a * d)) for a in FOUR_CLUSTER_ALPHA)


@pytest.fixture
def four_cluster_p():
    return FOUR_CLUSTER_P.copy()


@pytest.fixture
def four_cluster_alpha():
    return FOUR_CLUSTER_ALPHA.copy()


def random_ergodic(rng, K, zero_frac=0.0):
    """Random row-stochastic matrix with a positive diagonal (hence aperiodic)."""
    while True:
        P = rng.dirichlet(np.ones(K), size=K)
        if zero_frac:
            P = P * (rng.random((K, K)) > zero_frac)
        np.fill_diagonal(P, P.diagonal() + 0.05)
        P /= P.sum(axis=1, keepdims=True)
        from freeconc.dependence import is_irreducible
        if is_irreducible(P):
            return P


# acceptance reporting: one PASS/FAIL line per criterion at the end of the run
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE[num] = (title, rep.outcome == "passed", getattr(item, "acceptance_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[num]
        line = f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
