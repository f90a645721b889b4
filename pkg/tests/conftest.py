import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noisebound.exact import build_truncated_chain, solve_stationary  # noqa: E402
from noisebound.network import Network  # noqa: E402
from noisebound.suites import builtin_network  # noqa: E402


@functools.lru_cache(maxsize=None)
def solved(name, caps, method="direct"):
    """Cached ``(chain, dist)`` for a builtin network."""
    chain = build_truncated_chain(builtin_network(name), caps)
    return chain, solve_stationary(chain, method=method)


@functools.lru_cache(maxsize=None)
def solved_net(rates, tau, caps, method="direct"):
    chain = build_truncated_chain(Network.from_strings(list(rates), list(tau)), caps)
    return chain, solve_stationary(chain, method=method)


@pytest.fixture
def poisson():
    return builtin_network("poisson_product")


@pytest.fixture
def mutual():
    return builtin_network("mutual_repression")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
