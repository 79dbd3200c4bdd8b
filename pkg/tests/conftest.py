import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sapiens_sim.network import Network, Params
from sapiens_sim.registry import NodeKind, NodeProfile


def build_network(nodes, params=None, seed=0, balances=None, **kw):
    """Network with a fog node at the origin plus ``nodes`` as (id, roles, extra-kwargs) tuples."""
    net = Network(params or Params(), seed, **kw)
    net.add_node(NodeProfile("fog-0", NodeKind.FOG))
    balances = balances or {}
    for spec in nodes:
        node_id, roles = spec[0], spec[1]
        extra = spec[2] if len(spec) > 2 else {}
        net.add_node(NodeProfile(node_id, roles=frozenset(roles), **extra), balances.get(node_id, 0))
    net.seal()
    return net


@pytest.fixture
def make_network():
    return build_network


ACCEPTANCE: dict = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        verdict = "PASS" if ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
