from __future__ import annotations

from itertools import combinations

import pytest
from hypothesis import strategies as st

from hqslab.core import Partition, QuorumSystem
from hqslab.scenarios import load_system_file


def canned(name: str):
    ls = load_system_file(name)
    return ls.qs, ls.part


@pytest.fixture
def running():
    return canned("running-example")


@pytest.fixture
def fbqs():
    return canned("fbqs-discussion")


def subsets(xs, min_size=0):
    xs = sorted(xs)
    for k in range(min_size, len(xs) + 1):
        for c in combinations(xs, k):
            yield frozenset(c)


@st.composite
def systems(draw, n_max=5, max_byz=2):
    """Random systems; Byzantine processes may or may not declare quorums."""
    n = draw(st.integers(1, n_max))
    uni = list(range(1, n + 1))
    byz = draw(st.sets(st.sampled_from(uni), max_size=min(max_byz, n - 1)))
    quorums = {}
    for p in uni:
        if p in byz and draw(st.booleans()):
            continue
        k = draw(st.integers(1, 3))
        qs = []
        for _ in range(k):
            others = draw(st.sets(st.sampled_from(uni), max_size=n))
            qs.append(sorted(others | ({p} if draw(st.integers(0, 9)) else set())) or [p])
        quorums[p] = qs
    qs = QuorumSystem.of(quorums, universe=uni)
    return qs, Partition.of(qs, byz)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
