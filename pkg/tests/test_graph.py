from random import Random

import networkx as nx
import pytest
from hypothesis import given, settings

from hqslab.core import Partition, QuorumSystem, has_quorum_intersection
from hqslab.graph import (
    build_graph,
    check_minimal_quorum_lemma,
    condensation,
    has_quorum_sharing,
    sink_component,
    system_minimal_quorums,
    to_dot,
)
from hqslab.suite import brute_individual_minimal, brute_minimal_quorums, sharing_instance

from conftest import systems


def nx_sinks(g):
    d = nx.DiGraph()
    d.add_nodes_from(g.vertices)
    d.add_edges_from(g.edges)
    c = nx.condensation(d)
    return {frozenset(c.nodes[i]["members"]) for i in c.nodes if c.out_degree(i) == 0}


def test_fbqs_edges_and_sink(fbqs):
    g = build_graph(fbqs[0])
    for e in [(1, 2), (1, 5), (2, 5), (5, 2), (2, 3), (3, 2)]:
        assert e in g.edges
    # 2 <-> 3 and 2 <-> 5 put 3 in the sink next to 2 and 5
    assert sink_component(g).members == {2, 3, 5}
    assert {frozenset({2, 3, 5})} == nx_sinks(g)


def test_small_graphs():
    g = build_graph(QuorumSystem.of({1: [[1]]}))
    assert g.vertices == {1} and g.edges == {(1, 1)}
    tri = build_graph(QuorumSystem.of({1: [[1, 3]], 2: [[1, 2]], 3: [[2, 3]]}))
    assert tri.edges == {(1, 3), (3, 2), (2, 1), (1, 1), (2, 2), (3, 3)}
    full = build_graph(QuorumSystem.of({p: [[1, 2, 3]] for p in (1, 2, 3)}))
    assert sink_component(full).members == {1, 2, 3}
    two = sink_component(build_graph(QuorumSystem.of({1: [[1]], 2: [[2]]})))
    assert two.multiple and set(two.sinks) == {frozenset({1}), frozenset({2})}


def test_minimal_quorum_examples(running, fbqs):
    assert frozenset({2, 5}) in system_minimal_quorums(fbqs[0])
    assert system_minimal_quorums(running[0]) == {frozenset({1, 4}), frozenset({3, 4}), frozenset({1, 3})}
    assert system_minimal_quorums(QuorumSystem.of({1: [[1]]})) == {frozenset({1})}
    for qs in (running[0], fbqs[0]):
        assert system_minimal_quorums(qs) == brute_minimal_quorums(qs)


def test_sharing_examples(running, fbqs):
    rep = has_quorum_sharing(*fbqs)
    assert not rep.holds and rep.witness == {1, 2, 4}
    rep = has_quorum_sharing(*running)
    assert not rep.holds and rep.witness == {1, 4}
    full = QuorumSystem.of({p: [[1, 2, 3]] for p in (1, 2, 3)})
    assert has_quorum_sharing(full).holds


def test_minimal_quorum_lemma_examples(running):
    sub = QuorumSystem.of({2: [[2, 5]], 5: [[2, 5]]}, universe=[1, 2, 3, 4, 5])
    part = Partition(sub.universe, frozenset({1, 3, 4}))
    rep = check_minimal_quorum_lemma(sub, part)
    assert rep.applicable and rep.holds
    assert brute_individual_minimal(sub, part) == {frozenset({2, 5})}
    rep = check_minimal_quorum_lemma(*running)
    assert not rep.applicable


@settings(max_examples=300, deadline=None)
@given(systems(n_max=6))
def test_condensation_matches_networkx(sysp):
    qs, _ = sysp
    g = build_graph(qs)
    cond = condensation(g)
    flat = [v for c in cond.components for v in c]
    assert sorted(flat) == sorted(g.vertices)
    d = nx.DiGraph(list(cond.dag_edges))
    d.add_nodes_from(range(len(cond.components)))
    assert nx.is_directed_acyclic_graph(d)
    for i in cond.sink_indices:
        assert not any(a == i for a, _ in cond.dag_edges)
    assert set(sink_component(g).sinks) == nx_sinks(g)
    for a, b in g.edges:
        assert any(b in q for q in qs.quorums[a])


@pytest.mark.parametrize("i", range(120))
def test_sharing_instances_graph_lemmas(i):
    inst = sharing_instance(Random(f"graph:{i}"))
    qs, part = inst.qs, inst.part
    assert has_quorum_intersection(qs, part).holds and has_quorum_sharing(qs, part).holds
    g = build_graph(qs)
    sink = sink_component(g)
    assert not sink.multiple
    mq = system_minimal_quorums(qs)
    wb = part.well_behaved
    for q in mq:
        members = q & wb
        for a in members:
            for b in members:
                assert (a, b) in g.edges  # clique
        assert members <= sink.members
    for p in wb:
        assert any(all((p, m) in g.edges for m in q & wb) for q in mq)
    assert check_minimal_quorum_lemma(qs, part).holds


def test_dot_output(running):
    g = build_graph(running[0])
    dot = to_dot(g, sink_component(g).members)
    assert dot.startswith("digraph quorums {")
    assert '1 [style=filled, fillcolor="lightgrey"];' in dot
    assert "  5;" in dot and "  5 -> 1;" in dot
