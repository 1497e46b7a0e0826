"""Quorum graph, condensation and sink components.

Edges run from a process to every member of each of its quorums. Members
that declare no quorums are not vertices, so edges into them are dropped.
Strongly connected components come from plain reachability sets; systems
here are small enough that this stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Partition, PropertyReport, QuorumSystem, has_quorum_intersection, is_quorum_subsuming, sorted_quorums


@dataclass(frozen=True)
class QuorumGraph:
    vertices: frozenset[int]
    edges: frozenset[tuple[int, int]]

    def successors(self, p: int) -> frozenset[int]:
        return frozenset(b for a, b in self.edges if a == p)


@dataclass(frozen=True)
class Condensation:
    components: tuple[frozenset[int], ...]
    dag_edges: frozenset[tuple[int, int]]
    sink_indices: tuple[int, ...]

    @property
    def sink_index(self) -> int | None:
        return self.sink_indices[0] if len(self.sink_indices) == 1 else None


@dataclass(frozen=True)
class SinkResult:
    members: frozenset[int]
    sinks: tuple[frozenset[int], ...]
    multiple: bool


def build_graph(qs: QuorumSystem) -> QuorumGraph:
    verts = qs.declared()
    edges = set()
    for p, quorums in qs.quorums.items():
        for q in quorums:
            for m in q:
                if m in verts:
                    edges.add((p, m))
    return QuorumGraph(verts, frozenset(edges))


def reachable(g: QuorumGraph, start: int) -> frozenset[int]:
    adj = {v: [] for v in g.vertices}
    for a, b in g.edges:
        adj[a].append(b)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


def condensation(g: QuorumGraph) -> Condensation:
    reach = {v: reachable(g, v) for v in g.vertices}
    comps: list[frozenset[int]] = []
    placed: set[int] = set()
    for v in sorted(g.vertices):
        if v in placed:
            continue
        comp = frozenset(w for w in reach[v] if v in reach[w])
        comps.append(comp)
        placed |= comp
    index = {v: i for i, c in enumerate(comps) for v in c}
    dag = frozenset((index[a], index[b]) for a, b in g.edges if index[a] != index[b])
    sinks = tuple(i for i in range(len(comps)) if not any(a == i for a, _ in dag))
    return Condensation(tuple(comps), dag, sinks)


def sink_component(g: QuorumGraph) -> SinkResult:
    cond = condensation(g)
    sinks = tuple(cond.components[i] for i in cond.sink_indices)
    members = sinks[0] if len(sinks) == 1 else frozenset().union(*sinks)
    return SinkResult(members, sinks, len(sinks) > 1)


def system_minimal_quorums(qs: QuorumSystem) -> frozenset[frozenset[int]]:
    allq = {q for quorums in qs.quorums.values() for q in quorums}
    return frozenset(q for q in allq if not any(o < q for o in allq))


def system_minimal_quorums_wb(qs: QuorumSystem, part: Partition) -> frozenset[frozenset[int]]:
    """Variant taking minimality over well-behaved processes' quorums only."""
    return system_minimal_quorums(qs.restrict(part.well_behaved))


def has_quorum_sharing(qs: QuorumSystem, part: Partition | None = None) -> PropertyReport:
    procs = sorted(qs.declared() if part is None else part.well_behaved)
    for p in procs:
        for q in sorted_quorums(qs.quorums.get(p, ())):
            if not is_quorum_subsuming(qs, q).holds:
                return PropertyReport(False, q)
    return PropertyReport(True)


def individually_minimal_everywhere(qs: QuorumSystem, part: Partition) -> frozenset[frozenset[int]]:
    """Declared quorums listed by every one of their well-behaved members."""
    allq = {q for quorums in qs.quorums.values() for q in quorums}
    wb = part.well_behaved
    return frozenset(q for q in allq if q & wb and all(q in qs.quorums.get(p, ()) for p in q & wb))


def check_minimal_quorum_lemma(qs: QuorumSystem, part: Partition, *, wb_only: bool = False) -> PropertyReport:
    if not has_quorum_intersection(qs, part).holds:
        return PropertyReport(False, applicable=False, note="no quorum intersection")
    sharing = has_quorum_sharing(qs, part)
    if not sharing.holds:
        return PropertyReport(False, sharing.witness, applicable=False, note="no quorum sharing")
    mq = system_minimal_quorums_wb(qs, part) if wb_only else system_minimal_quorums(qs)
    wb = part.well_behaved
    for q in sorted_quorums(mq):
        for p in sorted(q & wb):
            if q not in qs.quorums.get(p, ()):
                return PropertyReport(False, (q, p), note="minimal quorum not individual-minimal for a member")
    for q in sorted_quorums(individually_minimal_everywhere(qs, part)):
        if q not in mq:
            return PropertyReport(False, q, note="individual-minimal quorum missing from minimal quorums")
    return PropertyReport(True)


def to_dot(g: QuorumGraph, sink: frozenset[int] = frozenset()) -> str:
    lines = ["digraph quorums {"]
    for v in sorted(g.vertices):
        attr = ' [style=filled, fillcolor="lightgrey"]' if v in sink else ""
        lines.append(f"  {v}{attr};")
    for a, b in sorted(g.edges):
        lines.append(f"  {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
