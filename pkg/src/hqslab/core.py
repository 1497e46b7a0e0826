"""Heterogeneous quorum systems and their static properties.

A system maps each process that declares quorums to a set of individual
minimal quorums. Property checks quantify over the well-behaved side of a
partition only; Byzantine quorums may be declared (the graph uses them) or
left out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterable, Mapping

MAX_PROCESSES = 64

Quorum = frozenset  # frozenset[int]


class InvalidSystem(ValueError):
    pass


def _fs(xs: Iterable[int]) -> frozenset[int]:
    return frozenset(int(x) for x in xs)


def fmt_set(s: Iterable[int]) -> str:
    return "{" + ",".join(str(x) for x in sorted(s)) + "}"


def sorted_quorums(qs: Iterable[frozenset[int]]) -> list[frozenset[int]]:
    return sorted(qs, key=lambda q: (len(q), sorted(q)))


@dataclass(frozen=True)
class QuorumSystem:
    universe: frozenset[int]
    quorums: Mapping[int, frozenset[frozenset[int]]] = field(hash=False)

    def __post_init__(self):
        if len(self.universe) > MAX_PROCESSES:
            raise InvalidSystem(f"universe has {len(self.universe)} processes (max {MAX_PROCESSES})")
        for p in self.universe:
            if p < 0:
                raise InvalidSystem(f"process id {p} is negative")
        for p, qs in self.quorums.items():
            if p not in self.universe:
                raise InvalidSystem(f"process {p} declares quorums but is not in the universe")
            if not qs:
                raise InvalidSystem(f"process {p} declares an empty quorum set")
            for q in qs:
                if not q:
                    raise InvalidSystem(f"process {p} declares an empty quorum")
                if not q <= self.universe:
                    raise InvalidSystem(f"quorum {fmt_set(q)} of {p} leaves the universe")

    @classmethod
    def of(cls, quorums: Mapping[int, Iterable[Iterable[int]]], universe: Iterable[int] | None = None) -> "QuorumSystem":
        qmap = {int(p): frozenset(_fs(q) for q in qs) for p, qs in quorums.items()}
        if universe is None:
            uni = set(qmap)
            for qs in qmap.values():
                for q in qs:
                    uni |= q
        else:
            uni = _fs(universe)
        return cls(frozenset(uni), qmap)

    def declared(self) -> frozenset[int]:
        return frozenset(self.quorums)

    def of_process(self, p: int) -> frozenset[frozenset[int]]:
        try:
            return self.quorums[p]
        except KeyError:
            raise InvalidSystem(f"process {p} has no declared quorums") from None

    def restrict(self, procs: Iterable[int]) -> "QuorumSystem":
        keep = set(procs)
        return QuorumSystem(self.universe, {p: qs for p, qs in self.quorums.items() if p in keep})

    def to_json(self) -> dict[str, Any]:
        return {
            "processes": sorted(self.universe),
            "quorums": {str(p): [sorted(q) for q in sorted_quorums(qs)] for p, qs in sorted(self.quorums.items())},
        }

    def __eq__(self, other):
        if not isinstance(other, QuorumSystem):
            return NotImplemented
        return self.universe == other.universe and dict(self.quorums) == dict(other.quorums)


@dataclass(frozen=True)
class Partition:
    universe: frozenset[int]
    byzantine: frozenset[int]

    def __post_init__(self):
        if not self.byzantine <= self.universe:
            raise InvalidSystem(f"Byzantine set {fmt_set(self.byzantine)} leaves the universe")

    @property
    def well_behaved(self) -> frozenset[int]:
        return self.universe - self.byzantine

    @classmethod
    def of(cls, qs: QuorumSystem, byzantine: Iterable[int] = ()) -> "Partition":
        part = cls(qs.universe, _fs(byzantine))
        missing = sorted(p for p in part.well_behaved if p not in qs.quorums)
        if missing:
            raise InvalidSystem(f"well-behaved processes without quorums: {missing}")
        return part


@dataclass(frozen=True)
class PropertyReport:
    holds: bool
    witness: Any = None
    applicable: bool = True
    note: str = ""

    def __bool__(self):
        return self.holds


def minimize(qs: QuorumSystem) -> QuorumSystem:
    out = {}
    for p, quorums in qs.quorums.items():
        out[p] = frozenset(q for q in quorums if not any(o < q for o in quorums))
    return QuorumSystem(qs.universe, out)


def followers(qs: QuorumSystem, p: int) -> frozenset[int]:
    if p not in qs.universe:
        raise InvalidSystem(f"unknown process {p}")
    return frozenset(f for f, quorums in qs.quorums.items() if any(p in q for q in quorums))


def is_blocking(qs: QuorumSystem, p: int, procs: Iterable[int]) -> bool:
    s = set(procs)
    return all(q & s for q in qs.of_process(p))


def _wb_quorums(qs: QuorumSystem, part: Partition):
    for p in sorted(part.well_behaved):
        for q in sorted_quorums(qs.quorums.get(p, ())):
            yield p, q


def has_quorum_intersection(qs: QuorumSystem, part: Partition) -> PropertyReport:
    wb = part.well_behaved
    quorums = sorted_quorums({q for _, q in _wb_quorums(qs, part)})
    for i, q in enumerate(quorums):
        for q2 in quorums[i:]:
            if not (q & q2 & wb):
                return PropertyReport(False, (q, q2))
    return PropertyReport(True)


def weakly_available_set(qs: QuorumSystem, part: Partition) -> frozenset[int]:
    wb = part.well_behaved
    return frozenset(p for p in wb if any(q <= wb for q in qs.quorums.get(p, ())))


def is_quorum_subsuming(qs: QuorumSystem, q: Iterable[int]) -> PropertyReport:
    q = _fs(q)
    for p in sorted(q):
        if p not in qs.quorums:
            return PropertyReport(False, p, note="undeclared member")
        if not any(q2 <= q for q2 in qs.quorums[p]):
            return PropertyReport(False, p)
    return PropertyReport(True)


def is_complete_quorum(qs: QuorumSystem, part: Partition, q: Iterable[int]) -> bool:
    q = _fs(q)
    return q <= part.well_behaved and is_quorum_subsuming(qs, q).holds


def strongly_available_set(qs: QuorumSystem, part: Partition) -> frozenset[int]:
    return frozenset(
        p for p in part.well_behaved if any(is_complete_quorum(qs, part, q) for q in qs.quorums.get(p, ()))
    )


def blocking_sets(qs: QuorumSystem, p: int) -> list[frozenset[int]]:
    """All blocking sets of p over the universe (exponential, small n only)."""
    uni = sorted(qs.universe)
    out = []
    for k in range(len(uni) + 1):
        for c in combinations(uni, k):
            if is_blocking(qs, p, c):
                out.append(frozenset(c))
    return out
