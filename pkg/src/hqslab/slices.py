"""Quorums derived from per-observer slice views.

A Byzantine declarer may present different slices to different observers,
so each observer computes its own quorums from what it was shown.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from .core import InvalidSystem, Partition, QuorumSystem

MAX_SLICE_UNIVERSE = 16


@dataclass(frozen=True)
class SliceViews:
    universe: frozenset[int]
    # (declarer, observer) -> slices
    slices: Mapping[tuple[int, int], frozenset[frozenset[int]]] = field(hash=False)

    @classmethod
    def build(
        cls,
        universe: Iterable[int],
        honest: Mapping[int, Iterable[Iterable[int]]],
        presented: Mapping[int, Mapping[int, Iterable[Iterable[int]]]] | None = None,
    ) -> "SliceViews":
        """honest: declarer -> slices shown to everyone; presented: declarer -> observer -> slices."""
        uni = frozenset(universe)
        table = {}
        for d, ss in honest.items():
            fs = frozenset(frozenset(s) for s in ss)
            for o in uni:
                table[(d, o)] = fs
        for d, per_obs in (presented or {}).items():
            for o, ss in per_obs.items():
                table[(d, o)] = frozenset(frozenset(s) for s in ss)
        for (d, o), ss in table.items():
            for s in ss:
                if not s or not s <= uni:
                    raise InvalidSystem(f"bad slice {sorted(s)} of {d} shown to {o}")
        return cls(uni, table)

    def seen_by(self, declarer: int, observer: int) -> frozenset[frozenset[int]]:
        return self.slices.get((declarer, observer), frozenset())


def _qualifies(v: SliceViews, observer: int, q: frozenset[int]) -> bool:
    if observer not in q:
        return False
    if not any(s <= q for s in v.seen_by(observer, observer)):
        return False
    return all(any(s <= q for s in v.seen_by(m, observer)) for m in q)


def observed_quorums(v: SliceViews, observer: int) -> frozenset[frozenset[int]]:
    if observer not in v.universe:
        raise InvalidSystem(f"unknown observer {observer}")
    if not v.seen_by(observer, observer):
        raise InvalidSystem(f"observer {observer} has no slices")
    if len(v.universe) > MAX_SLICE_UNIVERSE:
        raise InvalidSystem(f"slice mode supports at most {MAX_SLICE_UNIVERSE} processes")
    others = sorted(v.universe - {observer})
    found = []
    for k in range(len(others) + 1):
        for c in combinations(others, k):
            q = frozenset(c) | {observer}
            if _qualifies(v, observer, q):
                found.append(q)
    return frozenset(q for q in found if not any(o < q for o in found))


def derive_system(v: SliceViews, part: Partition) -> QuorumSystem:
    return QuorumSystem(v.universe, {p: observed_quorums(v, p) for p in sorted(part.well_behaved)})
