"""Human-readable property report for a system file."""

from __future__ import annotations

from .core import (
    fmt_set,
    has_quorum_intersection,
    is_complete_quorum,
    is_quorum_subsuming,
    sorted_quorums,
    strongly_available_set,
    weakly_available_set,
)
from .graph import build_graph, check_minimal_quorum_lemma, has_quorum_sharing, sink_component, system_minimal_quorums
from .scenarios import LoadedSystem


def _qs(qs) -> str:
    return "{" + ", ".join(fmt_set(q) for q in sorted_quorums(qs)) + "}"


def check_report(ls: LoadedSystem) -> list[str]:
    qs, part = ls.qs, ls.part
    out = [f"system: {ls.name}", f"processes: {fmt_set(qs.universe)}", f"byzantine: {fmt_set(part.byzantine)}"]
    if ls.views is not None:
        out.append("quorums derived from slice views:")
    for p in sorted(qs.quorums):
        out.append(f"  Q({p}) = {_qs(qs.quorums[p])}")
    inter = has_quorum_intersection(qs, part)
    if inter.holds:
        out.append("quorum intersection: true")
    else:
        a, b = inter.witness
        out.append(f"quorum intersection: false (witness {fmt_set(a)} and {fmt_set(b)} share no well-behaved process)")
    out.append(f"weakly available set: {fmt_set(weakly_available_set(qs, part))}")
    out.append(f"strongly available set: {fmt_set(strongly_available_set(qs, part))}")
    sharing = has_quorum_sharing(qs, part)
    out.append("quorum sharing: true" if sharing.holds else f"quorum sharing: false (witness {fmt_set(sharing.witness)})")
    out.append("quorums of well-behaved processes:")
    seen = set()
    for p in sorted(part.well_behaved):
        for q in sorted_quorums(qs.quorums.get(p, ())):
            if q in seen:
                continue
            seen.add(q)
            sub = is_quorum_subsuming(qs, q)
            tag = "subsuming" if sub.holds else f"not subsuming (member {sub.witness})"
            if is_complete_quorum(qs, part, q):
                tag += ", complete"
            out.append(f"  {fmt_set(q)}: {tag}")
    sink = sink_component(build_graph(qs))
    if sink.multiple:
        out.append("sink components: " + ", ".join(fmt_set(s) for s in sink.sinks))
    else:
        out.append(f"sink component: {fmt_set(sink.members)}")
    out.append(f"minimal quorums: {_qs(system_minimal_quorums(qs))}")
    lemma = check_minimal_quorum_lemma(qs, part)
    if not lemma.applicable:
        out.append(f"minimal-quorum lemma: not applicable ({lemma.note})")
    else:
        out.append("minimal-quorum lemma: holds" if lemma.holds else f"minimal-quorum lemma: fails ({lemma.note})")
    return out
