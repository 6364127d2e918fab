"""Events as regions of the static model, chronologies, and edge coverage.

An event is a machine in its own right: its region is a subgraph of the
static model and it implicitly carries a time sub-machine. Chronologies
are precedence DAGs over events; events with no path between them may
occur in any order or simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Chronology,
    ChronologyDecl,
    Diagnostic,
    Event,
    EventDecl,
    Model,
    _check_event_decl,
    _chronology_diagnostics,
)

__all__ = [
    "CoverageReport",
    "attach_event",
    "validate_chronology",
    "coverage",
    "is_linear_extension",
    "topological_order",
]


@dataclass(frozen=True)
class CoverageReport:
    """Which flow/trigger edges are inside some event region."""

    covered: tuple[str, ...]
    uncovered: tuple[str, ...]
    ratio: float

    def text(self) -> str:
        """Three-line human-readable block."""
        total = len(self.covered) + len(self.uncovered)
        missing = ", ".join(self.uncovered) if self.uncovered else "-"
        return (
            f"covered: {len(self.covered)} of {total} edges\n"
            f"uncovered: {missing}\n"
            f"ratio: {self.ratio:.4f}\n"
        )

    def as_dict(self) -> dict:
        return {
            "covered": list(self.covered),
            "uncovered": list(self.uncovered),
            "ratio": self.ratio,
        }


def attach_event(model: Model, decl: EventDecl) -> Event | list[Diagnostic]:
    """Check an event declaration against a validated model.

    Returns the resolved event iff its region is a non-empty subgraph of
    the static model and its name is fresh (E301/E303 otherwise). Attach
    the result with ``model.with_event(event)``.
    """
    return _check_event_decl(model, dict(model.events_by_name), decl)


def validate_chronology(model: Model) -> list[Diagnostic]:
    """Report unknown event references (E303) and cycles (E302).

    One E302 is emitted per strongly connected component, naming a full
    cycle path. Models without a chronology yield no diagnostics.
    """
    if model.chronology is None:
        return []
    _, diags = _chronology_diagnostics(
        dict(model.events_by_name), ChronologyDecl(model.chronology.edges)
    )
    return diags


def coverage(model: Model) -> CoverageReport:
    """Fraction of flow/trigger edges covered by the union of event regions.

    A model with no edges has ratio 1.
    """
    all_ids = [e.id for e in model.flows] + [t.id for t in model.triggers]
    covered_set: set[str] = set()
    for event in model.events:
        covered_set.update(event.flow_ids)
        covered_set.update(event.trigger_ids)
    covered = tuple(i for i in all_ids if i in covered_set)
    uncovered = tuple(i for i in all_ids if i not in covered_set)
    ratio = 1.0 if not all_ids else len(covered) / len(all_ids)
    return CoverageReport(covered, uncovered, ratio)


def is_linear_extension(chronology: Chronology, sequence) -> bool:
    """True iff the sequence respects every precedence edge.

    The sequence must be a permutation of the chronology's nodes;
    anything else raises ValueError rather than returning False.
    """
    seq = tuple(sequence)
    if len(seq) != len(chronology.nodes) or set(seq) != set(chronology.nodes):
        raise ValueError("sequence must be a permutation of the chronology nodes")
    position = {node: i for i, node in enumerate(seq)}
    for before, after in chronology.edges:
        if position[before] >= position[after]:
            return False
    return True


def topological_order(chronology: Chronology) -> list[str] | None:
    """One topological order of the chronology, or None if it is cyclic."""
    indegree = {n: 0 for n in chronology.nodes}
    successors: dict[str, list[str]] = {n: [] for n in chronology.nodes}
    for a, b in chronology.edges:
        indegree[b] += 1
        successors[a].append(b)
    ready = [n for n in chronology.nodes if indegree[n] == 0]
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for succ in successors[node]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                ready.append(succ)
    if len(order) != len(chronology.nodes):
        return None
    return order
