"""DOT emitters for static models, event overlays, and chronologies.

Machines become nested clusters, stages become nodes labeled with their
kind, flows are solid edges labeled with the thing, triggers dashed.
Event regions are drawn as color-coded node outlines with a legend
(clusters cannot cross machine boundaries or overlap, so outlines are the
non-lossy encoding); each event's assignments sit between begin/end marker
comments. Output is deterministic: same model, same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ENV_NAME, Model, StageRef, validate

__all__ = [
    "DotDocument",
    "render_static",
    "render_events",
    "render_chronology",
    "dot_well_formed",
]

_PALETTE = (
    "#1b9e77",
    "#d95f02",
    "#7570b3",
    "#e7298a",
    "#66a61e",
    "#e6ab02",
    "#a6761d",
    "#666666",
    "#1f78b4",
    "#b2df8a",
    "#fb9a99",
    "#cab2d6",
)


@dataclass(frozen=True)
class DotDocument:
    """A rendered diagram in the DOT graph language."""

    text: str

    def __str__(self) -> str:
        return self.text


def _require_valid(model: Model, lax: bool) -> None:
    errors = [d for d in validate(model, lax=lax) if d.is_error]
    if errors:
        raise ValueError(
            "model does not validate: " + "; ".join(str(d) for d in errors)
        )


def _stages_by_machine(model: Model) -> dict[tuple[str, ...], list[StageRef]]:
    grouped: dict[tuple[str, ...], list[StageRef]] = {}
    for ref in model.used_stages:
        grouped.setdefault(ref.path, []).append(ref)
    return grouped


def _emit_machine(
    machine, grouped: dict[tuple[str, ...], list[StageRef]], depth: int, lines: list[str]
) -> None:
    pad = "  " * depth
    cluster_id = "cluster_" + "__".join(machine.path)
    lines.append(f'{pad}subgraph "{cluster_id}" {{')
    lines.append(f'{pad}  label="{machine.name}";')
    for ref in grouped.get(machine.path, ()):
        lines.append(f'{pad}  "{ref}" [label="{ref.kind.value}"];')
    for child in machine.children:
        _emit_machine(child, grouped, depth + 1, lines)
    lines.append(f"{pad}}}")


def _static_body(model: Model) -> list[str]:
    lines: list[str] = []
    grouped = _stages_by_machine(model)
    for root in model.root_machines:
        _emit_machine(root, grouped, 1, lines)
    env_refs = grouped.get((ENV_NAME,), ())
    for ref in env_refs:
        lines.append(f'  "{ref}" [label="{ref}", shape=plaintext];')
    for e in model.flows:
        lines.append(f'  "{e.src}" -> "{e.dst}" [id="{e.id}", label="{e.thing}"];')
    for t in model.triggers:
        lines.append(f'  "{t.src}" -> "{t.dst}" [id="{t.id}", style=dashed];')
    return lines


def render_static(model: Model, *, lax: bool = False) -> DotDocument:
    """Static diagram: machine clusters, stage nodes, flow and trigger edges."""
    _require_valid(model, lax)
    lines = [f'digraph "{model.name}" {{', "  compound=true;"]
    lines.extend(_static_body(model))
    lines.append("}")
    return DotDocument("\n".join(lines) + "\n")


def render_events(model: Model, *, lax: bool = False) -> DotDocument:
    """Static diagram plus one color-coded boundary block per event."""
    _require_valid(model, lax)
    if not model.events:
        raise ValueError("model has no events to render")
    lines = [f'digraph "{model.name}" {{', "  compound=true;"]
    lines.extend(_static_body(model))
    for index, event in enumerate(model.events):
        color = _PALETTE[index % len(_PALETTE)]
        members: dict[StageRef, None] = {}
        for ref in event.node_refs:
            members.setdefault(ref)
        for fid in event.flow_ids:
            edge = model.flows_by_id[fid]
            members.setdefault(edge.src)
            members.setdefault(edge.dst)
        for tid in event.trigger_ids:
            edge = model.triggers_by_id[tid]
            members.setdefault(edge.src)
            members.setdefault(edge.dst)
        lines.append(f"  /* event {event.name} begin */")
        for ref in members:
            lines.append(f'  "{ref}" [color="{color}", penwidth=2.0];')
        lines.append(f"  /* event {event.name} end */")
    lines.append('  subgraph "cluster_legend" {')
    lines.append('    label="events";')
    for index, event in enumerate(model.events):
        color = _PALETTE[index % len(_PALETTE)]
        tag = " (perpetual)" if event.perpetual else ""
        lines.append(
            f'    "legend_{event.name}" [label="{event.name}{tag}", '
            f'color="{color}", penwidth=2.0, shape=box];'
        )
    lines.append("  }")
    lines.append("}")
    return DotDocument("\n".join(lines) + "\n")


def render_chronology(model: Model) -> DotDocument:
    """One node per event, one edge per precedence pair."""
    from .events import topological_order

    if model.chronology is None:
        raise ValueError("model has no chronology to render")
    if topological_order(model.chronology) is None:
        raise ValueError("chronology is cyclic")
    lines = [f'digraph "{model.name}_chronology" {{']
    events = model.events_by_name
    for name in model.chronology.nodes:
        event = events.get(name)
        tag = " (perpetual)" if event is not None and event.perpetual else ""
        lines.append(f'  "{name}" [label="{name}{tag}"];')
    for a, b in model.chronology.edges:
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return DotDocument("\n".join(lines) + "\n")


def dot_well_formed(text: str) -> bool:
    """Tokenizer-level well-formedness: balanced braces/brackets, closed
    strings and comments, a digraph header, and terminated statements."""
    i = 0
    n = len(text)
    depth_braces = 0
    depth_brackets = 0
    stripped: list[str] = []
    while i < n:
        c = text[i]
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                j += 1
            if j >= n:
                return False
            stripped.append("s")
            i = j + 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            if j < 0:
                return False
            i = j + 2
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if c == "{":
            depth_braces += 1
        elif c == "}":
            depth_braces -= 1
            if depth_braces < 0:
                return False
        elif c == "[":
            depth_brackets += 1
        elif c == "]":
            depth_brackets -= 1
            if depth_brackets < 0:
                return False
        stripped.append(c)
        i += 1
    if depth_braces != 0 or depth_brackets != 0:
        return False
    flat = "".join(stripped).strip()
    if not flat.startswith("digraph"):
        return False
    return flat.endswith("}")
