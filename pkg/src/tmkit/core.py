"""Graph data model and well-formedness rules for Thinging Machine models.

A TM model is a web of nested machines. Things flow through up to five
stages per machine (create, process, release, transfer, receive) along
solid flow edges; dashed trigger edges connect flows of different things
and are the only cross-thing causation. Stages are implicit: a machine
possesses a stage exactly when some edge touches it.

Well-formedness is reported through :class:`Diagnostic` values with stable
codes; checks are exhaustive, never fail-fast.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Union

__all__ = [
    "StageKind",
    "StageRef",
    "Thing",
    "Machine",
    "FlowEdge",
    "TriggerEdge",
    "RegionNode",
    "RegionFlow",
    "RegionTrigger",
    "Event",
    "Chronology",
    "Model",
    "Diagnostic",
    "DIAGNOSTIC_CODES",
    "ENV_NAME",
    "PathError",
    "ThingDecl",
    "MachineDecl",
    "FlowDecl",
    "TriggerDecl",
    "NodeItemDecl",
    "FlowItemDecl",
    "TriggerItemDecl",
    "EventDecl",
    "ChronologyDecl",
    "flow_legal",
    "build_model",
    "validate",
    "resolve",
    "parse_stage_ref",
]


class StageKind(Enum):
    """The five stages a thing can manifest in."""

    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"

    def __str__(self) -> str:
        return self.value


STAGE_KINDS: dict[str, StageKind] = {kind.value: kind for kind in StageKind}

#: Reserved machine name for "the outside"; it has a single transfer stage.
ENV_NAME = "env"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

#: Words the language reserves; not usable as element names.
RESERVED_WORDS = frozenset(
    {"model", "thing", "machine", "flow", "trigger", "event", "chronology",
     "perpetual", "node"}
) | frozenset(STAGE_KINDS)

# Legal (src, dst) stage pairs for a flow staying inside one machine.
# Release is always the exit gate: create may not jump straight to transfer.
_SAME_MACHINE_LEGAL = frozenset(
    {
        (StageKind.CREATE, StageKind.PROCESS),
        (StageKind.CREATE, StageKind.RELEASE),
        (StageKind.RECEIVE, StageKind.PROCESS),
        (StageKind.RECEIVE, StageKind.RELEASE),
        (StageKind.PROCESS, StageKind.RELEASE),
        (StageKind.RELEASE, StageKind.TRANSFER),
        (StageKind.TRANSFER, StageKind.RECEIVE),
    }
)

# Crossing a machine boundary is legal only gateway to gateway.
_CROSS_MACHINE_LEGAL = frozenset({(StageKind.TRANSFER, StageKind.TRANSFER)})

#: Registry of diagnostic codes (bit-exact strings).
DIAGNOSTIC_CODES: dict[str, str] = {
    "E001": "syntax-error",
    "E101": "unresolved-path",
    "E102": "illegal-flow-pair",
    "E103": "cross-boundary-non-transfer",
    "E104": "flow-into-create",
    "E105": "thing-identity-break",
    "E106": "duplicate-id",
    "W201": "same-thing-trigger",
    "W202": "isolated-machine",
    "E301": "region-not-subgraph",
    "E302": "chronology-cycle",
    "E303": "bad-event-reference",
    "E401": "unresolved-choice",
    "E402": "step-limit-exceeded",
}


def flow_legal(src_kind: StageKind, dst_kind: StageKind, same_machine: bool) -> bool:
    """Pure lookup in the 5x5x2 stage-pair legality table."""
    if same_machine:
        return (src_kind, dst_kind) in _SAME_MACHINE_LEGAL
    return (src_kind, dst_kind) in _CROSS_MACHINE_LEGAL


@dataclass(frozen=True)
class StageRef:
    """Addressable stage node: a machine path from root plus a stage kind."""

    path: tuple[str, ...]
    kind: StageKind

    def __str__(self) -> str:
        return ".".join(self.path + (self.kind.value,))

    @property
    def is_env(self) -> bool:
        return self.path == (ENV_NAME,)


def parse_stage_ref(text: str) -> StageRef:
    """Parse a dotted stage reference like ``tank.sensor.create``.

    Raises ValueError if the text is not a machine path followed by a
    stage kind.
    """
    segments = text.split(".")
    if len(segments) < 2:
        raise ValueError(f"stage reference needs machine path and stage kind: {text!r}")
    kind = STAGE_KINDS.get(segments[-1])
    if kind is None:
        raise ValueError(f"stage reference must end in a stage kind: {text!r}")
    for seg in segments[:-1]:
        if not _IDENT_RE.match(seg):
            raise ValueError(f"bad path segment {seg!r} in {text!r}")
    return StageRef(tuple(segments[:-1]), kind)


@dataclass(frozen=True)
class Thing:
    """A thing that manifests in stages of machines. Its id is its name."""

    name: str

    @property
    def id(self) -> str:
        return self.name


@dataclass(frozen=True)
class Machine:
    """A machine node in the containment tree. Its id is its dotted path."""

    name: str
    path: tuple[str, ...]
    children: tuple["Machine", ...] = ()

    @property
    def id(self) -> str:
        return ".".join(self.path)

    @property
    def parent_path(self) -> tuple[str, ...] | None:
        return self.path[:-1] or None


@dataclass(frozen=True)
class FlowEdge:
    """Solid arrow carrying one thing between two stages."""

    id: str
    thing: str
    src: StageRef
    dst: StageRef


@dataclass(frozen=True)
class TriggerEdge:
    """Dashed arrow linking activity on one flow to another flow."""

    id: str
    src: StageRef
    dst: StageRef


@dataclass(frozen=True)
class RegionNode:
    """Region membership of a single stage node."""

    ref: StageRef


@dataclass(frozen=True)
class RegionFlow:
    """Region membership of a static flow edge, referenced by id."""

    edge_id: str


@dataclass(frozen=True)
class RegionTrigger:
    """Region membership of a static trigger edge, referenced by id."""

    edge_id: str


RegionItem = Union[RegionNode, RegionFlow, RegionTrigger]


@dataclass(frozen=True)
class Event:
    """A named region (subgraph of the static model) with a perpetual flag.

    Each event implicitly owns a logical time sub-machine; its time is
    received when the event starts and released when it ends. Perpetual
    events never release their time. Concrete timings are materialized per
    simulation run (see the simulator's trace timings), never stored on
    the immutable static model.
    """

    name: str
    perpetual: bool = False
    items: tuple[RegionItem, ...] = ()

    @property
    def id(self) -> str:
        return self.name

    @property
    def flow_ids(self) -> tuple[str, ...]:
        return tuple(i.edge_id for i in self.items if isinstance(i, RegionFlow))

    @property
    def trigger_ids(self) -> tuple[str, ...]:
        return tuple(i.edge_id for i in self.items if isinstance(i, RegionTrigger))

    @property
    def node_refs(self) -> tuple[StageRef, ...]:
        return tuple(i.ref for i in self.items if isinstance(i, RegionNode))


@dataclass(frozen=True)
class Chronology:
    """Precedence DAG over events. Unrelated events may occur in any order."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def predecessors(self, node: str) -> tuple[str, ...]:
        return tuple(a for a, b in self.edges if b == node)


@dataclass(frozen=True)
class Diagnostic:
    """A validation finding with a stable code.

    ``location`` is either a source span (when produced by the parser), an
    element id string, or None.
    """

    code: str
    severity: str  # "error" or "warning"
    location: object | None
    message: str

    def __str__(self) -> str:
        loc = f" [{self.location}]" if self.location is not None else ""
        return f"{self.severity} {self.code}{loc} {self.message}"

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


def _error(code: str, message: str, location: object | None = None) -> Diagnostic:
    return Diagnostic(code, "error", location, message)


def _warning(code: str, message: str, location: object | None = None) -> Diagnostic:
    return Diagnostic(code, "warning", location, message)


class PathError(ValueError):
    """Raised by :func:`resolve` for paths that do not name a model element."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


# ---------------------------------------------------------------------------
# Raw element declarations, the input of build_model. The parser produces
# these; programmatic callers construct them directly. ``span`` carries an
# opaque source location used for diagnostics and is never interpreted here.


@dataclass(frozen=True)
class ThingDecl:
    name: str
    span: object | None = None


@dataclass(frozen=True)
class MachineDecl:
    name: str
    children: tuple["MachineDecl", ...] = ()
    span: object | None = None


@dataclass(frozen=True)
class FlowDecl:
    thing: str
    src: str
    dst: str
    span: object | None = None


@dataclass(frozen=True)
class TriggerDecl:
    src: str
    dst: str
    span: object | None = None


@dataclass(frozen=True)
class NodeItemDecl:
    ref: str
    span: object | None = None


@dataclass(frozen=True)
class FlowItemDecl:
    thing: str
    src: str
    dst: str
    span: object | None = None


@dataclass(frozen=True)
class TriggerItemDecl:
    src: str
    dst: str
    span: object | None = None


EventItemDecl = Union[NodeItemDecl, FlowItemDecl, TriggerItemDecl]


@dataclass(frozen=True)
class EventDecl:
    name: str
    perpetual: bool = False
    items: tuple[EventItemDecl, ...] = ()
    span: object | None = None


@dataclass(frozen=True)
class ChronologyDecl:
    edges: tuple[tuple[str, str], ...] = ()
    span: object | None = None


Decl = Union[ThingDecl, MachineDecl, FlowDecl, TriggerDecl, EventDecl, ChronologyDecl]


@dataclass(frozen=True)
class Model:
    """The static TM graph plus attached events and chronology.

    Immutable after construction; all operations on it are pure functions,
    safe to share between threads.
    """

    name: str
    things: tuple[Thing, ...] = ()
    root_machines: tuple[Machine, ...] = ()
    flows: tuple[FlowEdge, ...] = ()
    triggers: tuple[TriggerEdge, ...] = ()
    events: tuple[Event, ...] = ()
    chronology: Chronology | None = None

    @cached_property
    def machines(self) -> tuple[Machine, ...]:
        """All machines in depth-first declaration order."""
        out: list[Machine] = []

        def walk(m: Machine) -> None:
            out.append(m)
            for c in m.children:
                walk(c)

        for root in self.root_machines:
            walk(root)
        return tuple(out)

    @cached_property
    def machines_by_path(self) -> dict[tuple[str, ...], Machine]:
        return {m.path: m for m in self.machines}

    @cached_property
    def things_by_name(self) -> dict[str, Thing]:
        return {t.name: t for t in self.things}

    @cached_property
    def flows_by_id(self) -> dict[str, FlowEdge]:
        return {e.id: e for e in self.flows}

    @cached_property
    def triggers_by_id(self) -> dict[str, TriggerEdge]:
        return {e.id: e for e in self.triggers}

    @cached_property
    def events_by_name(self) -> dict[str, Event]:
        return {e.name: e for e in self.events}

    @cached_property
    def used_stages(self) -> tuple[StageRef, ...]:
        """Stage nodes touched by at least one edge, in first-touch order."""
        seen: dict[StageRef, None] = {}
        for e in self.flows:
            seen.setdefault(e.src)
            seen.setdefault(e.dst)
        for t in self.triggers:
            seen.setdefault(t.src)
            seen.setdefault(t.dst)
        return tuple(seen)

    @cached_property
    def stage_in_things(self) -> dict[StageRef, tuple[str, ...]]:
        """Distinct things carried by flow edges into each stage."""
        out: dict[StageRef, list[str]] = {}
        for e in self.flows:
            bucket = out.setdefault(e.dst, [])
            if e.thing not in bucket:
                bucket.append(e.thing)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def stage_out_things(self) -> dict[StageRef, tuple[str, ...]]:
        """Distinct things carried by flow edges out of each stage."""
        out: dict[StageRef, list[str]] = {}
        for e in self.flows:
            bucket = out.setdefault(e.src, [])
            if e.thing not in bucket:
                bucket.append(e.thing)
        return {k: tuple(v) for k, v in out.items()}

    def stage_things(self, ref: StageRef) -> tuple[str, ...]:
        """Distinct things on flow edges incident to a stage."""
        seen: dict[str, None] = {}
        for t in self.stage_in_things.get(ref, ()):
            seen.setdefault(t)
        for t in self.stage_out_things.get(ref, ()):
            seen.setdefault(t)
        return tuple(seen)

    def machine(self, path: tuple[str, ...]) -> Machine | None:
        return self.machines_by_path.get(path)

    def with_event(self, event: Event) -> "Model":
        return replace(self, events=self.events + (event,))


_ENV_MACHINE = Machine(name=ENV_NAME, path=(ENV_NAME,))


def _resolve_ref(
    text: str, machines: dict[tuple[str, ...], Machine]
) -> tuple[StageRef | None, str | None]:
    """Resolve a stage reference string against the machine tree.

    Returns (ref, None) on success or (None, message) for an E101.
    """
    try:
        ref = parse_stage_ref(text)
    except ValueError as exc:
        return None, str(exc)
    if ref.path[0] == ENV_NAME:
        if ref.path != (ENV_NAME,):
            return None, f"unresolved path '{text}': '{ENV_NAME}' has no sub-machines"
        if ref.kind is not StageKind.TRANSFER:
            return None, (
                f"unresolved path '{text}': the environment possesses only a transfer stage"
            )
        return ref, None
    walked: tuple[str, ...] = ()
    for seg in ref.path:
        walked = walked + (seg,)
        if walked not in machines:
            return None, f"unresolved path '{text}': unknown segment '{seg}'"
    return ref, None


def resolve(model: Model, path: str) -> StageRef | Machine:
    """Resolve a qualified name to a stage reference or a machine.

    A trailing stage-kind segment yields a StageRef; otherwise the path
    must name a machine. Raises :class:`PathError` (code E101) on unknown
    segments.
    """
    segments = path.split(".")
    if segments and segments[-1] in STAGE_KINDS:
        ref, msg = _resolve_ref(path, model.machines_by_path)
        if ref is None:
            raise PathError(_error("E101", msg or f"unresolved path '{path}'", path))
        return ref
    if path == ENV_NAME:
        return _ENV_MACHINE
    walked: tuple[str, ...] = ()
    for seg in segments:
        walked = walked + (seg,)
        if walked not in model.machines_by_path:
            raise PathError(
                _error("E101", f"unresolved path '{path}': unknown segment '{seg}'", path)
            )
    return model.machines_by_path[walked]


def _require_ident(name: str, what: str) -> None:
    if not isinstance(name, str) or not _IDENT_RE.match(name) or name in RESERVED_WORDS:
        raise ValueError(f"{what} must be a non-reserved identifier, got {name!r}")


def _build_machines(
    decls: list[MachineDecl], diags: list[Diagnostic]
) -> tuple[Machine, ...]:
    def build_level(
        level: Iterable[MachineDecl], prefix: tuple[str, ...]
    ) -> tuple[Machine, ...]:
        out: list[Machine] = []
        seen: set[str] = set()
        for d in level:
            _require_ident(d.name, "machine name")
            if d.name == ENV_NAME:
                diags.append(
                    _error(
                        "E106",
                        f"machine name '{ENV_NAME}' is reserved for the environment",
                        d.span or ENV_NAME,
                    )
                )
                continue
            if d.name in seen:
                diags.append(
                    _error(
                        "E106",
                        f"duplicate machine '{'.'.join(prefix + (d.name,))}'",
                        d.span or ".".join(prefix + (d.name,)),
                    )
                )
                continue
            seen.add(d.name)
            path = prefix + (d.name,)
            out.append(Machine(d.name, path, build_level(d.children, path)))
        return tuple(out)

    return build_level(decls, ())


def _check_event_decl(
    model: Model,
    existing: dict[str, Event],
    decl: EventDecl,
) -> Event | list[Diagnostic]:
    """Check one event declaration against the static model (E301/E303)."""
    diags: list[Diagnostic] = []
    if decl.name in existing:
        diags.append(
            _error("E303", f"duplicate event name '{decl.name}'", decl.span or decl.name)
        )
    if not decl.items:
        diags.append(
            _error(
                "E301",
                f"event '{decl.name}': region is empty",
                decl.span or decl.name,
            )
        )
    used = set(model.used_stages)
    flows_by_key = {(e.thing, e.src, e.dst): e for e in model.flows}
    triggers_by_key = {(e.src, e.dst): e for e in model.triggers}
    items: list[RegionItem] = []

    def add(item: RegionItem) -> None:
        # the region is a set; repeated declarations collapse
        if item not in items:
            items.append(item)

    for item in decl.items:
        if isinstance(item, NodeItemDecl):
            ref, msg = _resolve_ref(item.ref, model.machines_by_path)
            if ref is None or ref not in used:
                diags.append(
                    _error(
                        "E301",
                        f"event '{decl.name}': no stage '{item.ref}' in use",
                        item.span or item.ref,
                    )
                )
                continue
            add(RegionNode(ref))
        elif isinstance(item, FlowItemDecl):
            src, _ = _resolve_ref(item.src, model.machines_by_path)
            dst, _ = _resolve_ref(item.dst, model.machines_by_path)
            edge = flows_by_key.get((item.thing, src, dst)) if src and dst else None
            if edge is None:
                diags.append(
                    _error(
                        "E301",
                        f"event '{decl.name}': no flow "
                        f"'{item.thing} {item.src} -> {item.dst}' in the model",
                        item.span or f"{item.src} -> {item.dst}",
                    )
                )
                continue
            add(RegionFlow(edge.id))
        else:
            src, _ = _resolve_ref(item.src, model.machines_by_path)
            dst, _ = _resolve_ref(item.dst, model.machines_by_path)
            edge = triggers_by_key.get((src, dst)) if src and dst else None
            if edge is None:
                diags.append(
                    _error(
                        "E301",
                        f"event '{decl.name}': no trigger "
                        f"'{item.src} ~> {item.dst}' in the model",
                        item.span or f"{item.src} ~> {item.dst}",
                    )
                )
                continue
            add(RegionTrigger(edge.id))
    if diags:
        return diags
    return Event(decl.name, decl.perpetual, tuple(items))


def _chronology_diagnostics(
    events: dict[str, Event], decl: ChronologyDecl
) -> tuple[Chronology | None, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    edges: list[tuple[str, str]] = []
    for a, b in decl.edges:
        missing = [n for n in (a, b) if n not in events]
        if missing:
            for n in missing:
                diags.append(
                    _error(
                        "E303",
                        f"unknown event '{n}' in chronology",
                        decl.span or n,
                    )
                )
            continue
        if (a, b) in edges:
            diags.append(
                _error(
                    "E106",
                    f"duplicate chronology edge '{a} -> {b}'",
                    decl.span or f"{a} -> {b}",
                )
            )
            continue
        edges.append((a, b))
    nodes = tuple(events)
    # One E302 per strongly connected component with a cycle.
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adjacency[a].append(b)
    for component in _tarjan_sccs(nodes, adjacency):
        cyclic = len(component) > 1 or any(
            n in adjacency[n] for n in component
        )
        if cyclic:
            path = _cycle_path(component, adjacency)
            diags.append(
                _error(
                    "E302",
                    "chronology cycle: " + " -> ".join(path),
                    decl.span or path[0],
                )
            )
    if any(d.is_error for d in diags):
        return None, diags
    return Chronology(nodes, tuple(edges)), diags


def _tarjan_sccs(
    nodes: tuple[str, ...], adjacency: dict[str, list[str]]
) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    sccs: list[list[str]] = []

    def strongconnect(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in adjacency[v]:
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            component = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                component.append(w)
                if w == v:
                    break
            sccs.append(component)

    for n in nodes:
        if n not in index:
            strongconnect(n)
    return sccs


def _cycle_path(component: list[str], adjacency: dict[str, list[str]]) -> list[str]:
    """One concrete cycle inside a cyclic strongly connected component."""
    members = set(component)
    start = component[-1]  # Tarjan pops the root last; deterministic
    path = [start]
    seen = {start}
    node = start
    while True:
        nxt = next(w for w in adjacency[node] if w in members)
        if nxt in seen:
            path.append(nxt)
            return path[path.index(nxt) :]
        path.append(nxt)
        seen.add(nxt)
        node = nxt


def build_model(name: str, elements: Iterable[Decl]) -> Model | list[Diagnostic]:
    """Assemble a model from raw element declarations.

    Returns the model if no error-severity diagnostics were found,
    otherwise the full list of diagnostics (never just the first).
    Malformed identifiers (which the language cannot even express) raise
    ValueError rather than producing diagnostics.
    """
    _require_ident(name, "model name")
    diags: list[Diagnostic] = []
    thing_decls: list[ThingDecl] = []
    machine_decls: list[MachineDecl] = []
    flow_decls: list[FlowDecl] = []
    trigger_decls: list[TriggerDecl] = []
    event_decls: list[EventDecl] = []
    chronology_decls: list[ChronologyDecl] = []
    for decl in elements:
        if isinstance(decl, ThingDecl):
            thing_decls.append(decl)
        elif isinstance(decl, MachineDecl):
            machine_decls.append(decl)
        elif isinstance(decl, FlowDecl):
            flow_decls.append(decl)
        elif isinstance(decl, TriggerDecl):
            trigger_decls.append(decl)
        elif isinstance(decl, EventDecl):
            event_decls.append(decl)
        elif isinstance(decl, ChronologyDecl):
            chronology_decls.append(decl)
        else:
            raise TypeError(f"not an element declaration: {decl!r}")

    things: list[Thing] = []
    for d in thing_decls:
        _require_ident(d.name, "thing name")
        if d.name in {t.name for t in things}:
            diags.append(_error("E106", f"duplicate thing '{d.name}'", d.span or d.name))
            continue
        things.append(Thing(d.name))

    roots = _build_machines(machine_decls, diags)
    machines_by_path: dict[tuple[str, ...], Machine] = {}

    def index_machine(m: Machine) -> None:
        machines_by_path[m.path] = m
        for c in m.children:
            index_machine(c)

    for r in roots:
        index_machine(r)

    thing_names = {t.name for t in things}
    flows: list[FlowEdge] = []
    seen_flows: set[tuple[str, StageRef, StageRef]] = set()
    for d in flow_decls:
        ok = True
        if d.thing not in thing_names:
            diags.append(
                _error("E101", f"unresolved path: unknown thing '{d.thing}'", d.span or d.thing)
            )
            ok = False
        src, msg = _resolve_ref(d.src, machines_by_path)
        if src is None:
            diags.append(_error("E101", msg or d.src, d.span or d.src))
            ok = False
        dst, msg = _resolve_ref(d.dst, machines_by_path)
        if dst is None:
            diags.append(_error("E101", msg or d.dst, d.span or d.dst))
            ok = False
        if not ok:
            continue
        assert src is not None and dst is not None
        if dst.kind is StageKind.CREATE:
            diags.append(
                _error("E104", f"flow into create stage '{dst}'", d.span or str(dst))
            )
            continue
        key = (d.thing, src, dst)
        if key in seen_flows:
            diags.append(
                _error(
                    "E106",
                    f"duplicate flow '{d.thing} {src} -> {dst}'",
                    d.span or f"{src} -> {dst}",
                )
            )
            continue
        seen_flows.add(key)
        flows.append(FlowEdge(f"f{len(flows) + 1}", d.thing, src, dst))

    triggers: list[TriggerEdge] = []
    seen_triggers: set[tuple[StageRef, StageRef]] = set()
    for d in trigger_decls:
        src, msg = _resolve_ref(d.src, machines_by_path)
        if src is None:
            diags.append(_error("E101", msg or d.src, d.span or d.src))
            continue
        dst, msg = _resolve_ref(d.dst, machines_by_path)
        if dst is None:
            diags.append(_error("E101", msg or d.dst, d.span or d.dst))
            continue
        key = (src, dst)
        if key in seen_triggers:
            diags.append(
                _error(
                    "E106",
                    f"duplicate trigger '{src} ~> {dst}'",
                    d.span or f"{src} ~> {dst}",
                )
            )
            continue
        seen_triggers.add(key)
        triggers.append(TriggerEdge(f"t{len(triggers) + 1}", src, dst))

    model = Model(
        name=name,
        things=tuple(things),
        root_machines=roots,
        flows=tuple(flows),
        triggers=tuple(triggers),
    )

    events: dict[str, Event] = {}
    for ed in event_decls:
        _require_ident(ed.name, "event name")
        result = _check_event_decl(model, events, ed)
        if isinstance(result, Event):
            events[result.name] = result
        else:
            diags.extend(result)

    chronology: Chronology | None = None
    if chronology_decls:
        if len(chronology_decls) > 1:
            for extra in chronology_decls[1:]:
                diags.append(
                    _error("E106", "duplicate chronology block", extra.span or "chronology")
                )
        chronology, cdiags = _chronology_diagnostics(events, chronology_decls[0])
        diags.extend(cdiags)

    if any(d.is_error for d in diags):
        return diags
    return replace(model, events=tuple(events.values()), chronology=chronology)


def validate(model: Model, *, lax: bool = False) -> list[Diagnostic]:
    """Report all legality violations of a structurally complete model.

    Pure: two calls on the same model return identical lists. With
    ``lax=True`` cross-boundary violations (E103) are downgraded to
    warnings, admitting figure-style shortcut flows.
    """
    diags: list[Diagnostic] = []
    for e in model.flows:
        same = e.src.path == e.dst.path
        if e.dst.kind is StageKind.CREATE:
            diags.append(_error("E104", f"flow into create stage '{e.dst}'", e.id))
        elif not same and not flow_legal(e.src.kind, e.dst.kind, False):
            make = _warning if lax else _error
            diags.append(
                make(
                    "E103",
                    f"flow crosses machine boundary without transfer: {e.src} -> {e.dst}",
                    e.id,
                )
            )
        elif same and not flow_legal(e.src.kind, e.dst.kind, True):
            diags.append(
                _error(
                    "E102",
                    f"illegal flow {e.src.kind} -> {e.dst.kind} within machine "
                    f"'{'.'.join(e.src.path)}'",
                    e.id,
                )
            )
    for t in model.triggers:
        if t.dst.kind not in (StageKind.CREATE, StageKind.PROCESS):
            diags.append(
                _error(
                    "E102",
                    f"trigger destination must be a create or process stage, "
                    f"got '{t.dst}'",
                    t.id,
                )
            )
    for ref in model.used_stages:
        ins = model.stage_in_things.get(ref, ())
        outs = model.stage_out_things.get(ref, ())
        if ins and outs and len(set(ins) | set(outs)) > 1:
            thing_in, thing_out = next(
                (a, b) for a in ins for b in outs if a != b
            )
            first_in = next(e for e in model.flows if e.dst == ref)
            diags.append(
                _error(
                    "E105",
                    f"thing identity break at '{ref}': '{thing_in}' flows in, "
                    f"'{thing_out}' flows out",
                    first_in.id,
                )
            )
    for t in model.triggers:
        shared = set(model.stage_things(t.src)) & set(model.stage_things(t.dst))
        if shared:
            thing = sorted(shared)[0]
            diags.append(
                _warning(
                    "W201",
                    f"trigger {t.src} ~> {t.dst} connects flows of the same "
                    f"thing '{thing}'",
                    t.id,
                )
            )
    touched: set[tuple[str, ...]] = set()
    for e in model.flows:
        touched.add(e.src.path)
        touched.add(e.dst.path)
    for t in model.triggers:
        touched.add(t.src.path)
        touched.add(t.dst.path)
    for m in model.machines:
        subtree_touched = any(
            p[: len(m.path)] == m.path for p in touched if p != (ENV_NAME,)
        )
        if not subtree_touched:
            diags.append(
                _warning("W202", f"machine '{m.id}' has no incident edges", m.id)
            )
    return diags
