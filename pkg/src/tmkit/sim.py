"""Deterministic execution of TM models under scenarios.

Operational semantics (fixed here so that runs are reproducible):

* A run advances in macro-steps numbered from 1. Scheduled injections are
  applied first in each step.
* Events are swept in declaration order. An unfired event fires when every
  chronology predecessor fired before this step and its region has work: a
  token sits on a region edge, a region trigger can be evaluated, or a
  region create stage would mint. Firing emits ``event_start``.
* A fired non-perpetual event runs its region to completion inside its
  firing step (repeated passes until a pass emits nothing) and then emits
  ``event_end``. A perpetual event never ends: it executes one region pass
  in its firing step and one more in every later step, re-minting its
  create stages each time.
* One region pass walks the region items in declaration order. A flow item
  moves every matching token one hop (one hop per micro-step). When the
  token's stage has two or more same-thing outgoing flows inside the same
  region, the next scenario choice for that stage decides the branch;
  running out of choices is an E401 hard error.
* A trigger item fires at most once per activation when a token occupies
  its source: a create destination mints (one token per thing carried by
  the destination's outgoing flows), a process destination is activated
  in place. Triggers whose destination carries a scenario gate first
  record the gate value and fire only if it is true. Create stages that
  are trigger destinations are never minted at event entry.
* Hops are recorded under the destination stage kind (process, release,
  transfer, receive); the generic ``move`` kind is accepted in traces but
  never produced by this engine. Tokens leave the system when they hop
  onto the environment transfer.
* The run terminates as quiescent when a step emits no entries, no future
  injections remain, and every non-perpetual event has fired; otherwise it
  stops at ``max_steps`` (reported as ``step_limit``, a normal outcome for
  models with perpetual events).

The engine is single-threaded by contract; traces and models are immutable
and may be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .core import (
    Chronology,
    Diagnostic,
    ENV_NAME,
    Event,
    Model,
    RegionFlow,
    RegionNode,
    RegionTrigger,
    StageKind,
    StageRef,
    parse_stage_ref,
    validate,
)
from .events import is_linear_extension

__all__ = [
    "Token",
    "Injection",
    "Scenario",
    "ScenarioError",
    "SimulationError",
    "TraceEntry",
    "EventTiming",
    "Trace",
    "SimState",
    "load_scenario",
    "init_state",
    "step",
    "simulate",
    "format_trace",
    "conforms",
]

_MAX_PASSES = 10_000  # defensive bound for run-to-completion of one event


class ScenarioError(ValueError):
    """A scenario references things, stages, or gates the model lacks."""


class SimulationError(RuntimeError):
    """Hard simulation failure, e.g. an unresolved choice (E401)."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class Token:
    """One manifestation of a thing, located at a stage."""

    id: str
    thing: str
    at: StageRef
    born_step: int


@dataclass(frozen=True)
class Injection:
    thing: str
    ref: StageRef
    step: int


@dataclass(frozen=True)
class Scenario:
    """External inputs that resolve all nondeterminism before a run.

    ``choices`` are (decision-point, branch) pairs consumed in file order
    per decision point; a decision point is the string form of a stage
    with two or more same-thing outgoing flows, a branch the string form
    of the chosen destination stage. ``gates`` map a trigger destination
    to a boolean; ungated triggers default to true.
    """

    injections: tuple[Injection, ...] = ()
    choices: tuple[tuple[str, str], ...] = ()
    gates: tuple[tuple[str, bool], ...] = ()
    max_steps: int = 100

    def gate_value(self, gate_id: str) -> bool | None:
        for key, value in self.gates:
            if key == gate_id:
                return value
        return None


@dataclass(frozen=True)
class TraceEntry:
    step: int
    kind: str
    subject: str
    detail: str


@dataclass(frozen=True)
class EventTiming:
    """Logical time sub-machine of one event for one run."""

    received_at: int
    released_at: int | None = None


@dataclass(frozen=True)
class Trace:
    """Ordered record of one run."""

    entries: tuple[TraceEntry, ...]
    fired_events: tuple[str, ...]
    terminated: str  # "quiescent" or "step_limit"
    warnings: tuple[str, ...] = ()
    timings: dict[str, EventTiming] = field(default_factory=dict)
    perpetual_events: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SimState:
    """Complete simulation state between macro-steps."""

    scenario: Scenario
    step_no: int = 0
    tokens: tuple[Token, ...] = ()
    next_token: int = 1
    fired: tuple[str, ...] = ()
    ended: frozenset[str] = frozenset()
    choice_taken: tuple[int, ...] = ()  # per decision point, in scenario key order
    timings: tuple[tuple[str, EventTiming], ...] = ()
    quiescent: bool = False


def load_scenario(text: str, filename: str = "<scenario>") -> Scenario:
    """Parse the flat key-value scenario format.

    Lines: ``inject <thing> <stageref> @<step>``, ``choose <stage> <stage>``,
    ``gate <gate-id> true|false``, ``max_steps <n>``; ``#`` comments.
    """
    injections: list[Injection] = []
    choices: list[tuple[str, str]] = []
    gates: list[tuple[str, bool]] = []
    max_steps = 100
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        where = f"{filename}:{lineno}"
        if parts[0] == "inject" and len(parts) == 4 and parts[3].startswith("@"):
            try:
                ref = parse_stage_ref(parts[2])
                at = int(parts[3][1:])
            except ValueError as exc:
                raise ScenarioError(f"{where}: {exc}") from None
            if at < 1:
                raise ScenarioError(f"{where}: injection step must be >= 1")
            injections.append(Injection(parts[1], ref, at))
        elif parts[0] == "choose" and len(parts) == 3:
            choices.append((parts[1], parts[2]))
        elif parts[0] == "gate" and len(parts) == 3 and parts[2] in ("true", "false"):
            gates.append((parts[1], parts[2] == "true"))
        elif parts[0] == "max_steps" and len(parts) == 2:
            try:
                max_steps = int(parts[1])
            except ValueError:
                raise ScenarioError(f"{where}: max_steps needs an integer") from None
            if max_steps < 1:
                raise ScenarioError(f"{where}: max_steps must be >= 1")
        else:
            raise ScenarioError(f"{where}: unrecognized scenario line: {raw.strip()!r}")
    return Scenario(tuple(injections), tuple(choices), tuple(gates), max_steps)


def _decision_points(model: Model) -> dict[str, list[StageRef]]:
    """Stages with two or more same-thing outgoing flows, with branch dsts."""
    fanout: dict[tuple[StageRef, str], list[StageRef]] = {}
    for e in model.flows:
        fanout.setdefault((e.src, e.thing), []).append(e.dst)
    points: dict[str, list[StageRef]] = {}
    for (src, _thing), dsts in fanout.items():
        if len(dsts) >= 2:
            points.setdefault(str(src), []).extend(dsts)
    return points

def _check_scenario(model: Model, scenario: Scenario) -> None:
    """Hard-fail on scenario keys that name nothing in the model."""
    points = _decision_points(model)
    for key, branch in scenario.choices:
        if key not in points:
            raise ScenarioError(
                f"choice key '{key}' is not a decision point of the model"
            )
        if branch not in {str(d) for d in points[key]}:
            raise ScenarioError(
                f"choice branch '{branch}' is not an outgoing flow of '{key}'"
            )
    trigger_dsts = {str(t.dst) for t in model.triggers}
    for gate_id, _ in scenario.gates:
        if gate_id not in trigger_dsts:
            raise ScenarioError(
                f"gate '{gate_id}' does not name a trigger destination"
            )
    for inj in scenario.injections:
        if inj.thing not in model.things_by_name:
            raise ScenarioError(f"injection of unknown thing '{inj.thing}'")
        if not inj.ref.is_env or inj.ref.kind is not StageKind.TRANSFER:
            raise ScenarioError(
                f"injections enter at '{ENV_NAME}.transfer', got '{inj.ref}'"
            )
    if scenario.max_steps < 1:
        raise ScenarioError("max_steps must be >= 1")


class _Engine:
    """Mutable working copy of a SimState for executing one macro-step."""

    def __init__(self, model: Model, state: SimState):
        self.model = model
        self.scenario = state.scenario
        self.tokens: list[Token] = list(state.tokens)
        self.next_token = state.next_token
        self.fired: list[str] = list(state.fired)
        self.ended: set[str] = set(state.ended)
        self.timings: dict[str, EventTiming] = dict(state.timings)
        self.choice_keys: list[str] = []
        self.choice_queues: dict[str, list[str]] = {}
        for key, branch in state.scenario.choices:
            if key not in self.choice_queues:
                self.choice_keys.append(key)
                self.choice_queues[key] = []
            self.choice_queues[key].append(branch)
        self.choice_next: dict[str, int] = {
            key: taken
            for key, taken in zip(self.choice_keys, state.choice_taken)
        }
        for key in self.choice_keys:
            self.choice_next.setdefault(key, 0)
        self.entries: list[TraceEntry] = []
        self.step_no = state.step_no

    # -- state snapshot ------------------------------------------------------

    def snapshot(self, quiescent: bool) -> SimState:
        return SimState(
            scenario=self.scenario,
            step_no=self.step_no,
            tokens=tuple(self.tokens),
            next_token=self.next_token,
            fired=tuple(self.fired),
            ended=frozenset(self.ended),
            choice_taken=tuple(self.choice_next[k] for k in self.choice_keys),
            timings=tuple(self.timings.items()),
            quiescent=quiescent,
        )

    # -- helpers -------------------------------------------------------------

    def emit(self, kind: str, subject: str, detail: str) -> None:
        self.entries.append(TraceEntry(self.step_no, kind, subject, detail or "-"))

    def mint(self, thing: str, ref: StageRef, via: str) -> Token:
        token = Token(f"tok{self.next_token}", thing, ref, self.step_no)
        self.next_token += 1
        self.tokens.append(token)
        self.emit("create", token.id, f"{thing} @ {ref} via {via}")
        return token

    def tokens_at(self, ref: StageRef, thing: str | None = None) -> list[Token]:
        return [
            t
            for t in self.tokens
            if t.at == ref and (thing is None or t.thing == thing)
        ]

    def move(self, token: Token, dst: StageRef) -> None:
        moved = replace(token, at=dst)
        self.tokens[self.tokens.index(token)] = moved
        self.emit(dst.kind.value, token.id, f"{token.thing}: {token.at} -> {dst}")
        if dst.is_env:
            self.tokens.remove(moved)

    def take_choice(self, key: str) -> str:
        queue = self.choice_queues.get(key, [])
        index = self.choice_next.get(key, 0)
        if index >= len(queue):
            raise SimulationError(
                Diagnostic(
                    "E401",
                    "error",
                    key,
                    f"no choice left for decision point '{key}'",
                )
            )
        self.choice_next[key] = index + 1
        branch = queue[index]
        self.emit("choice", key, f"-> {branch}")
        return branch

    # -- region mechanics ------------------------------------------------------

    def trigger_destinations(self) -> set[StageRef]:
        return {t.dst for t in self.model.triggers}

    def region_mints(self, event: Event) -> list[tuple[str, StageRef]]:
        """(thing, create-stage) pairs minted when the event (re-)enters."""
        blocked = self.trigger_destinations()
        out: list[tuple[str, StageRef]] = []
        for fid in event.flow_ids:
            edge = self.model.flows_by_id[fid]
            if edge.src.kind is StageKind.CREATE and edge.src not in blocked:
                pair = (edge.thing, edge.src)
                if pair not in out:
                    out.append(pair)
        return out

    def mint_entry_creates(self, event: Event) -> None:
        for thing, ref in self.region_mints(event):
            self.mint(thing, ref, event.name)

    def region_fanout(self, event: Event, src: StageRef, thing: str) -> list[str]:
        """Region flow edges leaving src with the same thing, by id."""
        out = []
        for fid in event.flow_ids:
            edge = self.model.flows_by_id[fid]
            if edge.src == src and edge.thing == thing:
                out.append(fid)
        return out

    def run_pass(self, event: Event, spent_triggers: set[str]) -> bool:
        """One declaration-order pass over the region. True if it emitted."""
        before = len(self.entries)
        handled_fanouts: set[tuple[StageRef, str]] = set()
        for item in event.items:
            if isinstance(item, RegionFlow):
                edge = self.model.flows_by_id[item.edge_id]
                fanout = self.region_fanout(event, edge.src, edge.thing)
                if len(fanout) >= 2:
                    group_key = (edge.src, edge.thing)
                    if group_key in handled_fanouts:
                        continue
                    handled_fanouts.add(group_key)
                    for token in list(self.tokens_at(edge.src, edge.thing)):
                        branch = self.take_choice(str(edge.src))
                        chosen = next(
                            (
                                self.model.flows_by_id[fid]
                                for fid in fanout
                                if str(self.model.flows_by_id[fid].dst) == branch
                            ),
                            None,
                        )
                        if chosen is None:
                            raise SimulationError(
                                Diagnostic(
                                    "E401",
                                    "error",
                                    str(edge.src),
                                    f"choice branch '{branch}' does not match a "
                                    f"region flow at '{edge.src}'",
                                )
                            )
                        self.move(token, chosen.dst)
                else:
                    for token in list(self.tokens_at(edge.src, edge.thing)):
                        self.move(token, edge.dst)
            elif isinstance(item, RegionTrigger):
                if item.edge_id in spent_triggers:
                    continue
                edge = self.model.triggers_by_id[item.edge_id]
                if not self.tokens_at(edge.src):
                    continue
                spent_triggers.add(item.edge_id)
                gate_id = str(edge.dst)
                gate = self.scenario.gate_value(gate_id)
                if gate is not None:
                    self.emit("gate", gate_id, "true" if gate else "false")
                    if not gate:
                        continue
                self.emit("trigger", edge.id, f"{edge.src} ~> {edge.dst}")
                if edge.dst.kind is StageKind.CREATE:
                    for thing in self.create_things(edge.dst):
                        self.mint(thing, edge.dst, edge.id)
        return len(self.entries) > before

    def create_things(self, ref: StageRef) -> list[str]:
        """Things minted at a create stage: those its outgoing flows carry."""
        out: list[str] = []
        for e in self.model.flows:
            if e.src == ref and e.thing not in out:
                out.append(e.thing)
        return out

    def has_work(self, event: Event) -> bool:
        """Whether firing the event now would emit anything."""
        if self.region_mints(event):
            return True
        for item in event.items:
            if isinstance(item, RegionFlow):
                edge = self.model.flows_by_id[item.edge_id]
                if self.tokens_at(edge.src, edge.thing):
                    return True
            elif isinstance(item, RegionTrigger):
                edge = self.model.triggers_by_id[item.edge_id]
                if self.tokens_at(edge.src):
                    return True
            elif isinstance(item, RegionNode):
                if self.tokens_at(item.ref):
                    return True
        return False

    def eligible(self, event: Event, fired_before: frozenset[str]) -> bool:
        chronology = self.model.chronology
        if chronology is None:
            return True
        return all(p in fired_before for p in chronology.predecessors(event.name))

    # -- one macro-step ----------------------------------------------------------

    def run_step(self) -> None:
        self.step_no += 1
        for inj in self.scenario.injections:
            if inj.step == self.step_no:
                self.mint(inj.thing, inj.ref, "injection")
        fired_before = frozenset(self.fired)
        for event in self.model.events:
            if event.name in self.fired:
                if event.perpetual:
                    self.mint_entry_creates(event)
                    self.run_pass(event, set())
                continue
            if not self.eligible(event, fired_before):
                continue
            if not self.has_work(event):
                continue
            self.emit("event_start", event.name, "perpetual" if event.perpetual else "")
            self.fired.append(event.name)
            self.timings[event.name] = EventTiming(received_at=self.step_no)
            self.mint_entry_creates(event)
            if event.perpetual:
                self.run_pass(event, set())
            else:
                spent: set[str] = set()
                for _ in range(_MAX_PASSES):
                    if not self.run_pass(event, spent):
                        break
                else:
                    raise SimulationError(
                        Diagnostic(
                            "E402",
                            "error",
                            event.name,
                            f"event '{event.name}' did not run to completion",
                        )
                    )
                self.emit("event_end", event.name, "")
                self.ended.add(event.name)
                self.timings[event.name] = EventTiming(
                    received_at=self.timings[event.name].received_at,
                    released_at=self.step_no,
                )


def init_state(model: Model, scenario: Scenario, *, lax: bool = False) -> SimState:
    """Validate inputs and produce the initial simulation state."""
    errors = [d for d in validate(model, lax=lax) if d.is_error]
    if errors:
        raise ValueError(
            "model does not validate: " + "; ".join(str(d) for d in errors)
        )
    _check_scenario(model, scenario)
    return SimState(scenario=scenario)


def step(model: Model, state: SimState) -> tuple[SimState, list[TraceEntry]]:
    """Run exactly one macro-step. Stepping a quiescent state is a no-op."""
    if state.quiescent:
        return state, []
    engine = _Engine(model, state)
    engine.run_step()
    future_injections = any(
        inj.step > engine.step_no for inj in state.scenario.injections
    )
    all_fired = all(
        e.name in engine.fired for e in model.events if not e.perpetual
    )
    quiescent = not engine.entries and not future_injections and all_fired
    return engine.snapshot(quiescent), engine.entries


def simulate(model: Model, scenario: Scenario, *, lax: bool = False) -> Trace:
    """Run a scenario to quiescence or to its step limit.

    Deterministic: identical inputs produce identical traces. Unconsumed
    scenario choices are reported as warnings; running out of choices at
    a decision point raises :class:`SimulationError` (E401).
    """
    state = init_state(model, scenario, lax=lax)
    entries: list[TraceEntry] = []
    terminated = "step_limit"
    for _ in range(scenario.max_steps):
        state, new_entries = step(model, state)
        entries.extend(new_entries)
        if state.quiescent:
            terminated = "quiescent"
            break
    warnings: list[str] = []
    key_order = list(dict.fromkeys(key for key, _ in scenario.choices))
    taken = dict(zip(key_order, state.choice_taken))
    for key in key_order:
        total = sum(1 for k, _ in scenario.choices if k == key)
        used = taken.get(key, 0)
        if used < total:
            warnings.append(
                f"unconsumed choices for '{key}': {total - used} of {total} left"
            )
    return Trace(
        entries=tuple(entries),
        fired_events=tuple(state.fired),
        terminated=terminated,
        warnings=tuple(warnings),
        timings=dict(state.timings),
        perpetual_events=frozenset(
            e.name for e in model.events if e.perpetual and e.name in state.fired
        ),
    )


def format_trace(trace: Trace) -> str:
    """Byte-stable text form: one tab-separated entry per line."""
    lines = [
        f"{e.step}\t{e.kind}\t{e.subject}\t{e.detail}" for e in trace.entries
    ]
    lines.append(f"terminated={trace.terminated}")
    return "\n".join(lines) + "\n"


def conforms(trace: Trace, chronology: Chronology) -> bool:
    """Whether a trace's event order respects the chronology.

    Every fired event must be a chronology node (hard error otherwise) and
    must fire after all of its predecessors; the non-perpetual subsequence
    must be a linear extension of the induced sub-DAG. The empty trace
    conforms vacuously.
    """
    nodes = set(chronology.nodes)
    for name in trace.fired_events:
        if name not in nodes:
            raise ValueError(f"unknown event id '{name}' in trace")
    position = {name: i for i, name in enumerate(trace.fired_events)}
    for name in trace.fired_events:
        for pred in chronology.predecessors(name):
            if pred not in position or position[pred] >= position[name]:
                return False
    subsequence = tuple(
        n for n in trace.fired_events if n not in trace.perpetual_events
    )
    sub_nodes = set(subsequence)
    induced = Chronology(
        nodes=subsequence,
        edges=tuple(
            (a, b) for a, b in chronology.edges if a in sub_nodes and b in sub_nodes
        ),
    )
    return is_linear_extension(induced, subsequence)
