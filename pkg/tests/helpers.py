"""Shared test fixtures: corpus loading, independent oracles, model generator."""

from __future__ import annotations

import random
from pathlib import Path

from tmkit.cli import corpus_dir
from tmkit.core import (
    ChronologyDecl,
    EventDecl,
    FlowDecl,
    FlowItemDecl,
    MachineDecl,
    Model,
    NodeItemDecl,
    RegionFlow,
    RegionNode,
    RegionTrigger,
    ThingDecl,
    TriggerDecl,
    TriggerItemDecl,
    build_model,
)
from tmkit.dsl import parse
from tmkit.sim import Scenario, load_scenario

CORPUS_NAMES = ("reservoir", "kant_ci", "murderer", "islamic")


def corpus_path(filename: str) -> Path:
    return corpus_dir() / filename


def load_corpus_model(name: str) -> Model:
    result = parse(corpus_path(f"{name}.tm").read_text(), f"{name}.tm")
    assert result.model is not None, [str(d) for d in result.diagnostics]
    return result.model


def load_corpus_scenario(name: str) -> Scenario:
    return load_scenario(corpus_path(f"{name}.scn").read_text(), f"{name}.scn")


# ---------------------------------------------------------------------------
# Structural equality oracle: field-walking comparison written independently
# of the dataclass __eq__ it is used to check.


def models_equal(a: Model, b: Model) -> bool:
    if a.name != b.name:
        return False
    if [t.name for t in a.things] != [t.name for t in b.things]:
        return False

    def tree(machine):
        return (machine.name, tuple(tree(c) for c in machine.children))

    if tuple(tree(m) for m in a.root_machines) != tuple(tree(m) for m in b.root_machines):
        return False
    if [(e.thing, str(e.src), str(e.dst)) for e in a.flows] != [
        (e.thing, str(e.src), str(e.dst)) for e in b.flows
    ]:
        return False
    if [(str(t.src), str(t.dst)) for t in a.triggers] != [
        (str(t.src), str(t.dst)) for t in b.triggers
    ]:
        return False

    def event_shape(model, event):
        shape = [event.name, event.perpetual]
        for item in event.items:
            if isinstance(item, RegionNode):
                shape.append(("node", str(item.ref)))
            elif isinstance(item, RegionFlow):
                edge = model.flows_by_id[item.edge_id]
                shape.append(("flow", edge.thing, str(edge.src), str(edge.dst)))
            elif isinstance(item, RegionTrigger):
                edge = model.triggers_by_id[item.edge_id]
                shape.append(("trigger", str(edge.src), str(edge.dst)))
        return tuple(shape)

    if tuple(event_shape(a, e) for e in a.events) != tuple(
        event_shape(b, e) for e in b.events
    ):
        return False
    chron_a = None if a.chronology is None else (a.chronology.nodes, a.chronology.edges)
    chron_b = None if b.chronology is None else (b.chronology.nodes, b.chronology.edges)
    return chron_a == chron_b


# ---------------------------------------------------------------------------
# Random valid model generator for round-trip testing. Each thing gets a
# chain over its own disjoint set of machines, so generated models always
# validate with zero errors in strict mode.


def random_valid_model(seed: int) -> Model:
    rng = random.Random(seed)
    n_things = rng.randint(1, 4)
    things = [f"thing{i}" for i in range(1, n_things + 1)]

    decls: list = [ThingDecl(t) for t in things]
    machine_names: list[list[str]] = []  # per thing: its private machine chain
    counter = 0
    machine_decls = []
    for _ in things:
        chain_len = rng.randint(1, 3)
        chain = []
        for _ in range(chain_len):
            counter += 1
            name = f"m{counter}"
            if rng.random() < 0.3:
                counter += 1
                child = MachineDecl(f"m{counter}")
                machine_decls.append(MachineDecl(name, (child,)))
            else:
                machine_decls.append(MachineDecl(name))
            chain.append(name)
        machine_names.append(chain)
    decls.extend(machine_decls)

    flow_decls: list[FlowDecl] = []
    thing_stages: list[list[str]] = []
    for thing, chain in zip(things, machine_names):
        stages: list[str] = []

        def hop(src: str, dst: str) -> None:
            flow_decls.append(FlowDecl(thing, src, dst))
            for ref in (src, dst):
                if ref not in stages:
                    stages.append(ref)

        first = chain[0]
        hop(f"{first}.create", f"{first}.release")
        if rng.random() < 0.5:
            # create feeds process before release
            flow_decls.pop()
            stages.clear()
            hop(f"{first}.create", f"{first}.process")
            hop(f"{first}.process", f"{first}.release")
        hop(f"{first}.release", f"{first}.transfer")
        prev = first
        for nxt in chain[1:]:
            hop(f"{prev}.transfer", f"{nxt}.transfer")
            hop(f"{nxt}.transfer", f"{nxt}.receive")
            if rng.random() < 0.5:
                hop(f"{nxt}.receive", f"{nxt}.process")
                hop(f"{nxt}.process", f"{nxt}.release")
            else:
                hop(f"{nxt}.receive", f"{nxt}.release")
            hop(f"{nxt}.release", f"{nxt}.transfer")
            prev = nxt
        if rng.random() < 0.4:
            hop(f"{prev}.transfer", "env.transfer")
        thing_stages.append(stages)
    decls.extend(flow_decls)

    trigger_decls: list[TriggerDecl] = []
    if n_things >= 2:
        for _ in range(rng.randint(0, 3)):
            a, b = rng.sample(range(n_things), 2)
            src = rng.choice(thing_stages[a])
            dst_options = [
                s
                for s in thing_stages[b]
                if s.endswith(".create") or s.endswith(".process")
            ]
            if not dst_options:
                continue
            dst = rng.choice(dst_options)
            if any(t.src == src and t.dst == dst for t in trigger_decls):
                continue
            trigger_decls.append(TriggerDecl(src, dst))
    decls.extend(trigger_decls)

    event_names: list[str] = []
    if rng.random() < 0.8 and flow_decls:
        n_events = rng.randint(1, 3)
        edges = list(flow_decls)
        rng.shuffle(edges)
        slab = max(1, len(edges) // n_events)
        for i in range(n_events):
            chunk = edges[i * slab : (i + 1) * slab]
            if not chunk:
                continue
            items: list = [FlowItemDecl(f.thing, f.src, f.dst) for f in chunk]
            if trigger_decls and rng.random() < 0.5:
                t = rng.choice(trigger_decls)
                items.append(TriggerItemDecl(t.src, t.dst))
            if rng.random() < 0.3:
                items.insert(0, NodeItemDecl(chunk[0].src))
            name = f"ev{i + 1}"
            event_names.append(name)
            decls.append(EventDecl(name, rng.random() < 0.3, tuple(items)))
    if len(event_names) >= 2 and rng.random() < 0.7:
        chron_edges = []
        for i in range(len(event_names)):
            for j in range(i + 1, len(event_names)):
                if rng.random() < 0.5:
                    chron_edges.append((event_names[i], event_names[j]))
        decls.append(ChronologyDecl(tuple(chron_edges)))

    model = build_model(f"gen{seed}", decls)
    assert isinstance(model, Model), [str(d) for d in model]
    return model
