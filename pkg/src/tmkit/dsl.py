"""Textual TM language: parser with source-located diagnostics, canonical serializer.

Grammar (normative, also documented in the README language reference)::

    model      := "model" IDENT item* ;
    item       := "thing" IDENT | machine | flow | trigger | event | chronology ;
    machine    := "machine" IDENT ("{" machine* "}")? ;
    flow       := "flow" IDENT(thing) stageref "->" stageref ;
    trigger    := "trigger" stageref "~>" stageref ;
    stageref   := IDENT ("." IDENT)* "." STAGEKIND ;
    STAGEKIND  := "create" | "process" | "release" | "transfer" | "receive" ;
    event      := "event" IDENT ("perpetual")? "{"
                      ("node" stageref
                      | "flow" IDENT stageref "->" stageref
                      | "trigger" stageref "~>" stageref)* "}" ;
    chronology := "chronology" "{" (IDENT "->" IDENT)* "}" ;

Comments run from ``#`` to end of line. Identifiers match
``[A-Za-z_][A-Za-z0-9_]*``; keywords and stage kinds are reserved. The
machine name ``env`` is reserved and implicitly declared.

``->`` mirrors solid flow arrows, ``~>`` dashed triggers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ChronologyDecl,
    Decl,
    Diagnostic,
    EventDecl,
    FlowDecl,
    FlowItemDecl,
    MachineDecl,
    Model,
    NodeItemDecl,
    RESERVED_WORDS,
    RegionFlow,
    RegionNode,
    RegionTrigger,
    STAGE_KINDS,
    ThingDecl,
    TriggerDecl,
    TriggerItemDecl,
    build_model,
    validate,
)

__all__ = ["SourceSpan", "ParseResult", "parse", "serialize"]

_ITEM_KEYWORDS = {"thing", "machine", "flow", "trigger", "event", "chronology"}
_KEYWORDS = RESERVED_WORDS


@dataclass(frozen=True)
class SourceSpan:
    """1-based source location of a parsed construct or diagnostic."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class ParseResult:
    """Outcome of a parse: a model iff no error-severity diagnostics."""

    model: Model | None
    diagnostics: list[Diagnostic]


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident", "kw", "{", "}", "->", "~>", ".", "error", "eof"
    text: str
    line: int
    col: int
    end_line: int
    end_col: int
    bol: bool  # first token on its line


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    bol = True

    def push(kind: str, tok_text: str, length: int | None = None) -> None:
        nonlocal bol
        width = length if length is not None else len(tok_text)
        tokens.append(_Token(kind, tok_text, line, col, line, col + width - 1, bol))
        bol = False

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            bol = True
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            push("kw" if word in _KEYWORDS else "ident", word)
            col += j - i
            i = j
            continue
        if c == "{" or c == "}":
            push(c, c)
            i += 1
            col += 1
            continue
        if c == ".":
            push(".", c)
            i += 1
            col += 1
            continue
        if c == "-" and i + 1 < n and text[i + 1] == ">":
            push("->", "->")
            i += 2
            col += 2
            continue
        if c == "~" and i + 1 < n and text[i + 1] == ">":
            push("~>", "~>")
            i += 2
            col += 2
            continue
        push("error", c)
        i += 1
        col += 1
    tokens.append(_Token("eof", "", line, col, line, col, bol))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.decls: list[Decl] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def span_of(self, tok: _Token, end: _Token | None = None) -> SourceSpan:
        last = end or tok
        return SourceSpan(self.file, tok.line, tok.col, last.end_line, last.end_col)

    def error_here(self, message: str) -> None:
        tok = self.peek()
        if tok.kind == "eof" and self.pos > 0:
            # point at the last real token, e.g. a dangling arrow
            tok = self.tokens[self.pos - 1]
        self.diagnostics.append(
            Diagnostic("E001", "error", self.span_of(tok), f"syntax error: {message}")
        )

    def resync(self) -> None:
        """Skip to the next line that starts a new item (or EOF)."""
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.bol and (
                (tok.kind == "kw" and tok.text in _ITEM_KEYWORDS | {"model"})
                or tok.kind == "}"
            ):
                return
            self.advance()

    def expect_kw(self, word: str) -> _Token | None:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == word:
            return self.advance()
        self.error_here(f"expected '{word}', found {tok.text!r}" if tok.text else f"expected '{word}'")
        return None

    def expect_ident(self, what: str) -> _Token | None:
        tok = self.peek()
        if tok.kind == "ident":
            return self.advance()
        found = repr(tok.text) if tok.text else "end of input"
        self.error_here(f"expected {what}, found {found}")
        return None

    def expect(self, kind: str) -> _Token | None:
        tok = self.peek()
        if tok.kind == kind:
            return self.advance()
        found = repr(tok.text) if tok.text else "end of input"
        self.error_here(f"expected '{kind}', found {found}")
        return None

    # -- grammar -----------------------------------------------------------

    def parse(self) -> tuple[str | None, list[Decl], list[Diagnostic]]:
        name: str | None = None
        if self.expect_kw("model") is not None:
            tok = self.expect_ident("model name")
            if tok is not None:
                name = tok.text
        if name is None:
            self.resync()
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                break
            if tok.kind != "kw" or tok.text not in _ITEM_KEYWORDS:
                self.error_here(f"expected an item keyword, found {tok.text!r}")
                self.advance()
                self.resync()
                continue
            handler = {
                "thing": self.parse_thing,
                "machine": self.parse_machine,
                "flow": self.parse_flow,
                "trigger": self.parse_trigger,
                "event": self.parse_event,
                "chronology": self.parse_chronology,
            }[tok.text]
            before = len(self.diagnostics)
            decl = handler()
            if decl is not None:
                self.decls.append(decl)
            elif len(self.diagnostics) > before:
                self.resync()
        return name, self.decls, self.diagnostics

    def parse_thing(self) -> ThingDecl | None:
        start = self.advance()
        tok = self.expect_ident("thing name")
        if tok is None:
            return None
        return ThingDecl(tok.text, self.span_of(start, tok))

    def parse_machine(self) -> MachineDecl | None:
        start = self.advance()
        tok = self.expect_ident("machine name")
        if tok is None:
            return None
        children: list[MachineDecl] = []
        end = tok
        if self.peek().kind == "{":
            self.advance()
            while True:
                inner = self.peek()
                if inner.kind == "}":
                    end = self.advance()
                    break
                if inner.kind == "eof":
                    self.error_here("unterminated machine block, expected '}'")
                    return None
                if inner.kind == "kw" and inner.text == "machine":
                    child = self.parse_machine()
                    if child is None:
                        return None
                    children.append(child)
                else:
                    self.error_here(
                        f"expected 'machine' or '}}' inside machine block, found {inner.text!r}"
                    )
                    return None
        return MachineDecl(tok.text, tuple(children), self.span_of(start, end))

    def parse_stage_ref(self) -> tuple[str, _Token, _Token] | None:
        """Parse a dotted stage reference, returning (text, first, last)."""
        first = self.peek()
        segments: list[str] = []
        while True:
            tok = self.peek()
            if tok.kind == "ident" or (tok.kind == "kw" and tok.text in STAGE_KINDS):
                self.advance()
                segments.append(tok.text)
            else:
                found = repr(tok.text) if tok.text else "end of input"
                self.error_here(f"expected a stage reference segment, found {found}")
                return None
            if self.peek().kind == ".":
                self.advance()
                continue
            break
        last = self.tokens[self.pos - 1]
        if segments[-1] not in STAGE_KINDS:
            self.diagnostics.append(
                Diagnostic(
                    "E001",
                    "error",
                    self.span_of(first, last),
                    "syntax error: stage reference must end in a stage kind "
                    "(create, process, release, transfer, receive)",
                )
            )
            return None
        if len(segments) < 2:
            self.diagnostics.append(
                Diagnostic(
                    "E001",
                    "error",
                    self.span_of(first, last),
                    "syntax error: stage reference needs a machine path",
                )
            )
            return None
        if any(seg in STAGE_KINDS for seg in segments[:-1]):
            self.diagnostics.append(
                Diagnostic(
                    "E001",
                    "error",
                    self.span_of(first, last),
                    "syntax error: stage kinds may only end a stage reference",
                )
            )
            return None
        return ".".join(segments), first, last

    def parse_flow(self) -> FlowDecl | None:
        start = self.advance()
        thing = self.expect_ident("thing name")
        if thing is None:
            return None
        src = self.parse_stage_ref()
        if src is None:
            return None
        if self.expect("->") is None:
            return None
        dst = self.parse_stage_ref()
        if dst is None:
            return None
        return FlowDecl(thing.text, src[0], dst[0], self.span_of(start, dst[2]))

    def parse_trigger(self) -> TriggerDecl | None:
        start = self.advance()
        src = self.parse_stage_ref()
        if src is None:
            return None
        if self.expect("~>") is None:
            return None
        dst = self.parse_stage_ref()
        if dst is None:
            return None
        return TriggerDecl(src[0], dst[0], self.span_of(start, dst[2]))

    def parse_event(self) -> EventDecl | None:
        start = self.advance()
        name = self.expect_ident("event name")
        if name is None:
            return None
        perpetual = False
        if self.peek().kind == "kw" and self.peek().text == "perpetual":
            self.advance()
            perpetual = True
        if self.expect("{") is None:
            return None
        items: list[object] = []
        while True:
            tok = self.peek()
            if tok.kind == "}":
                end = self.advance()
                break
            if tok.kind == "eof":
                self.error_here("unterminated event block, expected '}'")
                return None
            if tok.kind == "kw" and tok.text == "node":
                item_start = self.advance()
                ref = self.parse_stage_ref()
                if ref is None:
                    return None
                items.append(NodeItemDecl(ref[0], self.span_of(item_start, ref[2])))
            elif tok.kind == "kw" and tok.text == "flow":
                flow = self.parse_flow()
                if flow is None:
                    return None
                items.append(FlowItemDecl(flow.thing, flow.src, flow.dst, flow.span))
            elif tok.kind == "kw" and tok.text == "trigger":
                trig = self.parse_trigger()
                if trig is None:
                    return None
                items.append(TriggerItemDecl(trig.src, trig.dst, trig.span))
            else:
                self.error_here(
                    f"expected 'node', 'flow', 'trigger' or '}}' inside event, "
                    f"found {tok.text!r}"
                )
                return None
        return EventDecl(name.text, perpetual, tuple(items), self.span_of(start, end))

    def parse_chronology(self) -> ChronologyDecl | None:
        start = self.advance()
        if self.expect("{") is None:
            return None
        edges: list[tuple[str, str]] = []
        while True:
            tok = self.peek()
            if tok.kind == "}":
                end = self.advance()
                break
            if tok.kind == "eof":
                self.error_here("unterminated chronology block, expected '}'")
                return None
            before = self.expect_ident("event name")
            if before is None:
                return None
            if self.expect("->") is None:
                return None
            after = self.expect_ident("event name")
            if after is None:
                return None
            edges.append((before.text, after.text))
        return ChronologyDecl(tuple(edges), self.span_of(start, end))


def parse(text: str, filename: str = "<string>", *, lax: bool = False) -> ParseResult:
    """Parse TM source text into a validated model.

    The result carries a model only when neither parsing, building, nor
    validation produced an error; all diagnostics carry source spans.
    ``lax`` is wired to the relaxed boundary rule of validation (E103
    becomes a warning).
    """
    tokens = _lex(text)
    parser = _Parser(tokens, filename)
    name, decls, diagnostics = parser.parse()
    if name is None:
        return ParseResult(None, diagnostics)
    built = build_model(name, decls)
    if isinstance(built, list):
        return ParseResult(None, diagnostics + built)
    span_map = _element_spans(built, decls)
    vdiags = [
        Diagnostic(d.code, d.severity, span_map.get(d.location, d.location), d.message)
        for d in validate(built, lax=lax)
    ]
    all_diags = diagnostics + vdiags
    model = built if not any(d.is_error for d in all_diags) else None
    return ParseResult(model, all_diags)


def _element_spans(model: Model, decls: list[Decl]) -> dict[object, object]:
    """Map element ids to the source spans of their declarations."""
    spans: dict[object, object] = {}
    flow_index = 0
    trigger_index = 0
    for decl in decls:
        if isinstance(decl, FlowDecl):
            flow_index += 1
            spans[f"f{flow_index}"] = decl.span
        elif isinstance(decl, TriggerDecl):
            trigger_index += 1
            spans[f"t{trigger_index}"] = decl.span
        elif isinstance(decl, MachineDecl):
            _machine_spans(decl, (), spans)
        elif isinstance(decl, (ThingDecl, EventDecl)):
            spans[decl.name] = decl.span
    return spans


def _machine_spans(
    decl: MachineDecl, prefix: tuple[str, ...], spans: dict[object, object]
) -> None:
    path = prefix + (decl.name,)
    spans[".".join(path)] = decl.span
    for child in decl.children:
        _machine_spans(child, path, spans)


def serialize(model: Model) -> str:
    """Emit the canonical text form of a model.

    Canonical order: things, machines (depth-first), flows, triggers,
    events, chronology, each group in declaration order; one item per
    line; two-space indentation for nested content; byte-deterministic.
    """
    lines: list[str] = [f"model {model.name}"]
    for thing in model.things:
        lines.append(f"thing {thing.name}")

    def emit_machine(machine, depth: int) -> None:
        pad = "  " * depth
        if machine.children:
            lines.append(f"{pad}machine {machine.name} {{")
            for child in machine.children:
                emit_machine(child, depth + 1)
            lines.append(f"{pad}}}")
        else:
            lines.append(f"{pad}machine {machine.name}")

    for root in model.root_machines:
        emit_machine(root, 0)
    for e in model.flows:
        lines.append(f"flow {e.thing} {e.src} -> {e.dst}")
    for t in model.triggers:
        lines.append(f"trigger {t.src} ~> {t.dst}")
    for event in model.events:
        head = f"event {event.name} perpetual {{" if event.perpetual else f"event {event.name} {{"
        lines.append(head)
        for item in event.items:
            if isinstance(item, RegionNode):
                lines.append(f"  node {item.ref}")
            elif isinstance(item, RegionFlow):
                edge = model.flows_by_id[item.edge_id]
                lines.append(f"  flow {edge.thing} {edge.src} -> {edge.dst}")
            elif isinstance(item, RegionTrigger):
                edge = model.triggers_by_id[item.edge_id]
                lines.append(f"  trigger {edge.src} ~> {edge.dst}")
        lines.append("}")
    if model.chronology is not None:
        lines.append("chronology {")
        for a, b in model.chronology.edges:
            lines.append(f"  {a} -> {b}")
        lines.append("}")
    return "\n".join(lines) + "\n"
