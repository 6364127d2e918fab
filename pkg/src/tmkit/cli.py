"""The ``tm`` command line tool.

Subcommands: validate, fmt, sim, render, coverage, corpus. Exit codes:
0 success, 1 validation errors found, 2 usage or IO error, 3 simulation
error. Diagnostics print one per line as ``SEVERITY CODE file:line:col
message``.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .core import Diagnostic, Model
from .dsl import SourceSpan, parse, serialize
from .events import coverage
from .render import render_chronology, render_events, render_static
from .sim import ScenarioError, SimulationError, format_trace, load_scenario, simulate

__all__ = ["main", "run", "corpus_list", "CorpusEntry", "corpus_dir"]

OK = 0
VALIDATION_ERRORS = 1
USAGE_OR_IO = 2
SIMULATION_ERROR = 3


@dataclass(frozen=True)
class CorpusEntry:
    """One bundled worked model with its scenarios and golden outputs."""

    name: str
    model_file: Path
    scenarios: tuple[Path, ...]
    golden_traces: dict[str, Path]
    golden_dots: dict[str, Path]


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


_CORPUS_SCENARIOS = {
    "reservoir": ("reservoir",),
    "kant_ci": ("kant_agree", "kant_disagree"),
    "murderer": ("murderer_truth", "murderer_lie"),
    "islamic": ("islamic_gate_true", "islamic_gate_false", "islamic_abstain"),
}


def corpus_list() -> list[CorpusEntry]:
    """The four bundled models, in fixed order."""
    base = corpus_dir()
    golden = base / "golden"
    entries = []
    for name in ("reservoir", "kant_ci", "murderer", "islamic"):
        scenario_names = _CORPUS_SCENARIOS[name]
        entries.append(
            CorpusEntry(
                name=name,
                model_file=base / f"{name}.tm",
                scenarios=tuple(base / f"{s}.scn" for s in scenario_names),
                golden_traces={s: golden / f"{s}.trace" for s in scenario_names},
                golden_dots={
                    view: golden / f"{name}_{view}.dot"
                    for view in ("static", "events", "chronology")
                },
            )
        )
    return entries


def _format_diagnostic(diag: Diagnostic, file: str) -> str:
    if isinstance(diag.location, SourceSpan):
        where = f"{diag.location.file}:{diag.location.start_line}:{diag.location.start_col}"
    else:
        where = f"{file}:-:-"
        if diag.location is not None:
            where += f" ({diag.location})"
    return f"{diag.severity} {diag.code} {where} {diag.message}"


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tm-out-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_file(path: str) -> str | None:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        return None


def _load_model(path: str, *, lax: bool = False) -> tuple[Model | None, list[Diagnostic]]:
    text = _read_file(path)
    if text is None:
        return None, []
    result = parse(text, path, lax=lax)
    return result.model, result.diagnostics


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        _atomic_write(output, text)


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tm", description="Thinging Machine modeling toolchain"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check model files")
    p_validate.add_argument("files", nargs="+")
    p_validate.add_argument("--lax", action="store_true",
                            help="downgrade cross-boundary flows to warnings")

    p_fmt = sub.add_parser("fmt", help="canonical serialization")
    p_fmt.add_argument("file")
    p_fmt.add_argument("-o", dest="output", default=None)
    p_fmt.add_argument("--lax", action="store_true")

    p_sim = sub.add_parser("sim", help="simulate a model under a scenario")
    p_sim.add_argument("file")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("-o", dest="output", default=None)
    p_sim.add_argument("--max-steps", type=int, default=None,
                       help="override the scenario step limit")
    p_sim.add_argument("--lax", action="store_true")

    p_render = sub.add_parser("render", help="emit a DOT diagram")
    p_render.add_argument("file")
    p_render.add_argument("--view", choices=("static", "events", "chronology"),
                          default="static")
    p_render.add_argument("-o", dest="output", default=None)
    p_render.add_argument("--lax", action="store_true")

    p_cov = sub.add_parser("coverage", help="event coverage of the static model")
    p_cov.add_argument("file")
    p_cov.add_argument("-o", dest="output", default=None,
                       help="write a machine-readable JSON record")
    p_cov.add_argument("--lax", action="store_true")

    p_corpus = sub.add_parser("corpus", help="bundled example models")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)
    corpus_sub.add_parser("list", help="list bundled models")
    p_copy = corpus_sub.add_parser("copy", help="copy bundled models")
    p_copy.add_argument("name", help="model name or 'all'")
    p_copy.add_argument("dest", help="destination directory")
    return parser


def run(argv: list[str] | None = None) -> int:
    """Dispatch a command line. Returns the exit status."""
    parser = _build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_OR_IO if exc.code not in (0, None) else OK

    if args.command == "validate":
        worst = OK
        for path in args.files:
            text = _read_file(path)
            if text is None:
                return USAGE_OR_IO
            result = parse(text, path, lax=args.lax)
            for diag in result.diagnostics:
                print(_format_diagnostic(diag, path))
            if any(d.is_error for d in result.diagnostics):
                worst = max(worst, VALIDATION_ERRORS)
        return worst

    if args.command == "fmt":
        model, diagnostics = _load_model(args.file, lax=args.lax)
        if model is None:
            for diag in diagnostics:
                print(_format_diagnostic(diag, args.file))
            return VALIDATION_ERRORS if diagnostics else USAGE_OR_IO
        _emit(serialize(model), args.output)
        return OK

    if args.command == "sim":
        model, diagnostics = _load_model(args.file, lax=args.lax)
        if model is None:
            for diag in diagnostics:
                print(_format_diagnostic(diag, args.file))
            return VALIDATION_ERRORS if diagnostics else USAGE_OR_IO
        scenario_text = _read_file(args.scenario)
        if scenario_text is None:
            return USAGE_OR_IO
        try:
            scenario = load_scenario(scenario_text, args.scenario)
            if args.max_steps is not None:
                from dataclasses import replace

                scenario = replace(scenario, max_steps=args.max_steps)
            trace = simulate(model, scenario, lax=args.lax)
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return SIMULATION_ERROR
        except SimulationError as exc:
            print(f"error {exc.diagnostic.code} {exc.diagnostic.message}",
                  file=sys.stderr)
            return SIMULATION_ERROR
        for warning in trace.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        _emit(format_trace(trace), args.output)
        return OK

    if args.command == "render":
        model, diagnostics = _load_model(args.file, lax=args.lax)
        if model is None:
            for diag in diagnostics:
                print(_format_diagnostic(diag, args.file))
            return VALIDATION_ERRORS if diagnostics else USAGE_OR_IO
        try:
            if args.view == "static":
                doc = render_static(model, lax=args.lax)
            elif args.view == "events":
                doc = render_events(model, lax=args.lax)
            else:
                doc = render_chronology(model)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_OR_IO
        _emit(doc.text, args.output)
        return OK

    if args.command == "coverage":
        model, diagnostics = _load_model(args.file, lax=args.lax)
        if model is None:
            for diag in diagnostics:
                print(_format_diagnostic(diag, args.file))
            return VALIDATION_ERRORS if diagnostics else USAGE_OR_IO
        report = coverage(model)
        if args.output is not None:
            _atomic_write(args.output, json.dumps(report.as_dict(), indent=2) + "\n")
        else:
            sys.stdout.write(report.text())
        return OK

    if args.command == "corpus":
        entries = corpus_list()
        if args.corpus_command == "list":
            for entry in entries:
                scenario_names = ", ".join(p.stem for p in entry.scenarios)
                print(f"{entry.name}: {entry.model_file.name} ({scenario_names})")
            return OK
        wanted = [e for e in entries if args.name in ("all", e.name)]
        if not wanted:
            print(f"error: no corpus model named {args.name!r}", file=sys.stderr)
            return USAGE_OR_IO
        dest = Path(args.dest)
        try:
            dest.mkdir(parents=True, exist_ok=True)
            for entry in wanted:
                shutil.copy(entry.model_file, dest / entry.model_file.name)
                for scenario in entry.scenarios:
                    shutil.copy(scenario, dest / scenario.name)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_OR_IO
        return OK

    return USAGE_OR_IO  # pragma: no cover


def main() -> None:
    sys.exit(run())
