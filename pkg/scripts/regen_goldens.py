#!/usr/bin/env python3
"""Regenerate the corpus golden traces and DOT files in place.

Run after an intentional change to corpus models, scenarios, or the
engine's trace format, then review the diff.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tmkit.cli import corpus_list
from tmkit.dsl import parse
from tmkit.render import render_chronology, render_events, render_static
from tmkit.sim import format_trace, load_scenario, simulate


def main() -> None:
    for entry in corpus_list():
        model = parse(entry.model_file.read_text(), entry.model_file.name).model
        assert model is not None, entry.name
        golden_dir = entry.model_file.parent / "golden"
        golden_dir.mkdir(exist_ok=True)
        for scenario_path in entry.scenarios:
            scenario = load_scenario(scenario_path.read_text(), scenario_path.name)
            trace = simulate(model, scenario)
            out = entry.golden_traces[scenario_path.stem]
            out.write_text(format_trace(trace), encoding="utf-8", newline="")
            print(f"wrote {out}")
        for view, renderer in (
            ("static", render_static),
            ("events", render_events),
            ("chronology", render_chronology),
        ):
            out = entry.golden_dots[view]
            out.write_text(renderer(model).text, encoding="utf-8", newline="")
            print(f"wrote {out}")


if __name__ == "__main__":
    main()
