"""Exit codes, subcommand behavior, and output files of the tm tool."""

from __future__ import annotations

import json

import pytest

from tmkit.cli import run, corpus_list

from helpers import corpus_path


@pytest.fixture()
def capsysbinary_text(capsys):
    return capsys


def test_validate_clean_model_is_silent_exit_zero(capsys):
    status = run(["validate", str(corpus_path("reservoir.tm"))])
    assert status == 0
    out, _err = capsys.readouterr()
    assert out == ""


def test_validate_all_corpus_files_silent(capsys):
    files = [str(corpus_path(f"{n}.tm")) for n in ("reservoir", "kant_ci", "murderer", "islamic")]
    assert run(["validate", *files]) == 0
    out, _err = capsys.readouterr()
    assert out == ""


def test_validate_missing_file_exit_two(capsys):
    assert run(["validate", "does_not_exist.tm"]) == 2


def test_validate_bad_model_prints_diagnostics_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.tm"
    bad.write_text("model bad\nthing x\nmachine m\nflow x m.process -> m.create\n")
    assert run(["validate", str(bad)]) == 1
    out, _err = capsys.readouterr()
    assert "E104" in out
    assert f"{bad}:4:" in out


def test_validate_lax_downgrades_cross_boundary(tmp_path, capsys):
    shortcut = tmp_path / "shortcut.tm"
    shortcut.write_text(
        "model s\nthing x\nmachine a\nmachine b\nflow x a.process -> b.receive\n"
    )
    assert run(["validate", str(shortcut)]) == 1
    capsys.readouterr()
    assert run(["validate", "--lax", str(shortcut)]) == 0
    out, _err = capsys.readouterr()
    assert "warning E103" in out


def test_unknown_subcommand_exit_two(capsys):
    assert run(["frobnicate"]) == 2


def test_lax_mode_admits_shortcut_models_end_to_end(tmp_path, capsys):
    shortcut = tmp_path / "s.tm"
    shortcut.write_text(
        "model s\n"
        "thing x\n"
        "machine a\n"
        "machine b\n"
        "flow x a.create -> a.release\n"
        "flow x a.release -> b.receive\n"
        "event go { flow x a.create -> a.release flow x a.release -> b.receive }\n"
    )
    scenario = tmp_path / "s.scn"
    scenario.write_text("max_steps 3\n")
    assert run(["sim", str(shortcut), "--scenario", str(scenario)]) == 1
    capsys.readouterr()
    out_trace = tmp_path / "s.trace"
    assert run(
        ["sim", "--lax", str(shortcut), "--scenario", str(scenario), "-o", str(out_trace)]
    ) == 0
    assert "b.receive" in out_trace.read_text()
    out_dot = tmp_path / "s.dot"
    assert run(["render", "--lax", str(shortcut), "-o", str(out_dot)]) == 0
    assert out_dot.read_text().startswith("digraph ")


def test_fmt_writes_canonical_form(tmp_path, capsys):
    source = tmp_path / "m.tm"
    source.write_text("model m\nflow x a.create -> a.release\nthing x\nmachine a\n")
    out_file = tmp_path / "out.tm"
    assert run(["fmt", str(source), "-o", str(out_file)]) == 0
    text = out_file.read_text()
    assert text.splitlines()[0] == "model m"
    assert text.index("thing x") < text.index("machine a")


def test_fmt_is_idempotent(tmp_path):
    source = tmp_path / "m.tm"
    source.write_text(corpus_path("reservoir.tm").read_text())
    assert run(["fmt", str(source), "-o", str(source)]) == 0
    first = source.read_text()
    assert run(["fmt", str(source), "-o", str(source)]) == 0
    assert source.read_text() == first


def test_fmt_to_stdout(capsys):
    assert run(["fmt", str(corpus_path("reservoir.tm"))]) == 0
    out, _err = capsys.readouterr()
    assert out.startswith("model reservoir\n")


def test_fmt_lax_formats_shortcut_models(tmp_path, capsys):
    shortcut = tmp_path / "s.tm"
    shortcut.write_text(
        "model s\nthing x\nmachine a\nmachine b\nflow x a.process -> b.receive\n"
    )
    assert run(["fmt", str(shortcut)]) == 1
    capsys.readouterr()
    assert run(["fmt", "--lax", str(shortcut)]) == 0
    out, _err = capsys.readouterr()
    assert out.startswith("model s\n")


def test_validate_reports_files_in_input_order(tmp_path, capsys):
    first = tmp_path / "one.tm"
    second = tmp_path / "two.tm"
    first.write_text("model one\nthing x\nthing x\n")
    second.write_text("model two\nthing y\nthing y\n")
    assert run(["validate", str(second), str(first)]) == 1
    out, _err = capsys.readouterr()
    lines = out.splitlines()
    assert "two.tm" in lines[0]
    assert "one.tm" in lines[1]


def test_sim_writes_trace_file(tmp_path):
    out = tmp_path / "out.trace"
    status = run(
        [
            "sim",
            str(corpus_path("islamic.tm")),
            "--scenario",
            str(corpus_path("islamic_gate_false.scn")),
            "-o",
            str(out),
        ]
    )
    assert status == 0
    text = out.read_text()
    assert text.endswith("terminated=step_limit\n")
    assert "e9_actualized" not in text


def test_sim_missing_choice_is_exit_three(tmp_path, capsys):
    empty_scenario = tmp_path / "none.scn"
    empty_scenario.write_text("max_steps 12\n")
    status = run(
        [
            "sim",
            str(corpus_path("kant_ci.tm")),
            "--scenario",
            str(empty_scenario),
        ]
    )
    assert status == 3
    _out, err = capsys.readouterr()
    assert "E401" in err


def test_sim_max_steps_override(tmp_path):
    out = tmp_path / "short.trace"
    status = run(
        [
            "sim",
            str(corpus_path("reservoir.tm")),
            "--scenario",
            str(corpus_path("reservoir.scn")),
            "--max-steps",
            "3",
            "-o",
            str(out),
        ]
    )
    assert status == 0
    steps = {
        int(line.split("\t", 1)[0])
        for line in out.read_text().splitlines()
        if "\t" in line
    }
    assert max(steps) <= 3


def test_render_views(tmp_path):
    for view in ("static", "events", "chronology"):
        out = tmp_path / f"{view}.dot"
        status = run(
            [
                "render",
                str(corpus_path("murderer.tm")),
                "--view",
                view,
                "-o",
                str(out),
            ]
        )
        assert status == 0
        assert out.read_text().startswith("digraph ")


def test_coverage_text_block(capsys):
    assert run(["coverage", str(corpus_path("reservoir.tm"))]) == 0
    out, _err = capsys.readouterr()
    lines = out.splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("covered: ")
    assert lines[1].startswith("uncovered: ")
    assert lines[2] == "ratio: 1.0000"


def test_coverage_json_record(tmp_path):
    out = tmp_path / "cov.json"
    assert run(["coverage", str(corpus_path("kant_ci.tm")), "-o", str(out)]) == 0
    record = json.loads(out.read_text())
    assert set(record) == {"covered", "uncovered", "ratio"}
    assert record["uncovered"]  # the copy-model trigger stays uncovered


def test_corpus_list_has_four_fixed_entries(capsys):
    entries = corpus_list()
    assert [e.name for e in entries] == ["reservoir", "kant_ci", "murderer", "islamic"]
    islamic = entries[3]
    assert len(islamic.scenarios) >= 2
    assert run(["corpus", "list"]) == 0
    out, _err = capsys.readouterr()
    assert out.splitlines()[0].startswith("reservoir:")


def test_corpus_copy(tmp_path):
    assert run(["corpus", "copy", "murderer", str(tmp_path)]) == 0
    assert (tmp_path / "murderer.tm").exists()
    assert (tmp_path / "murderer_truth.scn").exists()
    assert run(["corpus", "copy", "nonesuch", str(tmp_path)]) == 2


def test_corpus_models_parse_and_validate():
    for entry in corpus_list():
        assert run(["validate", str(entry.model_file)]) == 0
