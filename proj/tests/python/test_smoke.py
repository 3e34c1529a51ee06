import json
import os
import pathlib
import subprocess

import pytest

import arraytrace

DATA = pathlib.Path(os.environ.get("ARRAYTRACE_TEST_DATA", pathlib.Path(__file__).parent.parent / "data"))


def test_classify_and_sequence():
    assert arraytrace.classify([0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3], round=1) == "RSi"
    assert arraytrace.classify([2, 3, 4, 3, 2]) == "Pk"
    assert arraytrace.classify([2, 3, 4, 3, 2], round=1) == "U"
    three_runs = list(range(14)) * 3
    modes = "w" * 14 + "r" * 14 + "w" * 14
    assert arraytrace.sequence(three_runs, modes=modes, paper_compat_length=True) == "0: |SLi w 1 42|SLi r 1 42|SLi w 1 42|"
    assert arraytrace.sequence([3, 2, 1], threads=[7, 9, 7], modes="rwr") == "1: |SLd rw 2 3|"


def test_parse_encoding():
    enc = arraytrace.parse_encoding("-3: |Ld2 r 1 4|U rw 3 2|")
    assert enc["min_index"] == -3
    assert enc["coverage"] == "partial"
    assert enc["slices"][0] == {"shape": "Ld2", "mode": "r", "threads": 1, "len": 4}


def test_errors():
    with pytest.raises(arraytrace.ValidationError):
        arraytrace.parse_encoding("0: |")
    with pytest.raises(arraytrace.ValidationError):
        arraytrace.sequence([0, 1], modes="rx")
    with pytest.raises(arraytrace.ValidationError):
        arraytrace.classify([0, 1], round=3)
    with pytest.raises(arraytrace.IoError):
        arraytrace.stats(["/nonexistent/trace.atrace"], "/tmp/unused")
    assert issubclass(arraytrace.ValidationError, arraytrace.Error)


def test_pipeline(tmp_path):
    spec = DATA / "shapes_corpus.json"
    s = arraytrace.synth(spec, tmp_path / "c.atrace", tmp_path / "c.truth")
    assert s["arrays"] == 10000

    g = arraytrace.group(tmp_path / "c.atrace", tmp_path / "c.agrp", mem_budget=1 << 20, tmp=tmp_path / "spill")
    assert g["arrays"] == 10000 and g["accesses"] == s["accesses"] and g["runs_spilled"] > 1

    summary = arraytrace.sequence_files(tmp_path / "c.agrp", tmp_path / "c.jsonl")
    assert summary["arrays"] == 10000
    assert summary["coverage"]["full"]["count"] == 18

    report = arraytrace.stats([tmp_path / "c.agrp"], tmp_path / "stats", workers=2, corpus="shapes")
    assert report["totals"]["n_arrays"] == 10000
    assert json.loads((tmp_path / "stats" / "report.json").read_text()) == report


def test_bindings_match_cli(tmp_path):
    cli = os.environ.get("ARRAYTRACE_CLI")
    if not cli:
        pytest.skip("ARRAYTRACE_CLI not set")
    src = DATA / "sample.atrace"
    arraytrace.group([src], tmp_path / "py.agrp")
    subprocess.run([cli, "group", str(src), "-o", str(tmp_path / "cli.agrp")], check=True, capture_output=True)
    assert (tmp_path / "py.agrp").read_bytes() == (tmp_path / "cli.agrp").read_bytes()
