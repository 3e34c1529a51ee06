"""Array access trace grouping, shape sequencing and statistics."""

import json
import os

from . import _arraytrace
from ._arraytrace import (
    ContractError,
    Error,
    IoError,
    ResourceError,
    ValidationError,
    classify,
    parse_encoding,
    sequence,
)

__all__ = [
    "ContractError",
    "Error",
    "IoError",
    "ResourceError",
    "ValidationError",
    "classify",
    "group",
    "parse_encoding",
    "sequence",
    "sequence_files",
    "stats",
    "synth",
]


def _paths(inputs):
    if isinstance(inputs, (str, os.PathLike)):
        inputs = [inputs]
    return [os.fspath(p) for p in inputs]


def group(inputs, output, mem_budget=256 << 20, tmp=""):
    """Group raw traces by array into a grouped file."""
    arrays, accesses, runs, malformed = _arraytrace.group(_paths(inputs), os.fspath(output), mem_budget, os.fspath(tmp))
    return {"arrays": arrays, "accesses": accesses, "runs_spilled": runs, "malformed": malformed}


def sequence_files(inputs, output, round=2, paper_compat_length=False, workers=1):
    """Sequence every distinct pattern into a JSON-lines file; returns the summary."""
    return json.loads(_arraytrace.sequence_files(_paths(inputs), os.fspath(output), round, paper_compat_length, workers))


def stats(inputs, out_dir, workers=1, corpus=""):
    """Write report.json and the CSV tables into out_dir; returns the report."""
    return json.loads(_arraytrace.stats(_paths(inputs), os.fspath(out_dir), workers, corpus))


def synth(spec, raw, truth, seed=None, noise=0.0):
    """Generate a raw trace and its truth file from a corpus spec (dict or path)."""
    if isinstance(spec, (str, os.PathLike)):
        with open(spec, encoding="utf-8") as f:
            spec = json.load(f)
    arrays, accesses = _arraytrace.synth(json.dumps(spec), os.fspath(raw), os.fspath(truth), seed, noise)
    return {"arrays": arrays, "accesses": accesses}
