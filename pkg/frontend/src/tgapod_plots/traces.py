"""Parsing and validation of the solver's CSV outputs.

Trace files carry the exact header ``step,time,indicator,error,marked,m``
with strictly increasing times; summary files are read with their raw
field strings preserved so downstream rendering never reformats a number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRACE_HEADER = "step,time,indicator,error,marked,m"


@dataclass
class TraceFile:
    path: str
    steps: np.ndarray
    times: np.ndarray
    indicators: np.ndarray
    errors: np.ndarray
    marked: np.ndarray
    modes: np.ndarray

    @property
    def n_marked(self) -> int:
        return int(self.marked.sum())

    def __len__(self) -> int:
        return self.steps.size


def load_trace(path: str) -> TraceFile:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {TRACE_HEADER!r}, got {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if any(len(row) != 6 for row in rows):
        raise ValueError(f"{path}: malformed row (expected 6 fields)")
    cols = list(zip(*rows))
    trace = TraceFile(
        path=path,
        steps=np.array([int(v) for v in cols[0]]),
        times=np.array([float(v) for v in cols[1]]),
        indicators=np.array([float(v) for v in cols[2]]),
        errors=np.array([float(v) for v in cols[3]]),
        marked=np.array([int(v) for v in cols[4]]),
        modes=np.array([int(v) for v in cols[5]]),
    )
    if np.any(np.diff(trace.times) <= 0):
        raise ValueError(f"{path}: times must be strictly increasing")
    return trace


def read_summary(path: str) -> tuple[list[str], list[list[str]]]:
    """Header fields and data rows of a summary.csv, as raw strings."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty summary file")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: row has {len(row)} fields, header has {len(header)}")
    return header, rows


def summarize(path: str) -> str:
    """Aligned text table of a summary.csv; field strings are untouched."""
    header, rows = read_summary(path)
    table = [header] + rows
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines)
