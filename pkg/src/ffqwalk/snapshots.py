"""Delimited-text snapshots of states, grids and distributions.

Layout::

    # ffqwalk-<kind> v1
    # key=value          (zero or more header records)
    col1,col2,...
    row values ...

Floats are written with ``repr`` (shortest round-trip form), so reading a
snapshot back reproduces every value bit for bit.
"""

from __future__ import annotations

import io
import os
from typing import IO, Iterable

import numpy as np

from .distribution import Distribution
from .errors import CheckpointError
from .markov import MarkovState
from .pme import PMEGrid
from .walk import WalkerState

FORMAT_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_table(target, kind: str, header: dict, columns: Iterable[str], rows: Iterable) -> None:
    """Write a table to a path or an open text stream."""
    own = isinstance(target, (str, os.PathLike))
    fh: IO[str] = open(target, "w", newline="") if own else target
    try:
        fh.write(f"# ffqwalk-{kind} v{FORMAT_VERSION}\n")
        for key, value in header.items():
            fh.write(f"# {key}={_fmt(value)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_table(source, kind: str | None = None) -> tuple[dict, list[str], list[list[str]]]:
    """Return ``(header, columns, rows)``; values are left as strings."""
    own = isinstance(source, (str, os.PathLike))
    fh: IO[str] = open(source) if own else source
    try:
        lines = fh.read().splitlines()
    finally:
        if own:
            fh.close()
    if not lines or not lines[0].startswith("# ffqwalk-"):
        raise CheckpointError("not an ffqwalk table (missing format line)")
    tag, _, version = lines[0][2:].partition(" v")
    found = tag[len("ffqwalk-"):]
    if kind is not None and found != kind:
        raise CheckpointError(f"expected a {kind!r} table, found {found!r}")
    if version != str(FORMAT_VERSION):
        raise CheckpointError(f"unsupported table version {version!r}")
    header = {"kind": found}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition("=")
        header[key] = value
        i += 1
    if i >= len(lines):
        raise CheckpointError("table has no column line")
    columns = lines[i].split(",")
    rows = [line.split(",") for line in lines[i + 1:] if line]
    return header, columns, rows


def walker_rows(state: WalkerState):
    for j, (a, b) in zip(state.sites, state.amplitudes):
        yield j, a.real, a.imag, b.real, b.imag


def write_walker(state: WalkerState, target, extra: dict | None = None) -> None:
    header = {"t": state.step_count, "truncated_mass": state.truncated_mass, **(extra or {})}
    write_table(target, "walker", header, ["site", "re_a", "im_a", "re_b", "im_b"],
                walker_rows(state))


def walker_from_table(header: dict, rows: list[list[str]]) -> WalkerState:
    if not rows:
        raise CheckpointError("walker table has no rows")
    sites = [int(r[0]) for r in rows]
    lo = sites[0]
    if sites != list(range(lo, lo + len(sites))):
        raise CheckpointError("walker sites must be contiguous and increasing")
    vals = np.array([[float(v) for v in r[1:5]] for r in rows])
    amps = np.empty((len(rows), 2), dtype=np.complex128)
    amps[:, 0] = vals[:, 0] + 1j * vals[:, 1]
    amps[:, 1] = vals[:, 2] + 1j * vals[:, 3]
    return WalkerState(lo, amps, int(header.get("t", 0)), float(header.get("truncated_mass", 0.0)))


def read_walker(source) -> WalkerState:
    header, _, rows = read_table(source, "walker")
    return walker_from_table(header, rows)


def write_markov(state: MarkovState, target, extra: dict | None = None) -> None:
    header = {"t": state.step_count, "truncated_mass": state.truncated_mass, **(extra or {})}
    write_table(target, "markov", header, ["site", "L", "R"],
                zip(state.sites, state.left, state.right))


def markov_from_table(header: dict, rows: list[list[str]]) -> MarkovState:
    if not rows:
        raise CheckpointError("markov table has no rows")
    lo = int(rows[0][0])
    left = [float(r[1]) for r in rows]
    right = [float(r[2]) for r in rows]
    return MarkovState(lo, left, right, int(header.get("t", 0)),
                       float(header.get("truncated_mass", 0.0)))


def read_markov(source) -> MarkovState:
    header, _, rows = read_table(source, "markov")
    return markov_from_table(header, rows)


def write_grid(grid: PMEGrid, target, extra: dict | None = None) -> None:
    header = {"time": grid.time, "m": "none" if grid.m is None else grid.m, "dx": grid.dx,
              "dt": grid.dt, "x_lo": grid.x_lo, "x_hi": grid.x_hi, "coeff": grid.coeff,
              "stability_factor": grid.stability_factor, "mass0": grid.mass0,
              **(extra or {})}
    write_table(target, "grid", header, ["x", "rho"], zip(grid.x, grid.rho))


def grid_from_table(header: dict, rows: list[list[str]]) -> PMEGrid:
    m = None if header["m"] == "none" else float(header["m"])
    return PMEGrid(float(header["x_lo"]), float(header["x_hi"]), [float(r[1]) for r in rows],
                   float(header["time"]), float(header["dt"]), m, float(header["coeff"]),
                   float(header["stability_factor"]), float(header["mass0"]))


def read_grid(source) -> PMEGrid:
    header, _, rows = read_table(source, "grid")
    return grid_from_table(header, rows)


def write_distribution(dist: Distribution, target, extra: dict | None = None) -> None:
    write_table(target, "distribution", {"total": dist.total, **(extra or {})},
                ["site", "mass"], zip(dist.sites, dist.masses))


def read_distribution(source) -> Distribution:
    header, columns, rows = read_table(source)
    if header["kind"] == "walker":
        state = walker_from_table(header, rows)
        return Distribution(state.window_lo, state.probabilities())
    if header["kind"] == "markov":
        state = markov_from_table(header, rows)
        return Distribution(state.window_lo, state.left + state.right)
    if header["kind"] != "distribution":
        raise CheckpointError(f"cannot read a distribution from a {header['kind']!r} table")
    sites = [int(r[0]) for r in rows]
    if sites != list(range(sites[0], sites[0] + len(sites))):
        raise CheckpointError("distribution sites must be contiguous and increasing")
    return Distribution(sites[0], [float(r[1]) for r in rows])


def dumps(writer, obj, extra: dict | None = None) -> str:
    buf = io.StringIO()
    writer(obj, buf, extra)
    return buf.getvalue()
