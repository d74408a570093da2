"""Snapshot CSV files: ``#`` metadata lines, an ``x,u`` header, then rows.

Values are written with 17 significant digits, which round-trips every
double exactly.
"""

from __future__ import annotations

import os
import tempfile
from typing import Mapping

import numpy as np

from .errors import InputError
from .lattice import Grid, GridFunction

HEADER = "x,u"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_snapshot(u: GridFunction, meta: Mapping[str, object]) -> str:
    g = u.grid
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(f"# N={g.n_cells}")
    lines.append(f"# dx={_fmt(g.dx)}")
    lines.append(f"# x_left={_fmt(g.x_left)}")
    lines.append(HEADER)
    x = g.x
    lines.extend(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, u.values))
    return "\n".join(lines) + "\n"


def write_snapshot(path, u: GridFunction, meta: Mapping[str, object]) -> None:
    """Write atomically: a temporary file in the same directory is renamed into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snap-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_snapshot(u, meta))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshot(path) -> tuple[GridFunction, dict]:
    """Parse a snapshot file. Raises InputError on any malformed content."""
    meta: dict = {}
    rows = []
    seen_header = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if not sep:
                    raise InputError(f"{path}:{lineno}: bad metadata line")
                meta[key.strip()] = val.strip()
                continue
            if not seen_header:
                if line != HEADER:
                    raise InputError(f"{path}:{lineno}: expected header {HEADER!r}")
                seen_header = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected two columns")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not seen_header:
        raise InputError(f"{path}: no data header")
    try:
        n = int(meta["N"])
        dx = float(meta["dx"])
        x_left = float(meta["x_left"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: missing grid metadata ({exc})") from None
    if len(rows) != n:
        raise InputError(f"{path}: {len(rows)} rows for N={n}")
    data = np.array(rows)
    grid = Grid(n, dx, x_left)
    if data[0, 0] != x_left:
        raise InputError(f"{path}: first node {data[0, 0]!r} does not match x_left")
    return GridFunction(grid, data[:, 1]), meta
