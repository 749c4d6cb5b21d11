"""Loaders for the bundled plain-text constant tables."""

from __future__ import annotations

import functools
from importlib import resources


def _read_lines(name: str) -> list[list[str]]:
    text = resources.files("peptaste.data").joinpath(name).read_text(encoding="utf-8")
    rows = []
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        rows.append(line.split("\t"))
    return rows


@functools.lru_cache(maxsize=None)
def scalar_table(name: str) -> dict[str, float]:
    """key<TAB>value rows."""
    return {row[0]: float(row[1]) for row in _read_lines(name)}


@functools.lru_cache(maxsize=None)
def vector_table(name: str) -> dict[str, tuple[float, ...]]:
    """key<TAB>v1<TAB>... rows (no header)."""
    return {row[0]: tuple(float(v) for v in row[1:]) for row in _read_lines(name)}


@functools.lru_cache(maxsize=None)
def matrix_table(name: str) -> dict[str, dict[str, float]]:
    """First row is a column header starting with an empty cell."""
    rows = _read_lines(name)
    cols = rows[0][1:]
    out = {}
    for row in rows[1:]:
        out[row[0]] = {c: float(v) for c, v in zip(cols, row[1:])}
    return out


@functools.lru_cache(maxsize=None)
def group_table(name: str) -> dict[str, str]:
    """name<TAB>residues rows."""
    return {row[0]: row[1] for row in _read_lines(name)}


@functools.lru_cache(maxsize=None)
def ctd_groups() -> list[tuple[str, tuple[str, str, str]]]:
    rows = _read_lines("ctd_groups.tsv")
    assert rows[0][0] == "property"
    return [(r[0], (r[1], r[2], r[3])) for r in rows[1:]]


@functools.lru_cache(maxsize=None)
def pka_table() -> dict[str, tuple[float, int]]:
    """group -> (pKa, charge sign)."""
    return {
        row[0]: (float(row[1]), int(row[2])) for row in _read_lines("pka.tsv")
    }
