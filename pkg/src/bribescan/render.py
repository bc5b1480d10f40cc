"""Shared CSV rendering helpers."""

from __future__ import annotations


def format_float(x: float) -> str:
    """Render a float with 12 significant digits, always showing a decimal.

    Integral values come out as e.g. ``8.0`` so CSV columns stay visibly
    float-typed and byte-stable across runs.
    """
    s = f"{x:.12g}"
    if "." not in s and "e" not in s and "E" not in s and "n" not in s:
        s += ".0"
    return s
