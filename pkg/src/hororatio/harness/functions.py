"""Text specs for test functions u(xi, x) = cylinder(xi) * xpart(x).

Cylinder parts::

    1 | 3/4 | 0.5          constant
    ind:a1.A2              indicator of a cylinder
    table:a1=1;A1=2/3      values on prefixes of one length, others 0
    random:D:SEED          random integers 1..9 on every depth-D prefix

X parts (after ``*``)::

    const:C | cap:H | bump:S | table:v0,v1,...
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ..boundary import CylinderFunction
from ..free_group import nonbacktracking_array, parse_letter

__all__ = ["FunctionSpec", "parse_function", "parse_number", "XPart"]


def parse_number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        return Fraction(text)
    return float(text)


def _parse_prefix(text: str, rank: int) -> tuple[int, ...]:
    text = text.strip()
    if text in ("", "e"):
        return ()
    return tuple(parse_letter(t, rank) for t in text.split("."))


def _parse_cylinder(text: str, rank: int) -> CylinderFunction:
    kind, _, body = text.partition(":")
    kind = kind.strip()
    if not body:
        return CylinderFunction.constant(rank, parse_number(kind))
    if kind == "ind":
        return CylinderFunction.indicator(rank, _parse_prefix(body, rank))
    if kind == "table":
        values = {}
        for item in body.split(";"):
            if not item.strip():
                continue
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"table entry {item!r} needs prefix=value")
            values[_parse_prefix(key, rank)] = parse_number(val)
        depths = {len(k) for k in values}
        if len(depths) != 1:
            raise ValueError("table prefixes must all have the same length")
        return CylinderFunction.from_values(rank, depths.pop(), values)
    if kind == "random":
        depth, _, seed = body.partition(":")
        rng = random.Random(int(seed or 0))
        rows = nonbacktracking_array(rank, int(depth)).tolist()
        return CylinderFunction.from_values(
            rank, int(depth), {tuple(r): rng.randint(1, 9) for r in rows}
        )
    raise ValueError(f"unknown cylinder function kind {kind!r}")


@dataclass(frozen=True)
class XPart:
    kind: str
    param: object = 1

    def __call__(self, x):
        if self.kind == "const":
            return self.param
        if self.kind == "cap":
            return 1 if x[2] >= self.param else 0
        if self.kind == "bump":
            s = self.param
            return math.exp(-float(np.dot(x, x)) / (2 * s * s))
        if self.kind == "table":
            return self.param[x]
        raise AssertionError(self.kind)

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    def positive(self) -> bool:
        if self.kind == "const":
            return self.param > 0
        if self.kind == "table":
            return all(t > 0 for t in self.param)
        return self.kind == "bump"

    def integral(self, action_name: str) -> Optional[float]:
        """Integral against the fibre measure where it has a closed form."""
        if self.kind == "const":
            return self.param if action_name in ("none", "trivial", "so3_sphere") else None
        if action_name == "so3_sphere":
            if self.kind == "cap":
                h = min(max(float(self.param), -1.0), 1.0)
                return (1 - h) / 2
            if self.kind == "bump":
                s = self.param
                return math.exp(-1 / (2 * s * s))
        if action_name == "sanov_plane" and self.kind == "bump":
            return 2 * math.pi * self.param**2
        return None


def _parse_xpart(text: str) -> XPart:
    kind, _, body = text.strip().partition(":")
    kind = kind.strip()
    if kind == "const":
        return XPart("const", parse_number(body or "1"))
    if kind == "cap":
        return XPart("cap", float(body))
    if kind == "bump":
        s = float(body)
        if s <= 0:
            raise ValueError("bump width must be positive")
        return XPart("bump", s)
    if kind == "table":
        return XPart("table", tuple(parse_number(t) for t in body.split(",")))
    raise ValueError(f"unknown x-function kind {kind!r}")


@dataclass(frozen=True)
class FunctionSpec:
    text: str
    cylinder: CylinderFunction
    xpart: XPart

    def __call__(self, point):
        b, x = point
        return self.cylinder(b) * self.xpart(x)

    def positive(self) -> bool:
        t = self.cylinder.table
        rows = nonbacktracking_array(self.cylinder.rank, self.cylinder.depth).tolist()
        ok = all(self.cylinder.value(r) > 0 for r in rows) if self.cylinder.depth else t[0] > 0
        return bool(ok) and self.xpart.positive()


def parse_function(text: str, rank: int) -> FunctionSpec:
    cyl, star, xp = text.partition("*")
    xpart = _parse_xpart(xp) if star else XPart("const", 1)
    return FunctionSpec(text.strip(), _parse_cylinder(cyl, rank), xpart)
