"""Small text format for polynomial vector fields.

Example::

    vars x y
    x' = y
    y' = x*y
    at 0 0
    line 1 0

``at`` gives the candidate point and ``line`` the hypothesized direction of
the equilibrium line; both default to the origin and the first axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import sympy as sp

from .netlist import bundled_path


class OdeFileError(ValueError):
    pass


@dataclass
class OdeSpec:
    names: list[str]
    expressions: list[sp.Expr]
    x_star: np.ndarray
    line_direction: np.ndarray
    field: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    def as_dict(self) -> dict:
        return {
            "vars": self.names,
            "field": [str(e) for e in self.expressions],
            "at": [float(v) for v in self.x_star],
            "line": [float(v) for v in self.line_direction],
        }


def parse_ode(text: str) -> OdeSpec:
    names: list[str] | None = None
    rhs: dict[str, str] = {}
    at = line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        head, _, rest = s.partition(" ")
        if head == "vars":
            names = rest.split()
        elif head in ("at", "line"):
            try:
                vals = np.array([float(t) for t in rest.split()])
            except ValueError:
                raise OdeFileError(f"line {lineno}: bad number in {head!r}") from None
            if head == "at":
                at = vals
            else:
                line = vals
        elif "=" in s:
            lhs, _, expr = s.partition("=")
            lhs = lhs.strip()
            if not lhs.endswith("'"):
                raise OdeFileError(f"line {lineno}: expected \"<var>' = <expr>\"")
            rhs[lhs[:-1].strip()] = expr.strip()
        else:
            raise OdeFileError(f"line {lineno}: cannot parse {s!r}")
    if not names:
        raise OdeFileError("missing 'vars' line")
    missing = [v for v in names if v not in rhs]
    extra = [v for v in rhs if v not in names]
    if missing or extra:
        raise OdeFileError(f"equations do not match vars (missing {missing}, unknown {extra})")
    n = len(names)
    at = np.zeros(n) if at is None else at
    line = np.eye(n)[0] if line is None else line
    if at.shape != (n,) or line.shape != (n,):
        raise OdeFileError("'at' and 'line' must have one entry per variable")
    if not np.any(line):
        raise OdeFileError("'line' direction must be nonzero")

    symbols = sp.symbols(names)
    local = dict(zip(names, symbols))
    try:
        exprs = [sp.sympify(rhs[v], locals=local) for v in names]
    except (sp.SympifyError, SyntaxError) as exc:
        raise OdeFileError(f"bad expression: {exc}") from None
    free = set().union(*(e.free_symbols for e in exprs)) - set(symbols)
    if free:
        raise OdeFileError(f"unknown symbols {sorted(map(str, free))}")
    jac = sp.Matrix(exprs).jacobian(symbols)
    f_num = sp.lambdify([symbols], exprs, "numpy")
    j_num = sp.lambdify([symbols], jac, "numpy")

    def field(x):
        return np.array(f_num(list(x)), dtype=float).reshape(n)

    def jacobian(x):
        return np.array(j_num(list(x)), dtype=float).reshape(n, n)

    return OdeSpec(list(names), exprs, at, line, field, jacobian)


def load_ode(path: str | Path) -> OdeSpec:
    p = Path(path)
    if not p.exists():
        bundled = bundled_path(p.name)
        if bundled is None:
            raise FileNotFoundError(f"ODE file not found: {path}")
        p = bundled
    return parse_ode(p.read_text(encoding="utf-8"))
