"""Fixed-format MPS export of the noiseless big-M model, plus a small reader.

Rows ``L<i>`` and ``U<i>`` encode ``u_i theta - M z_i <= x_i`` and
``-u_i theta - M z_i <= -x_i``. Columns ``T<j>`` are free, ``Z<i>`` binary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ExportError
from .lp import solve_lp
from .milp import MilpProblem


def _num(v: float) -> str:
    """Shortest-loss rendering of ``v`` that fits the 12-character field."""
    s = repr(float(v))
    if len(s) <= 12:
        return s
    for prec in range(16, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise ExportError(f"cannot fit {v!r} in an MPS field")


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    out = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8) + "  " + f4.ljust(12)
    if f5:
        out += "   " + f5.ljust(8) + "  " + f6.ljust(12)
    return out.rstrip()


def export_mps(p: MilpProblem, path, name: str = "GLIMPS") -> None:
    if not p.noiseless:
        raise ConfigError("MPS export covers the linear (noiseless) model only")
    if not str(path):
        raise ExportError("empty output path")
    u, x, M = p.basis, p.obs, p.big_m
    n, r = u.shape
    if n > 9_999_999 or r > 9_999_999:
        raise ExportError("problem too large for 8-character MPS names")
    lo = [f"L{i + 1:07d}" for i in range(n)]
    hi = [f"U{i + 1:07d}" for i in range(n)]
    lines = [f"NAME          {name}", "ROWS", _line("N", "COST")]
    for i in range(n):
        lines += [_line("L", lo[i]), _line("L", hi[i])]
    lines.append("COLUMNS")
    for j in range(r):
        col = f"T{j + 1:07d}"
        for i in range(n):
            if u[i, j] != 0.0:
                lines.append(_line("", col, lo[i], _num(u[i, j]), hi[i], _num(-u[i, j])))
    lines.append(_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
    for i in range(n):
        col = f"Z{i + 1:07d}"
        lines.append(_line("", col, "COST", _num(1.0)))
        lines.append(_line("", col, lo[i], _num(-M), hi[i], _num(-M)))
    lines.append(_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    lines.append("RHS")
    for i in range(n):
        lines.append(_line("", "RHS", lo[i], _num(x[i]), hi[i], _num(-x[i])))
    lines.append("BOUNDS")
    for j in range(r):
        lines.append(_line("FR", "BND", f"T{j + 1:07d}"))
    for i in range(n):
        lines.append(_line("BV", "BND", f"Z{i + 1:07d}"))
    lines.append("ENDATA")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ExportError(str(exc)) from exc


@dataclass
class MpsModel:
    name: str
    objective: str
    row_names: list[str]
    row_types: list[str]
    col_names: list[str]
    c: np.ndarray
    a: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray

    def relaxation(self):
        """Solve the LP relaxation; returns the backend result."""
        ub_rows = [k for k, t in enumerate(self.row_types) if t in "LG"]
        eq_rows = [k for k, t in enumerate(self.row_types) if t == "E"]
        sign = np.array([1.0 if self.row_types[k] == "L" else -1.0 for k in ub_rows])
        a_ub = self.a[ub_rows] * sign[:, None] if ub_rows else None
        b_ub = self.rhs[ub_rows] * sign if ub_rows else None
        a_eq = self.a[eq_rows] if eq_rows else None
        b_eq = self.rhs[eq_rows] if eq_rows else None
        bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
                  for lo, hi in zip(self.lower, self.upper)]
        return solve_lp(self.c, a_ub, b_ub, a_eq, b_eq, bounds)


def read_mps(path) -> MpsModel:
    """Parse fixed or free MPS with whitespace-free names (N, L, G, E rows)."""
    name, section, objective = "", None, None
    rows: dict[str, int] = {}
    row_types: list[str] = []
    cols: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    obj: dict[int, float] = {}
    rhs: dict[int, float] = {}
    bnd: dict[int, list[tuple[str, float | None]]] = {}
    bv_cols: set[int] = set()
    integer: set[int] = set()
    in_int = False

    def col(cname):
        if cname not in cols:
            cols[cname] = len(cols)
            if in_int:
                integer.add(cols[cname])
        return cols[cname]

    with open(path) as fh:
        for raw in fh:
            if not raw.strip() or raw.startswith("*"):
                continue
            if not raw[0].isspace():
                head = raw.split()
                section = head[0]
                if section == "NAME" and len(head) > 1:
                    name = head[1]
                continue
            tok = raw.split()
            if section == "ROWS":
                kind, rname = tok
                if kind == "N":
                    objective = objective or rname
                    continue
                rows[rname] = len(rows)
                row_types.append(kind)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                j = col(tok[0])
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname == objective:
                        obj[j] = float(val)
                    elif rname in rows:
                        entries[rows[rname], j] = float(val)
            elif section == "RHS":
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname in rows:
                        rhs[rows[rname]] = float(val)
            elif section == "BOUNDS":
                kind, cname = tok[0], tok[2]
                j = col(cname)
                val = float(tok[3]) if len(tok) > 3 else None
                bnd.setdefault(j, []).append((kind, val))
                if kind == "BV":
                    bv_cols.add(j)

    m, n = len(rows), len(cols)
    a = np.zeros((m, n))
    for (i, j), v in entries.items():
        a[i, j] = v
    c = np.zeros(n)
    for j, v in obj.items():
        c[j] = v
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    for j, specs in bnd.items():
        for kind, val in specs:
            if kind == "FR":
                lower[j], upper[j] = -np.inf, np.inf
            elif kind == "BV":
                lower[j], upper[j] = 0.0, 1.0
            elif kind == "UP":
                upper[j] = val
            elif kind == "LO":
                lower[j] = val
            elif kind == "FX":
                lower[j] = upper[j] = val
            elif kind == "MI":
                lower[j] = -np.inf
            elif kind == "PL":
                upper[j] = np.inf
    is_int = np.zeros(n, dtype=bool)
    is_int[list(integer | bv_cols)] = True
    row_names = sorted(rows, key=rows.get)
    col_names = sorted(cols, key=cols.get)
    return MpsModel(name, objective or "", row_names, row_types, col_names, c, a, b, lower, upper, is_int)
