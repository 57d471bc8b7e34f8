"""Reading and editing MATPOWER case files.

Only the ``baseMVA``, ``bus``, ``gen`` and ``branch`` assignments are read;
``gencost``, bus names and any function bodies are skipped.  Rows are kept
exactly as written (all columns), so a parsed case can be written back out
and re-read without loss.

Removal contingencies flip a status flag rather than deleting rows, which keeps
row numbers in reports identical to the source file.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DisconnectsNetwork,
    DuplicateBusId,
    IndexOutOfRange,
    InvalidCase,
    MalformedRow,
    MissingSection,
)

# bus columns
BUS_I, BUS_TYPE, PD, QD, GS, BS, BUS_AREA, VM, VA, BASE_KV, ZONE, VMAX, VMIN = range(13)
# gen columns
GEN_BUS, PG, QG, QMAX, QMIN, VG, MBASE, GEN_STATUS = range(8)
# branch columns
F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, RATE_B, RATE_C, TAP, SHIFT, BR_STATUS = range(11)

PQ, PV, REF, NONE = 1, 2, 3, 4

_MIN_COLS = {"bus": 13, "gen": 8, "branch": 11}
_ASSIGN = re.compile(r"^\s*(?:mpc\s*\.\s*)?(baseMVA|bus|gen|branch)\s*=\s*(.*)$")


@dataclass(frozen=True, eq=False)
class RawCase:
    """Power-flow tables of a MATPOWER case, in file units (MW, MVAr, degrees)."""

    baseMVA: float
    bus: np.ndarray
    gen: np.ndarray
    branch: np.ndarray
    name: str = "case"

    def __post_init__(self):
        for field in ("bus", "gen", "branch"):
            arr = np.array(getattr(self, field), dtype=float, copy=True)
            if arr.ndim != 2:
                arr = arr.reshape(-1, _MIN_COLS[field])
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        object.__setattr__(self, "baseMVA", float(self.baseMVA))

    def __eq__(self, other):
        if not isinstance(other, RawCase):
            return NotImplemented
        return (
            self.baseMVA == other.baseMVA
            and np.array_equal(self.bus, other.bus)
            and np.array_equal(self.gen, other.gen)
            and np.array_equal(self.branch, other.branch)
        )

    __hash__ = None

    @property
    def n_bus(self):
        return self.bus.shape[0]

    @property
    def n_branch(self):
        return self.branch.shape[0]

    @property
    def n_gen(self):
        return self.gen.shape[0]

    def bus_index(self):
        """Map external bus id -> 0-based row position."""
        return {int(b): i for i, b in enumerate(self.bus[:, BUS_I])}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "name": self.name,
            "baseMVA": self.baseMVA,
            "bus": self.bus.tolist(),
            "gen": self.gen.tolist(),
            "branch": self.branch.tolist(),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def validate_case(case):
    if not case.baseMVA > 0:
        raise InvalidCase(f"baseMVA must be positive, got {case.baseMVA}")
    ids = case.bus[:, BUS_I].astype(int)
    seen = set()
    for b in ids:
        if b in seen:
            raise DuplicateBusId(int(b))
        seen.add(b)
    n_ref = int(np.sum(case.bus[:, BUS_TYPE] == REF))
    if n_ref != 1:
        raise InvalidCase(f"expected exactly one reference bus, found {n_ref}")
    for col, table, label in (
        (F_BUS, case.branch, "branch from-bus"),
        (T_BUS, case.branch, "branch to-bus"),
        (GEN_BUS, case.gen, "generator bus"),
    ):
        for b in table[:, col].astype(int):
            if b not in seen:
                raise InvalidCase(f"{label} {b} is not in the bus table")
    return case


def _strip_comment(line):
    # '%' never appears inside the numeric blocks we read; strings are ignored
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _parse_rows(lines, start, first_rest, name):
    """Collect matrix rows starting after ``name = [``.

    Returns (rows, next_line_index).
    """
    rows = []
    current = []
    current_line = start + 1
    body = first_rest
    i = start
    while True:
        end = body.find("]")
        chunk = body if end < 0 else body[:end]
        pieces = chunk.split(";")
        for j, piece in enumerate(pieces):
            tokens = piece.replace(",", " ").split()
            if tokens:
                if not current:
                    current_line = i + 1
                for tok in tokens:
                    try:
                        current.append(float(tok))
                    except ValueError:
                        raise MalformedRow(i + 1, f"non-numeric token {tok!r} in '{name}'") from None
            if j < len(pieces) - 1 and current:
                rows.append((current_line, current))
                current = []
        # newline also ends a row
        if current:
            rows.append((current_line, current))
            current = []
        if end >= 0:
            return rows, i + 1
        i += 1
        if i >= len(lines):
            raise MalformedRow(i, f"unterminated matrix '{name}'")
        body = _strip_comment(lines[i])


def parse_case(text, name="case"):
    """Parse MATPOWER case text into a :class:`RawCase`.

    Accepts both the version-2 ``mpc.bus = [...]`` form and the older bare
    ``bus = [...]`` form.
    """
    lines = text.splitlines()
    found = {}
    i = 0
    while i < len(lines):
        line = _strip_comment(lines[i])
        m = _ASSIGN.match(line)
        if not m:
            i += 1
            continue
        key, rest = m.group(1), m.group(2)
        if key == "baseMVA":
            val = rest.strip().rstrip(";").strip()
            try:
                found[key] = float(val)
            except ValueError:
                raise MalformedRow(i + 1, f"baseMVA value {val!r}") from None
            i += 1
            continue
        if not rest.lstrip().startswith("["):
            i += 1
            continue
        rows, i = _parse_rows(lines, i, rest.lstrip()[1:], key)
        width = max((len(r) for _, r in rows), default=_MIN_COLS[key])
        for lineno, r in rows:
            if len(r) != width:
                raise MalformedRow(lineno, f"'{key}' row has {len(r)} columns, expected {width}")
            if len(r) < _MIN_COLS[key]:
                raise MalformedRow(lineno, f"'{key}' rows need at least {_MIN_COLS[key]} columns")
        found[key] = np.array([r for _, r in rows], dtype=float).reshape(len(rows), width)
    for key in ("baseMVA", "bus", "gen", "branch"):
        if key not in found:
            raise MissingSection(key)
    case = RawCase(found["baseMVA"], found["bus"], found["gen"], found["branch"], name=name)
    return validate_case(case)


def read_case(path):
    """Read a case from a path, or from the bundled data when given a bare name like ``case57``."""
    p = Path(path)
    if not p.exists() and p.suffix in ("", ".m") and p.parent == Path("."):
        bundled = resources.files("feasrestore") / "data" / (p.stem + ".m")
        if bundled.is_file():
            return parse_case(bundled.read_text(), name=p.stem)
    return parse_case(p.read_text(), name=p.stem)


def _fmt(x):
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def serialize_case(case):
    """Render ``case`` as MATPOWER version-2 text that :func:`parse_case` reads back identically."""
    out = [f"function mpc = {case.name}", "mpc.version = '2';", f"mpc.baseMVA = {_fmt(case.baseMVA)};"]
    for key in ("bus", "gen", "branch"):
        out.append(f"mpc.{key} = [")
        for row in getattr(case, key):
            out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
        out.append("];")
    return "\n".join(out) + "\n"


def check_connected(case):
    """True iff the in-service branches connect every bus."""
    n = case.n_bus
    if n <= 1:
        return True
    idx = case.bus_index()
    on = case.branch[:, BR_STATUS] > 0
    f = np.array([idx[int(b)] for b in case.branch[on, F_BUS]], dtype=int)
    t = np.array([idx[int(b)] for b in case.branch[on, T_BUS]], dtype=int)
    adj = coo_matrix((np.ones(len(f)), (f, t)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


@dataclass(frozen=True)
class Contingency:
    """A disruption to apply to a case.

    ``line_index`` and ``gen_index`` are 1-based row numbers in the branch and
    generator tables, matching how lines and generators are numbered in the
    case file.
    """

    kind: str = "none"
    beta: float = 1.0
    line_index: int | None = None
    gen_index: int | None = None

    KINDS = ("none", "impedance_scale", "remove_line", "remove_generator")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown contingency kind {self.kind!r}")
        if self.kind == "impedance_scale" and not self.beta >= 1.0:
            raise ValueError(f"impedance scale factor must be >= 1, got {self.beta}")

    @classmethod
    def scale(cls, beta):
        return cls("impedance_scale", beta=float(beta))

    @classmethod
    def line(cls, index):
        return cls("remove_line", line_index=int(index))

    @classmethod
    def generator(cls, index):
        return cls("remove_generator", gen_index=int(index))

    def label(self):
        if self.kind == "impedance_scale":
            return f"beta={self.beta:g}"
        if self.kind == "remove_line":
            return f"line {self.line_index}"
        if self.kind == "remove_generator":
            return f"gen {self.gen_index}"
        return "base"


def apply_contingency(case, c):
    """Return a new case with contingency ``c`` applied."""
    if c.kind == "none":
        return case
    if c.kind == "impedance_scale":
        branch = case.branch.copy()
        on = branch[:, BR_STATUS] > 0
        branch[on, BR_R] *= c.beta
        branch[on, BR_X] *= c.beta
        return case.replace(branch=branch)
    if c.kind == "remove_line":
        k = c.line_index
        if k is None or not 1 <= k <= case.n_branch:
            raise IndexOutOfRange(f"line {k} not in 1..{case.n_branch}")
        branch = case.branch.copy()
        branch[k - 1, BR_STATUS] = 0
        out = case.replace(branch=branch)
        if not check_connected(out):
            raise DisconnectsNetwork(f"removing line {k} splits the network")
        return out
    k = c.gen_index
    if k is None or not 1 <= k <= case.n_gen:
        raise IndexOutOfRange(f"generator {k} not in 1..{case.n_gen}")
    gen = case.gen.copy()
    bus = case.bus.copy()
    gen[k - 1, GEN_STATUS] = 0
    bus_id = int(gen[k - 1, GEN_BUS])
    row = case.bus_index()[bus_id]
    if bus[row, BUS_TYPE] == REF:
        raise IndexOutOfRange(f"generator {k} sits on the reference bus and cannot be removed")
    still_on = np.any((gen[:, GEN_BUS].astype(int) == bus_id) & (gen[:, GEN_STATUS] > 0))
    if not still_on:
        bus[row, BUS_TYPE] = PQ
    return case.replace(gen=gen, bus=bus)
