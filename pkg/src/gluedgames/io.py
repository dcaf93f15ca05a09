"""JSON and CSV formats for games, strategies, witnesses and reports.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists.  Floats go through ``repr`` so strategies round-trip bit-exactly.
Loaders report the JSON path of the offending field.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import GluedGamesError, InvariantError
from .games import LcsGame, LinearSystem
from .linalg import BipartiteState
from .strategies import BipartiteStrategy, DilationWitness


class FormatError(GluedGamesError):
    """Malformed input file; the message names the file and the field path."""


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[complex_to_json(z) for z in row] for row in m]


def _complex(obj, where: str) -> complex:
    if (
        not isinstance(obj, list)
        or len(obj) != 2
        or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in obj)
    ):
        raise FormatError(f"{where}: expected [re, im], got {obj!r}")
    return complex(obj[0], obj[1])


def _matrix(obj, where: str, shape=None) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise FormatError(f"{where}: expected a nonempty list of rows")
    ncol = len(obj[0])
    rows = []
    for r, row in enumerate(obj):
        if len(row) != ncol:
            raise FormatError(f"{where}[{r}]: row has {len(row)} entries, expected {ncol}")
        rows.append([_complex(z, f"{where}[{r}][{c}]") for c, z in enumerate(row)])
    m = np.array(rows, dtype=complex)
    if shape is not None and m.shape != shape:
        raise FormatError(f"{where}: shape {m.shape}, expected {shape}")
    return m


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _int(obj, where: str) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool):
        raise FormatError(f"{where}: expected an integer, got {obj!r}")
    return obj


def game_to_json(game: LcsGame) -> dict:
    s = game.system
    return {
        "name": game.name,
        "modulus": int(s.modulus),
        "num_vars": int(s.num_vars),
        "equations": [{"coeffs": [int(c) for c in s.coeffs[x]], "rhs": int(s.rhs[x])} for x in range(s.num_equations)],
    }


def game_from_json(obj, source: str = "<game>") -> LcsGame:
    d = _int(_field(obj, "modulus", source), f"{source}: modulus")
    k = _int(_field(obj, "num_vars", source), f"{source}: num_vars")
    eqs = _field(obj, "equations", source)
    if not isinstance(eqs, list):
        raise FormatError(f"{source}: equations must be a list")
    coeffs, rhs = [], []
    for x, eq in enumerate(eqs):
        where = f"{source}: equations[{x}]"
        c = _field(eq, "coeffs", where)
        if not isinstance(c, list) or len(c) != k:
            raise FormatError(f"{where}.coeffs: expected a list of {k} integers")
        coeffs.append([_int(v, f"{where}.coeffs[{j}]") for j, v in enumerate(c)])
        rhs.append(_int(_field(eq, "rhs", where), f"{where}.rhs"))
    try:
        system = LinearSystem(d, np.array(coeffs, dtype=np.int64).reshape(len(eqs), k), rhs)
    except InvariantError as exc:
        raise FormatError(f"{source}: {exc}") from None
    return LcsGame(system, obj.get("name", ""))


def state_to_json(state: BipartiteState) -> dict:
    return {"dim_a": state.dim_a, "dim_b": state.dim_b, "state": [complex_to_json(z) for z in state.vector]}


def state_from_json(obj, source: str = "<state>") -> BipartiteState:
    da = _int(_field(obj, "dim_a", source), f"{source}: dim_a")
    db = _int(_field(obj, "dim_b", source), f"{source}: dim_b")
    vec = _field(obj, "state", source)
    if not isinstance(vec, list) or len(vec) != da * db:
        raise FormatError(f"{source}: state must list {da * db} amplitudes")
    v = np.array([_complex(z, f"{source}: state[{n}]") for n, z in enumerate(vec)], dtype=complex)
    try:
        return BipartiteState.from_vector(v, da, db)
    except InvariantError as exc:
        raise FormatError(f"{source}: state: {exc}") from None


def strategy_to_json(strat: BipartiteStrategy) -> dict:
    out = state_to_json(strat.state)
    out["alice"] = [matrix_to_json(a) for a in strat.alice]
    out["bob"] = [matrix_to_json(b) for b in strat.bob]
    if strat.alice_per_equation:
        out["alice_per_equation"] = {f"{x},{i}": matrix_to_json(a) for (x, i), a in sorted(strat.alice_per_equation.items())}
    return out


def strategy_from_json(obj, source: str = "<strategy>") -> BipartiteStrategy:
    state = state_from_json(obj, source)
    da, db = state.dim_a, state.dim_b
    alice = _field(obj, "alice", source)
    bob = _field(obj, "bob", source)
    if not isinstance(alice, list) or not isinstance(bob, list):
        raise FormatError(f"{source}: alice and bob must be lists of matrices")
    a = [_matrix(m, f"{source}: alice[{i}]", (da, da)) for i, m in enumerate(alice)]
    b = [_matrix(m, f"{source}: bob[{j}]", (db, db)) for j, m in enumerate(bob)]
    per = {}
    for key, m in (obj.get("alice_per_equation") or {}).items():
        try:
            x, i = (int(t) for t in key.split(","))
        except ValueError:
            raise FormatError(f"{source}: alice_per_equation key {key!r} is not 'x,i'") from None
        per[(x, i)] = _matrix(m, f"{source}: alice_per_equation[{key!r}]", (da, da))
    try:
        return BipartiteStrategy(state, tuple(a), tuple(b), per)
    except InvariantError as exc:
        raise FormatError(f"{source}: {exc}") from None


def witness_to_json(w: DilationWitness) -> dict:
    return {
        "isometry_a": matrix_to_json(w.isometry_a),
        "isometry_b": matrix_to_json(w.isometry_b),
        "aux_state": state_to_json(w.aux_state),
    }


def witness_from_json(obj, source: str = "<witness>") -> DilationWitness:
    return DilationWitness(
        _matrix(_field(obj, "isometry_a", source), f"{source}: isometry_a"),
        _matrix(_field(obj, "isometry_b", source), f"{source}: isometry_b"),
        state_from_json(_field(obj, "aux_state", source), f"{source}: aux_state"),
    )


def dumps(obj) -> str:
    """Deterministic JSON text."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path) -> object:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FormatError(f"{p}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_game(path) -> LcsGame:
    return game_from_json(read_json(path), str(path))


def load_strategy(path) -> BipartiteStrategy:
    return strategy_from_json(read_json(path), str(path))


def load_witness(path) -> DilationWitness:
    return witness_from_json(read_json(path), str(path))


def load_state(path) -> BipartiteState:
    return state_from_json(read_json(path), str(path))


CSV_COLUMNS = ("seed", "epsilon", "lemma", "bound", "measured", "slack")


def rows_to_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r[k], float) else r[k]) for k in CSV_COLUMNS})
    return buf.getvalue()
