"""Linear constraint system (LCS) games.

Variables are 0-indexed in code; ``e_1`` of the usual notation is variable 0.
Alice receives an equation and answers with an assignment to the variables
in its support; Bob receives a single variable and answers one value.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np

from .errors import InvariantError, PreconditionError

MAX_ENUMERATION_VARS = 20


@dataclass(frozen=True)
class LinearSystem:
    """Equations ``sum_j coeffs[x, j] e_j = rhs[x]`` over Z/dZ."""

    modulus: int
    coeffs: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.int64)
        r = np.array(self.rhs, dtype=np.int64)
        if self.modulus < 2:
            raise InvariantError(f"modulus must be >= 2, got {self.modulus}")
        if c.ndim != 2 or r.shape != (c.shape[0],):
            raise InvariantError(f"coefficient matrix {c.shape} and rhs {r.shape} do not match")
        for x in range(c.shape[0]):
            bad = np.flatnonzero((c[x] < 0) | (c[x] >= self.modulus))
            if bad.size:
                raise InvariantError(f"equation {x}: coefficient of variable {bad[0]} outside Z/{self.modulus}Z")
            if not 0 <= r[x] < self.modulus:
                raise InvariantError(f"equation {x}: rhs {r[x]} outside Z/{self.modulus}Z")
            if not np.any(c[x]):
                raise InvariantError(f"equation {x} has no nonzero coefficient")
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "rhs", r)

    @classmethod
    def from_supports(cls, num_vars: int, equations: Sequence[tuple[Sequence[int], int]]) -> "LinearSystem":
        """Binary system from ``(variables, rhs)`` pairs, variables 0-indexed."""
        c = np.zeros((len(equations), num_vars), dtype=np.int64)
        for x, (vars_, _) in enumerate(equations):
            c[x, list(vars_)] = 1
        return cls(2, c, [r for _, r in equations])

    @property
    def num_vars(self) -> int:
        return self.coeffs.shape[1]

    @property
    def num_equations(self) -> int:
        return self.coeffs.shape[0]

    def support(self, x: int) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.coeffs[x]))


@dataclass(frozen=True)
class LcsGame:
    """The nonlocal game of a linear system; questions are uniform over
    pairs ``(x, y)`` with a nonzero coefficient of ``e_y`` in equation ``x``."""

    system: LinearSystem
    name: str = ""

    @property
    def num_vars(self) -> int:
        return self.system.num_vars

    @property
    def num_equations(self) -> int:
        return self.system.num_equations

    @cached_property
    def question_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((x, y) for x in range(self.num_equations) for y in self.system.support(x))

    def support(self, x: int) -> tuple[int, ...]:
        return self.system.support(x)

    def odd_equations(self) -> list[int]:
        return [x for x in range(self.num_equations) if self.system.rhs[x] != 0]

    def equations_with(self, var: int) -> list[int]:
        return [x for x in range(self.num_equations) if self.system.coeffs[x, var] != 0]


def lcs_game(system: LinearSystem, name: str = "") -> LcsGame:
    if not isinstance(system, LinearSystem):
        raise InvariantError("lcs_game expects a LinearSystem")
    return LcsGame(system, name)


def verify_predicate(game: LcsGame, x: int, y: int, a: Sequence[int], b: int) -> bool:
    """Win condition: Alice's full assignment ``a`` satisfies equation ``x`` and ``a[y] == b``."""
    sysm = game.system
    if not 0 <= x < sysm.num_equations:
        raise IndexError(f"equation index {x} out of range")
    if not 0 <= y < sysm.num_vars:
        raise IndexError(f"variable index {y} out of range")
    a = np.asarray(a, dtype=np.int64)
    if a.shape != (sysm.num_vars,):
        raise IndexError(f"assignment has length {a.size}, expected {sysm.num_vars}")
    lhs = int(sysm.coeffs[x] @ a) % sysm.modulus
    return lhs == int(sysm.rhs[x]) and int(a[y]) % sysm.modulus == int(b) % sysm.modulus


def magic_square() -> LcsGame:
    """Rows and the first two columns sum to 0; the column ``e3, e6, e9`` sums to 1."""
    eqs = [
        ((0, 1, 2), 0), ((3, 4, 5), 0), ((6, 7, 8), 0),
        ((0, 3, 6), 0), ((1, 4, 7), 0), ((2, 5, 8), 1),
    ]
    return LcsGame(LinearSystem.from_supports(9, eqs), "magic_square")


PENTAGRAM_LINES = (
    ((0, 2, 5, 8), 0),
    ((0, 3, 6, 9), 0),
    ((1, 5, 7, 9), 0),
    ((4, 6, 7, 8), 0),
    ((1, 2, 3, 4), 1),
)


def magic_pentagram() -> LcsGame:
    """Five lines of four points; the line ``e2, e3, e4, e5`` is the odd one."""
    game = LcsGame(LinearSystem.from_supports(10, PENTAGRAM_LINES), "magic_pentagram")
    # transcription guard: every point on exactly two lines, a single odd line
    counts = game.system.coeffs.sum(axis=0)
    assert np.all(counts == 2) and len(game.odd_equations()) == 1
    return game


def relabel(game: LcsGame, perm: Sequence[int], name: str = "") -> LcsGame:
    """Rename variable ``j`` to ``perm[j]``."""
    perm = list(perm)
    if sorted(perm) != list(range(game.num_vars)):
        raise InvariantError("relabeling is not a permutation of the variables")
    c = np.zeros_like(game.system.coeffs)
    c[:, perm] = game.system.coeffs
    return LcsGame(LinearSystem(game.system.modulus, c, game.system.rhs), name or game.name)


def _single_odd(game: LcsGame, label: str) -> int:
    if game.system.modulus != 2:
        raise PreconditionError(f"{label}: gluing needs a binary game")
    odd = game.odd_equations()
    if len(odd) != 1:
        raise PreconditionError(f"{label}: expected exactly one equation with rhs 1, found {len(odd)}")
    return odd[0]


def glue(g: LcsGame, h: LcsGame, name: str = "") -> LcsGame:
    """Glue two binary games along their odd equations.

    ``h``'s variables are shifted by ``g.num_vars``.  Equations are ordered as
    ``g``'s even equations, then ``h``'s, then the merged odd equation.
    """
    og = _single_odd(g, "first game")
    oh = _single_odd(h, "second game")
    k, l = g.num_vars, h.num_vars
    cg, ch = g.system.coeffs, h.system.coeffs
    rows, rhs = [], []
    for x in range(g.num_equations):
        if x != og:
            rows.append(np.concatenate([cg[x], np.zeros(l, dtype=np.int64)]))
            rhs.append(0)
    for x in range(h.num_equations):
        if x != oh:
            rows.append(np.concatenate([np.zeros(k, dtype=np.int64), ch[x]]))
            rhs.append(0)
    rows.append(np.concatenate([cg[og], ch[oh]]))
    rhs.append(1)
    return LcsGame(LinearSystem(2, np.array(rows), rhs), name or f"glue({g.name},{h.name})")


def mirrored_part_labels(offset: int = 9) -> list[int]:
    """Labels placing a second Magic Square copy as in the glued-square picture:
    its local variable ``j`` (0-indexed) becomes ``offset + 8 - j``, so the odd
    column ``e3, e6, e9`` of the copy lands on ``e16, e13, e10``."""
    return [offset + 8 - j for j in range(9)]


def glued_magic_square() -> LcsGame:
    """18 variables; the merged odd equation is ``e3+e6+e9+e10+e13+e16 = 1``."""
    second = relabel(magic_square(), mirrored_part_labels(0))
    return glue(magic_square(), second, "glued_magic_square")


def _satisfying_assignments(coeffs: np.ndarray, rhs: int, modulus: int) -> np.ndarray:
    rows = [a for a in product(range(modulus), repeat=len(coeffs)) if int(np.dot(coeffs, a)) % modulus == rhs]
    return np.array(rows, dtype=np.int8).reshape(-1, len(coeffs))


def classical_value(game: LcsGame, max_vars: int = MAX_ENUMERATION_VARS, chunk: int = 1 << 14) -> Fraction:
    """Exact classical value by enumerating Bob's deterministic assignments.

    For each of Bob's ``2^k`` assignments, Alice best-responds per equation
    with the satisfying assignment agreeing with Bob on the most variables.
    """
    sysm = game.system
    if sysm.modulus != 2:
        raise PreconditionError("classical value is implemented for binary games only")
    k = sysm.num_vars
    if k > max_vars:
        raise PreconditionError(
            f"{k} variables exceed the enumeration guard of {max_vars}; use a sampling estimate instead"
        )
    pairs = len(game.question_pairs)
    if pairs == 0:
        raise PreconditionError("game has no question pairs")
    eqs = []
    for x in range(sysm.num_equations):
        supp = np.array(sysm.support(x))
        sat = _satisfying_assignments(sysm.coeffs[x, supp], int(sysm.rhs[x]), 2)
        eqs.append((supp, sat))
    best = -1
    for start in range(0, 1 << k, chunk):
        b = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        total = np.zeros(b.size, dtype=np.int64)
        for supp, sat in eqs:
            if sat.shape[0] == 0:
                continue
            bits = ((b[:, None] >> supp[None, :]) & 1).astype(np.int8)
            agree = (bits[:, None, :] == sat[None, :, :]).sum(axis=2)
            total += agree.max(axis=1)
        best = max(best, int(total.max()))
    return Fraction(best, pairs)
