"""Quantum strategies of observables for binary LCS games.

A strategy is a shared state plus one observable per variable for each party.
Alice may optionally use a different observable for a variable depending on
the equation she was asked (``alice_per_equation``).

Bob's ideal observables are entrywise transposes of Alice's, which is what
makes ``(A (x) A^T)|psi_k> = |psi_k>`` on a maximally entangled state.  For the
real symmetric Magic Square operators this is the identity map, but several
Magic Pentagram operators contain a single ``Y`` and pick up a sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Literal, Mapping, Sequence

import numpy as np

from . import linalg as la
from .errors import InvariantError, PreconditionError
from .games import LcsGame
from .linalg import BipartiteState, TOL

MS_IDEAL_LABELS = ("ZI", "IZ", "ZZ", "IX", "XI", "XX", "ZX", "XZ", "YY")
MP_IDEAL_LABELS = ("XII", "YXY", "XXX", "XYY", "YYX", "IXI", "IYI", "YII", "IIX", "IIY")

# words in the generators (0-indexed) for the nine positions of a Magic Square
# filled by a representation of (Z/2Z)^4
REP_WORDS = ((0,), (1,), (0, 1), (2,), (3,), (2, 3), (0, 2), (1, 3), (0, 1, 2, 3))

MeasurementOrder = Literal["increasing", "decreasing"]


def _readonly(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BipartiteStrategy:
    state: BipartiteState
    alice: tuple
    bob: tuple
    alice_per_equation: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.alice) != len(self.bob):
            raise InvariantError(f"Alice has {len(self.alice)} observables, Bob {len(self.bob)}")
        da, db = self.state.dim_a, self.state.dim_b
        alice = tuple(_readonly(la.check_observable(a, name=f"Alice observable {i}")) for i, a in enumerate(self.alice))
        bob = tuple(_readonly(la.check_observable(b, name=f"Bob observable {j}")) for j, b in enumerate(self.bob))
        per_eq = {
            (int(x), int(i)): _readonly(la.check_observable(a, name=f"Alice observable {i} in equation {x}"))
            for (x, i), a in dict(self.alice_per_equation).items()
        }
        for i, a in enumerate(alice):
            if a.shape != (da, da):
                raise InvariantError(f"Alice observable {i} has shape {a.shape}, state needs {(da, da)}")
        for j, b in enumerate(bob):
            if b.shape != (db, db):
                raise InvariantError(f"Bob observable {j} has shape {b.shape}, state needs {(db, db)}")
        for key, a in per_eq.items():
            if a.shape != (da, da) or not 0 <= key[1] < len(alice):
                raise InvariantError(f"per-equation observable {key} does not fit the strategy")
        object.__setattr__(self, "alice", alice)
        object.__setattr__(self, "bob", bob)
        object.__setattr__(self, "alice_per_equation", per_eq)

    @property
    def num_vars(self) -> int:
        return len(self.alice)

    @property
    def dim_a(self) -> int:
        return self.state.dim_a

    @property
    def dim_b(self) -> int:
        return self.state.dim_b

    def alice_obs(self, x: int, i: int) -> np.ndarray:
        """Observable Alice uses for variable ``i`` when asked equation ``x``."""
        return self.alice_per_equation.get((x, i), self.alice[i])


def _check_fits(game: LcsGame, strat: BipartiteStrategy):
    if strat.num_vars != game.num_vars:
        raise InvariantError(f"strategy has {strat.num_vars} observables per party, game has {game.num_vars} variables")
    if game.system.modulus != 2:
        raise PreconditionError("strategies of observables are defined for binary games only")


def equation_win_probabilities(
    game: LcsGame, strat: BipartiteStrategy, order: MeasurementOrder = "increasing"
) -> dict[tuple[int, int], float]:
    """Winning probability conditioned on each question pair."""
    _check_fits(game, strat)
    psi = strat.state.amplitudes
    bob_proj = {}
    out = {}
    for x in range(game.num_equations):
        supp = game.support(x)
        seq = list(supp) if order == "increasing" else list(reversed(supp))
        branches = psi[None]
        for i in seq:
            p0, p1 = la.eigenprojectors(strat.alice_obs(x, i))
            branches = np.stack([p0 @ branches, p1 @ branches], axis=1).reshape(-1, *psi.shape)
        # leaf index bits follow ``seq`` with the first measured variable most significant
        outcomes = np.array(list(product((0, 1), repeat=len(seq))), dtype=np.int64)
        pos = {v: n for n, v in enumerate(seq)}
        sat = (outcomes.sum(axis=1) % 2) == game.system.rhs[x]
        leaves = branches[sat]
        sat_outcomes = outcomes[sat]
        for y in supp:
            if y not in bob_proj:
                bob_proj[y] = la.eigenprojectors(strat.bob[y])
            norms = [np.sum(np.abs(leaves @ q.T) ** 2, axis=(1, 2)) for q in bob_proj[y]]
            pick = sat_outcomes[:, pos[y]]
            out[(x, y)] = float(np.sum(np.where(pick == 0, norms[0], norms[1])))
    return out


def winning_probability(game: LcsGame, strat: BipartiteStrategy, order: MeasurementOrder = "increasing") -> float:
    """Average over question pairs of the probability that the referee accepts.

    Alice measures the observables of her equation one after another (in
    increasing variable order by default); the +1 eigenspace means answer 0.
    """
    probs = equation_win_probabilities(game, strat, order)
    return float(sum(probs[q] for q in game.question_pairs) / len(game.question_pairs))


def consistency(strat: BipartiteStrategy, i: int) -> float:
    """``Re <psi| A_i (x) B_i |psi>``."""
    return la.expectation(strat.state.amplitudes, strat.alice[i], strat.bob[i]).real


def _transpose_all(obs):
    return [np.asarray(a).T.copy() for a in obs]


def ideal_magic_square() -> BipartiteStrategy:
    """Two EPR pairs and the Pauli grid with the odd column ``ZZ, XX, YY``."""
    alice = [la.pauli(s) for s in MS_IDEAL_LABELS]
    return BipartiteStrategy(la.make_max_entangled(4), tuple(alice), tuple(_transpose_all(alice)))


def ideal_magic_pentagram() -> BipartiteStrategy:
    """Three EPR pairs and Mermin's three-qubit Pauli assignment."""
    alice = [la.pauli(s) for s in MP_IDEAL_LABELS]
    return BipartiteStrategy(la.make_max_entangled(8), tuple(alice), tuple(_transpose_all(alice)))


@dataclass(frozen=True)
class Representation4:
    """Representation of (Z/2Z)^4 as a direct sum of one-dimensional characters.

    ``characters[j, g]`` is the sign of generator ``g`` on basis vector ``j``
    (column ``j`` of ``basis``).
    """

    characters: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        chars = np.array(self.characters, dtype=np.int64).reshape(-1, 4)
        if chars.shape[0] == 0 or not np.all(np.abs(chars) == 1):
            raise InvariantError("characters must be a nonempty list of sign vectors in {-1,+1}^4")
        basis = la.check_unitary(self.basis, name="representation basis")
        if basis.shape[0] != chars.shape[0]:
            raise InvariantError(f"{chars.shape[0]} characters but basis of dimension {basis.shape[0]}")
        object.__setattr__(self, "characters", chars)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.characters.shape[0]

    def image(self, word: Sequence[int]) -> np.ndarray:
        """Image of a product of generators."""
        signs = np.prod(self.characters[:, list(word)], axis=1) if len(word) else np.ones(self.dim)
        return la.hermitize((self.basis * signs) @ self.basis.conj().T)

    def generators(self) -> list[np.ndarray]:
        return [self.image((g,)) for g in range(4)]

    def grid(self) -> list[np.ndarray]:
        """The nine operators ``G_1..G_9`` laid out like a Magic Square."""
        return [self.image(w) for w in REP_WORDS]


def representation_from_characters(chars, basis=None) -> Representation4:
    chars = np.array(chars, dtype=np.int64).reshape(-1, 4)
    if basis is None:
        basis = la.bell_basis() if chars.shape[0] == 4 else np.eye(chars.shape[0], dtype=complex)
    return Representation4(chars, basis)


def random_characters(rng: np.random.Generator, count: int = 4) -> np.ndarray:
    return rng.choice([-1, 1], size=(count, 4))


def mirror_var(i: int) -> int:
    """0-indexed partner of variable ``i`` in the other half of the glued square (``e_i <-> e_{19-i}``)."""
    return 17 - i


def build_glued_strategy(part: int, rep: Representation4, tol: float = TOL) -> BipartiteStrategy:
    """Perfect Glued Magic Square strategy: the ideal square on one half and the
    representation grid on the other.

    ``part=1`` puts the ideal operators on ``e1..e9`` and ``G_i`` on ``e_{19-i}``;
    ``part=2`` exchanges the halves.
    """
    if part not in (1, 2):
        raise InvariantError(f"part must be 1 or 2, got {part}")
    if rep.dim != 4:
        raise PreconditionError(f"representation must act on C^4, got dimension {rep.dim}")
    ideal = [la.pauli(s) for s in MS_IDEAL_LABELS]
    grid = rep.grid()
    worst = max(la.op_norm(grid[k] @ ideal[l] - ideal[l] @ grid[k]) for k in (2, 5, 8) for l in (2, 5, 8))
    if worst > tol:
        raise PreconditionError(f"representation does not commute with the odd-column operators (max commutator norm {worst:.3e})")
    first, second = (ideal, grid) if part == 1 else (grid, ideal)
    alice = [None] * 18
    for i in range(9):
        alice[i] = first[i]
        alice[mirror_var(i)] = second[i]
    return BipartiteStrategy(la.make_max_entangled(4), tuple(alice), tuple(_transpose_all(alice)))


def convex_combination(parts: Sequence[tuple[float, BipartiteStrategy]], tol: float = TOL) -> BipartiteStrategy:
    """External direct sum ``(+)_k alpha_k S_k`` with ``sum alpha_k^2 = 1``."""
    if not parts:
        raise InvariantError("convex combination of zero strategies")
    n = parts[0][1].num_vars
    if any(s.num_vars != n for _, s in parts):
        raise InvariantError("strategies in a convex combination must have equal variable counts")
    state = la.embed_direct_sum_state([(w, s.state) for w, s in parts], tol)
    alice = [la.direct_sum_operators([s.alice[i] for _, s in parts]) for i in range(n)]
    bob = [la.direct_sum_operators([s.bob[i] for _, s in parts]) for i in range(n)]
    keys = set().union(*(s.alice_per_equation.keys() for _, s in parts))
    per_eq = {k: la.direct_sum_operators([s.alice_obs(*k) for _, s in parts]) for k in keys}
    return BipartiteStrategy(state, tuple(alice), tuple(bob), per_eq)


def conjugate_local(strat: BipartiteStrategy, u_a, u_b, tol: float = TOL) -> BipartiteStrategy:
    """Strategy seen through local unitaries: state ``(U_A (x) U_B) psi``, observables ``U O U^*``."""
    u_a = la.check_unitary(u_a, tol, "U_A")
    u_b = la.check_unitary(u_b, tol, "U_B")
    if u_a.shape[0] != strat.dim_a or u_b.shape[0] != strat.dim_b:
        raise InvariantError("unitary dimensions do not match the strategy")
    ca = lambda m: la.hermitize(u_a @ m @ u_a.conj().T)  # noqa: E731
    cb = lambda m: la.hermitize(u_b @ m @ u_b.conj().T)  # noqa: E731
    state = BipartiteState.normalized(la.apply_local(strat.state.amplitudes, u_a, u_b))
    return BipartiteStrategy(
        state,
        tuple(ca(a) for a in strat.alice),
        tuple(cb(b) for b in strat.bob),
        {k: ca(a) for k, a in strat.alice_per_equation.items()},
    )


def tensor_aux(strat: BipartiteStrategy, aux: BipartiteState) -> BipartiteStrategy:
    """``S (x) |aux>``: observables act trivially on the auxiliary registers."""
    ia = np.eye(aux.dim_a)
    ib = np.eye(aux.dim_b)
    return BipartiteStrategy(
        BipartiteState(np.kron(strat.state.amplitudes, aux.amplitudes)),
        tuple(np.kron(a, ia) for a in strat.alice),
        tuple(np.kron(b, ib) for b in strat.bob),
        {k: np.kron(a, ia) for k, a in strat.alice_per_equation.items()},
    )


def embed_part(strat: BipartiteStrategy, num_vars: int, var_map: Sequence[int]) -> BipartiteStrategy:
    """Place ``strat``'s observables on variables ``var_map`` of a larger game; identity elsewhere."""
    ia = np.eye(strat.dim_a, dtype=complex)
    ib = np.eye(strat.dim_b, dtype=complex)
    alice = [ia] * num_vars
    bob = [ib] * num_vars
    for j, v in enumerate(var_map):
        alice[v] = strat.alice[j]
        bob[v] = strat.bob[j]
    return BipartiteStrategy(strat.state, tuple(alice), tuple(bob))


def identity_strategy(num_vars: int, state: BipartiteState) -> BipartiteStrategy:
    ia = np.eye(state.dim_a, dtype=complex)
    ib = np.eye(state.dim_b, dtype=complex)
    return BipartiteStrategy(state, (ia,) * num_vars, (ib,) * num_vars)


# Generator-level sign patterns of the two non-active blocks in the worked
# Glued Magic Square example; the remaining five positions of each grid are
# the corresponding group products.
EXAMPLE_PATTERN_FIRST = (1, -1, 1, 1)
EXAMPLE_PATTERN_SECOND = (-1, -1, 1, -1)


def _pattern_representation(pattern) -> Representation4:
    return representation_from_characters([[p] * 4 for p in pattern])


def example_strategy(alpha: float, beta: float, xi: BipartiteState, tol: float = TOL) -> BipartiteStrategy:
    """Perfect strategy ``alpha |psi4> (+) beta (|psi4> (x) |xi>)`` built from two
    copies of the ideal square, one per half, padded by sign representations.

    Block 1 (C^4) runs the ideal square on ``e1..e9``; block 2 (C^4 (x) aux)
    runs it on ``e10..e18``.  The inactive half of each block carries the
    representation whose generators are the diagonal sign patterns above,
    taken in the Bell basis so they commute with ``ZZ, XX, YY``.
    """
    if alpha <= 0 or beta <= 0:
        raise InvariantError("alpha and beta must be positive")
    if abs(alpha**2 + beta**2 - 1) > tol:
        raise InvariantError(f"alpha^2 + beta^2 = {alpha**2 + beta**2:.12g}, expected 1")
    ideal = [la.pauli(s) for s in MS_IDEAL_LABELS]
    grid1 = _pattern_representation(EXAMPLE_PATTERN_SECOND).grid()
    grid2 = _pattern_representation(EXAMPLE_PATTERN_FIRST).grid()
    aux_a = np.eye(xi.dim_a)
    block1 = [None] * 18
    block2 = [None] * 18
    for i in range(9):
        block1[i] = ideal[i]
        block1[mirror_var(i)] = grid1[i]
        block2[i] = np.kron(grid2[i], aux_a)
        block2[mirror_var(i)] = np.kron(ideal[i], aux_a)
    psi4 = la.make_max_entangled(4)
    # Bob's auxiliary register is traced by identity, so reuse Alice's blocks with Bob's dimensions
    aux_b = np.eye(xi.dim_b)
    bob2 = [None] * 18
    for i in range(9):
        bob2[i] = np.kron(grid2[i].T, aux_b)
        bob2[mirror_var(i)] = np.kron(ideal[i].T, aux_b)
    s1 = BipartiteStrategy(psi4, tuple(block1), tuple(_transpose_all(block1)))
    s2 = BipartiteStrategy(BipartiteState(np.kron(psi4.amplitudes, xi.amplitudes)), tuple(block2), tuple(bob2))
    return convex_combination([(alpha, s1), (beta, s2)], tol)


@dataclass
class OperatorSolutionReport:
    """Residuals of the operator-solution relations measured on the state."""

    agreement: dict = field(default_factory=dict)
    commutation: dict = field(default_factory=dict)
    constraint: dict = field(default_factory=dict)
    bob_commutation: dict = field(default_factory=dict)
    bob_constraint: dict = field(default_factory=dict)
    tol: float = TOL

    def max_residual(self) -> float:
        vals = [v for d in (self.agreement, self.commutation, self.constraint, self.bob_commutation, self.bob_constraint) for v in d.values()]
        return max(vals, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual() <= self.tol


def check_operator_solution(game: LcsGame, strat: BipartiteStrategy, tol: float = TOL) -> OperatorSolutionReport:
    """Measure how far a strategy is from an operator solution of the game.

    Each relation ``R = 0`` is reported as ``||(R (x) I)|psi>||`` (or its Bob mirror).
    """
    _check_fits(game, strat)
    psi = strat.state.amplitudes
    rep = OperatorSolutionReport(tol=tol)
    for (x, i), a in strat.alice_per_equation.items():
        for x2 in game.equations_with(i):
            if x2 != x:
                d = a - strat.alice_obs(x2, i)
                rep.agreement[(x, x2, i)] = float(np.linalg.norm(la.apply_local(psi, d)))
    for x in range(game.num_equations):
        supp = game.support(x)
        sign = (-1) ** int(game.system.rhs[x])
        prod_a = np.eye(strat.dim_a, dtype=complex)
        prod_b = np.eye(strat.dim_b, dtype=complex)
        for n, i in enumerate(supp):
            ai = strat.alice_obs(x, i)
            prod_a = prod_a @ ai
            prod_b = prod_b @ strat.bob[i]
            for j in supp[n + 1:]:
                aj = strat.alice_obs(x, j)
                rep.commutation[(x, i, j)] = float(np.linalg.norm(la.apply_local(psi, ai @ aj - aj @ ai)))
                bi, bj = strat.bob[i], strat.bob[j]
                rep.bob_commutation[(x, i, j)] = float(np.linalg.norm(la.apply_local(psi, None, bi @ bj - bj @ bi)))
        rep.constraint[x] = float(np.linalg.norm(la.apply_local(psi, prod_a - sign * np.eye(strat.dim_a))))
        rep.bob_constraint[x] = float(np.linalg.norm(la.apply_local(psi, None, prod_b - sign * np.eye(strat.dim_b))))
    return rep


@dataclass(frozen=True)
class DilationWitness:
    """Local isometries ``U_A, U_B`` and auxiliary state of a claimed dilation.

    ``isometry_a`` maps Alice's space into ``(ideal space) (x) (aux_A)``; the
    ideal index is the major one.
    """

    isometry_a: np.ndarray
    isometry_b: np.ndarray
    aux_state: BipartiteState

    def validate(self, tol: float = TOL) -> None:
        la.check_isometry(self.isometry_a, tol, "U_A")
        la.check_isometry(self.isometry_b, tol, "U_B")


@dataclass
class DilationReport:
    state_residual: float
    alice_residuals: list
    bob_residuals: list
    tol: float = TOL
    notes: list = field(default_factory=list)

    def max_residual(self) -> float:
        return max([self.state_residual, *self.alice_residuals, *self.bob_residuals])

    @property
    def passed(self) -> bool:
        return self.max_residual() <= self.tol


def dilation_residuals(strat, u_a, u_b, target_state, target_alice, target_bob, tol) -> DilationReport:
    """Residuals of ``U psi = T``, ``U (A_i (x) I) psi = T_i^A``, ``U (I (x) B_j) psi = T_j^B``.

    Targets are amplitude matrices on the dilated spaces.
    """
    psi = strat.state.amplitudes
    if u_a.shape[1] != strat.dim_a or u_b.shape[1] != strat.dim_b:
        raise InvariantError("isometry domains do not match the strategy dimensions")
    if target_state.shape != (u_a.shape[0], u_b.shape[0]):
        raise InvariantError(f"target state shape {target_state.shape} does not match isometry ranges {(u_a.shape[0], u_b.shape[0])}")
    mapped = lambda m: u_a @ m @ u_b.T  # noqa: E731
    state_res = float(np.linalg.norm(mapped(psi) - target_state))
    alice_res = [float(np.linalg.norm(mapped(a @ psi) - t)) for a, t in zip(strat.alice, target_alice)]
    bob_res = [float(np.linalg.norm(mapped(psi @ b.T) - t)) for b, t in zip(strat.bob, target_bob)]
    return DilationReport(state_res, alice_res, bob_res, tol)


def verify_local_dilation(strat: BipartiteStrategy, ideal: BipartiteStrategy, witness: DilationWitness, tol: float = TOL) -> DilationReport:
    """Check that ``ideal`` is a local dilation of ``strat`` via the given witness."""
    if strat.num_vars != ideal.num_vars:
        raise InvariantError("strategies have different numbers of observables")
    witness.validate(tol)
    aux = witness.aux_state.amplitudes
    u_a = np.asarray(witness.isometry_a, dtype=complex)
    u_b = np.asarray(witness.isometry_b, dtype=complex)
    if u_a.shape[0] != ideal.dim_a * aux.shape[0] or u_b.shape[0] != ideal.dim_b * aux.shape[1]:
        raise InvariantError("isometry ranges do not match ideal (x) aux dimensions")
    t = ideal.state.amplitudes
    return dilation_residuals(
        strat, u_a, u_b,
        np.kron(t, aux),
        [np.kron(a @ t, aux) for a in ideal.alice],
        [np.kron(t @ b.T, aux) for b in ideal.bob],
        tol,
    )
