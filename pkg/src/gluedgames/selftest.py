"""Exact (perfect-strategy) self-testing machinery for glued games.

The centerpiece is :func:`decompose_gms`, which splits a perfect Glued Magic
Square strategy into its two Magic Square substrategies.  Every identity the
argument relies on is measured and stored under a step name, so a failure
points at the step that broke.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import InvariantError, PreconditionError, ProofStepError
from .games import LcsGame, glued_magic_square, magic_square
from .linalg import BipartiteState, CLUSTER_GAP, RANK_TOL, TOL, Side
from .strategies import (
    BipartiteStrategy,
    DilationReport,
    DilationWitness,
    dilation_residuals,
    mirror_var,
    winning_probability,
)

# 0-indexed odd-column variables of the two glued Magic Square halves
GMS_ODD_FIRST = (2, 5, 8)
GMS_ODD_SECOND = (9, 12, 15)


@dataclass
class StatePreservationReport:
    delta_state: float
    delta_support: float
    lambda_min: float
    bound: float
    tol: float

    @property
    def implication_holds(self) -> bool:
        """``delta_support <= delta_state / lambda_min`` (always true; a failure is a bug)."""
        return self.delta_support <= self.bound + 1e-12

    @property
    def passed(self) -> bool:
        return self.delta_state <= self.tol and self.delta_support <= self.tol / self.lambda_min


def check_state_preservation_identity(g, state: BipartiteState, tol: float = TOL, rank_tol: float = RANK_TOL) -> StatePreservationReport:
    """If ``(G (x) I)|psi> = |psi>`` then ``G`` is the identity on Alice's support.

    ``delta_state = ||(G (x) I)psi - psi||`` controls
    ``delta_support = ||(G - I) P_supp||`` through ``delta_state / lambda_min``.
    """
    g = la._as_matrix(g)
    psi = state.amplitudes
    if g.shape != (state.dim_a, state.dim_a):
        raise InvariantError(f"operator shape {g.shape} does not match Alice dimension {state.dim_a}")
    sd = la.schmidt(state, rank_tol)
    d1 = float(np.linalg.norm(g @ psi - psi))
    p = sd.alice_basis
    d2 = la.op_norm((g - np.eye(g.shape[0])) @ p)
    lam = float(sd.coefficients[-1])
    return StatePreservationReport(d1, d2, lam, d1 / lam, tol)


@dataclass
class SupportRestriction:
    strategy: BipartiteStrategy
    isometry_a: np.ndarray
    isometry_b: np.ndarray
    leakage: dict


def support_restriction(strat: BipartiteStrategy, tol: float = TOL, rank_tol: float = RANK_TOL) -> SupportRestriction:
    """Compress a strategy to ``Supp_A x Supp_B`` and return the embedding isometries.

    Requires every consistency ``<psi|A_i (x) B_i|psi>`` to be 1: then each
    observable leaves the supports invariant, which is checked before compressing.
    """
    psi = strat.state.amplitudes
    for i in range(strat.num_vars):
        c = la.expectation(psi, strat.alice[i], strat.bob[i]).real
        if c < 1 - tol:
            raise PreconditionError(f"consistency of variable {i} is {c:.12g} < 1-tol")
    sd = la.schmidt(strat.state, rank_tol)
    va, vb = sd.alice_basis, sd.bob_basis
    pa, pb = va @ va.conj().T, vb @ vb.conj().T
    qa, qb = np.eye(strat.dim_a) - pa, np.eye(strat.dim_b) - pb
    leakage = {}
    named = [(f"Alice observable {i}", a, qa, pa) for i, a in enumerate(strat.alice)]
    named += [(f"Alice observable {i} in equation {x}", a, qa, pa) for (x, i), a in strat.alice_per_equation.items()]
    named += [(f"Bob observable {j}", b, qb, pb) for j, b in enumerate(strat.bob)]
    for name, m, q, p in named:
        leak = la.op_norm(q @ m @ p)
        leakage[name] = leak
        if leak > tol:
            raise PreconditionError(f"{name} leaks out of the support (off-block norm {leak:.3e})")
    ca = lambda m: la.hermitize(va.conj().T @ m @ va)  # noqa: E731
    cb = lambda m: la.hermitize(vb.conj().T @ m @ vb)  # noqa: E731
    coeffs = va.conj().T @ psi @ vb.conj()
    restricted = BipartiteStrategy(
        BipartiteState.normalized(coeffs),
        tuple(ca(a) for a in strat.alice),
        tuple(cb(b) for b in strat.bob),
        {k: ca(a) for k, a in strat.alice_per_equation.items()},
    )
    return SupportRestriction(restricted, va, vb, leakage)


def restrict_to_support(strat: BipartiteStrategy, tol: float = TOL, rank_tol: float = RANK_TOL) -> BipartiteStrategy:
    """Strategy compressed to the Schmidt supports; the result has full Schmidt rank."""
    return support_restriction(strat, tol, rank_tol).strategy


def ordered_product(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(ops[0].shape[0], dtype=complex)
    for m in ops:
        out = out @ m
    return out


@dataclass
class GlueCommutationReport:
    side: str
    line: tuple
    residuals: dict
    hypothesis_holds: bool
    win_probability: float | None
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        """Lemma verdict; only asserted when the perfection hypothesis holds."""
        return self.hypothesis_holds and self.max_residual <= self.tol


def check_glue_commutation(
    strat: BipartiteStrategy,
    odd_line_vars: Sequence[int],
    part_vars: Sequence[int],
    side: Side = "alice",
    game: LcsGame | None = None,
    tol: float = TOL,
) -> GlueCommutationReport:
    """``E`` (product of one part's odd-line observables) commutes on the state
    with every observable of that part.

    With ``game`` given, perfection is checked first and the verdict is only
    asserted when it holds; residuals are reported either way.
    """
    line = tuple(sorted(odd_line_vars))
    obs = strat.alice if side == "alice" else strat.bob
    e = ordered_product([obs[i] for i in line])
    psi = strat.state.amplitudes
    res = {}
    for i in part_vars:
        c = e @ obs[i] - obs[i] @ e
        res[i] = float(np.linalg.norm(la.apply_local(psi, c) if side == "alice" else la.apply_local(psi, None, c)))
    p = None
    hyp = True
    if game is not None:
        p = winning_probability(game, strat)
        hyp = p >= 1 - tol
    return GlueCommutationReport(side, line, res, hyp, p, tol)


@dataclass
class RepresentationReport:
    residuals: dict
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_representation(obs: Sequence[np.ndarray], tol: float = TOL) -> RepresentationReport:
    """Check that nine operators in grid layout come from a representation of (Z/2Z)^4.

    Generators sit at positions 1, 2, 4, 5; the other positions must be the
    products prescribed by the grid, and the odd column must multiply to I.
    """
    if len(obs) != 9:
        raise InvariantError(f"expected 9 operators, got {len(obs)}")
    p = [la._as_matrix(o) for o in obs]
    eye = np.eye(p[0].shape[0])
    res = {}
    res["squares"] = max(la.op_norm(m @ m - eye) for m in p)
    res["self_adjoint"] = max(la.op_norm(m - m.conj().T) for m in p)
    gens = (0, 1, 3, 4)
    res["generators_commute"] = max(
        la.op_norm(p[a] @ p[b] - p[b] @ p[a]) for n, a in enumerate(gens) for b in gens[n + 1:]
    )
    for k, (a, b) in {2: (0, 1), 5: (3, 4), 6: (0, 3), 7: (1, 4), 8: (6, 7)}.items():
        res[f"pos{k + 1}=pos{a + 1}*pos{b + 1}"] = la.op_norm(p[k] - p[a] @ p[b])
    res["pos3*pos6*pos9=I"] = la.op_norm(p[2] @ p[5] @ p[8] - eye)
    return RepresentationReport(res, tol)


@dataclass
class StateSelftestReport:
    clusters: list
    spreads: list
    rel_gap: float

    @property
    def passed(self) -> bool:
        return all(m % 4 == 0 for _, m in self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": [{"value": v, "multiplicity": m} for v, m in self.clusters],
            "spreads": self.spreads,
            "passed": self.passed,
        }


def check_state_selftest(state: BipartiteState, rel_gap: float = CLUSTER_GAP, rank_tol: float = RANK_TOL) -> StateSelftestReport:
    """Signature of ``|psi4> (x) |aux>`` up to local isometry: every Schmidt
    coefficient occurs with multiplicity divisible by 4."""
    coeffs = la.schmidt(state, rank_tol).coefficients
    clusters = la.cluster_values(coeffs, rel_gap)
    spreads = []
    start = 0
    for _, m in clusters:
        block = coeffs[start:start + m]
        spreads.append(float(block.max() - block.min()))
        start += m
    return StateSelftestReport(clusters, spreads, rel_gap)


@dataclass
class SubstrategyRecord:
    index: int
    weight: float
    degenerate: bool
    ms_win_probability: float | None = None
    representation_alice: RepresentationReport | None = None
    representation_bob: RepresentationReport | None = None
    state_selftest: StateSelftestReport | None = None
    alice_projector: np.ndarray | None = None
    bob_projector: np.ndarray | None = None
    strategy: BipartiteStrategy | None = None

    @property
    def dims(self) -> tuple[int, int]:
        if self.strategy is None:
            return (0, 0)
        return (self.strategy.dim_a, self.strategy.dim_b)


@dataclass
class DecompositionReport:
    weights: tuple
    residuals: dict
    substrategies: list
    state_selftest: StateSelftestReport
    operators: dict = field(default_factory=dict)
    projectors: dict = field(default_factory=dict)
    substates: tuple = ()
    support_projectors: dict = field(default_factory=dict)
    tol: float = TOL

    @property
    def degenerate(self) -> bool:
        return any(s.degenerate for s in self.substrategies)

    @property
    def block_dims_alice(self) -> tuple:
        return tuple(s.dims[0] for s in self.substrategies)

    @property
    def block_dims_bob(self) -> tuple:
        return tuple(s.dims[1] for s in self.substrategies)

    @property
    def passed(self) -> bool:
        ok = max(self.residuals.values()) <= self.tol and self.state_selftest.passed
        for s in self.substrategies:
            if s.degenerate:
                continue
            ok = ok and s.ms_win_probability >= 1 - self.tol
            ok = ok and s.representation_alice.passed and s.representation_bob.passed and s.state_selftest.passed
        return bool(ok)

    def to_json(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "block_dims": {"alice": list(self.block_dims_alice), "bob": list(self.block_dims_bob)},
            "degenerate": self.degenerate,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "state_selftest": self.state_selftest.to_dict(),
            "substrategies": [
                {
                    "index": s.index,
                    "weight": float(s.weight),
                    "degenerate": s.degenerate,
                    "ms_win_probability": s.ms_win_probability,
                    "representation_alice": None if s.representation_alice is None else s.representation_alice.passed,
                    "representation_bob": None if s.representation_bob is None else s.representation_bob.passed,
                    "state_selftest": None if s.state_selftest is None else s.state_selftest.passed,
                }
                for s in self.substrategies
            ],
            "passed": self.passed,
        }


def _restrict_block(strat: BipartiteStrategy, phi: np.ndarray, pa: np.ndarray, pb: np.ndarray, weight: float):
    wa, wb = la.range_basis(pa), la.range_basis(pb)
    ca = lambda m: la.hermitize(wa.conj().T @ m @ wa)  # noqa: E731
    cb = lambda m: la.hermitize(wb.conj().T @ m @ wb)  # noqa: E731
    state = BipartiteState.normalized(wa.conj().T @ phi @ wb.conj() / weight)
    sub = BipartiteStrategy(state, tuple(ca(a) for a in strat.alice), tuple(cb(b) for b in strat.bob))
    return sub, wa, wb


def decompose_gms(
    strat: BipartiteStrategy, tol: float = TOL, rank_tol: float = RANK_TOL, step_tol: float | None = None
) -> DecompositionReport:
    """Split a perfect Glued Magic Square strategy into two Magic Square strategies.

    ``E = A3 A6 A9`` and ``F = A10 A13 A16`` (and ``G, H`` for Bob) are
    observables with ``EF = -1`` on the state; the -1 eigenspaces of ``E`` and
    ``F`` split the supports, ``|psi> = (E- (x) G-)|psi> + (F- (x) H-)|psi>``,
    and each block carries a perfect Magic Square strategy on one half plus a
    representation of (Z/2Z)^4 on the other half.

    ``step_tol`` (default ``tol``) is the threshold for the named residuals.
    """
    step_tol = tol if step_tol is None else step_tol
    game = glued_magic_square()
    if strat.num_vars != game.num_vars:
        raise PreconditionError(f"expected {game.num_vars} observables per party, got {strat.num_vars}")
    p = winning_probability(game, strat)
    if p < 1 - tol:
        raise PreconditionError(f"winning probability {p:.12g} < 1-tol")
    sr = support_restriction(strat, tol, rank_tol)
    s = sr.strategy
    va, vb = sr.isometry_a, sr.isometry_b
    psi = s.state.amplitudes
    ia, ib = np.eye(s.dim_a), np.eye(s.dim_b)
    res = {}

    # with full Schmidt rank, per-equation observables must agree as operators
    for (x, i), a in s.alice_per_equation.items():
        res[f"agreement[{x},{i}]"] = max(res.get(f"agreement[{x},{i}]", 0.0), la.op_norm(a - s.alice[i]))

    def odd_product(obs, line, label):
        m = ordered_product([obs[i] for i in line])
        rev = ordered_product([obs[i] for i in reversed(line)])
        res[f"order_{label}"] = la.op_norm(m - rev)
        res[f"self_adjoint_{label}"] = la.op_norm(m - m.conj().T)
        return la.hermitize(m)

    e = odd_product(s.alice, GMS_ODD_FIRST, "E")
    f = odd_product(s.alice, GMS_ODD_SECOND, "F")
    g = odd_product(s.bob, GMS_ODD_FIRST, "G")
    h = odd_product(s.bob, GMS_ODD_SECOND, "H")
    _, em = la.eigenprojectors(e, max(tol, 1e-9) * 10)
    _, fm = la.eigenprojectors(f, max(tol, 1e-9) * 10)
    gp, gm = la.eigenprojectors(g, max(tol, 1e-9) * 10)
    _, hm = la.eigenprojectors(h, max(tol, 1e-9) * 10)

    res["ef_plus"] = abs(0.5 * (1 + la.expectation(psi, e @ f).real))
    res["ef_identity"] = float(np.linalg.norm((em + fm) @ psi - psi))
    res["fg"] = float(np.linalg.norm(la.apply_local(psi, f, g) + psi))
    res["eh"] = float(np.linalg.norm(la.apply_local(psi, e, h) + psi))
    res["eg"] = float(np.linalg.norm(la.apply_local(psi, e, g) - psi))
    res["fh"] = float(np.linalg.norm(la.apply_local(psi, f, h) - psi))
    res["e_minus_f_minus"] = la.op_norm(em @ fm)
    res["g_minus_h_minus"] = la.op_norm(gm @ hm)
    phi1 = la.apply_local(psi, em, gm)
    phi2 = la.apply_local(psi, fm, hm)
    res["state_decomp"] = float(np.linalg.norm(phi1 + phi2 - psi))
    res["block_invariance_alice"] = max(
        max(la.op_norm((ia - em) @ a @ em), la.op_norm((ia - fm) @ a @ fm)) for a in s.alice
    )
    res["block_invariance_bob"] = max(
        max(la.op_norm((ib - gm) @ b @ gm), la.op_norm((ib - hm) @ b @ hm)) for b in s.bob
    )
    alpha = (float(np.linalg.norm(phi1)), float(np.linalg.norm(phi2)))
    res["weights_normalized"] = abs(alpha[0] ** 2 + alpha[1] ** 2 - 1)
    for step, val in res.items():
        if val > step_tol:
            raise ProofStepError(step, val, step_tol)

    ms = magic_square()
    lift_a = lambda m: la.hermitize(va @ m @ va.conj().T)  # noqa: E731
    lift_b = lambda m: la.hermitize(vb @ m @ vb.conj().T)  # noqa: E731
    subs = []
    blocks = ((1, phi1, em, gm), (2, phi2, fm, hm))
    for k, phi, pa, pb in blocks:
        w = alpha[k - 1]
        if w <= rank_tol:
            subs.append(SubstrategyRecord(k, w, True))
            continue
        sub, wa, wb = _restrict_block(s, phi, pa, pb, w)
        active = list(range(9)) if k == 1 else [mirror_var(i) for i in range(9)]
        passive = [mirror_var(i) for i in range(9)] if k == 1 else list(range(9))
        ms_strat = BipartiteStrategy(sub.state, tuple(sub.alice[v] for v in active), tuple(sub.bob[v] for v in active))
        subs.append(SubstrategyRecord(
            index=k,
            weight=w,
            degenerate=False,
            ms_win_probability=winning_probability(ms, ms_strat),
            representation_alice=verify_representation([sub.alice[v] for v in passive], tol),
            representation_bob=verify_representation([sub.bob[v] for v in passive], tol),
            state_selftest=check_state_selftest(sub.state, rank_tol=rank_tol),
            alice_projector=lift_a(pa),
            bob_projector=lift_b(pb),
            strategy=ms_strat,
        ))

    return DecompositionReport(
        weights=alpha,
        residuals=res,
        substrategies=subs,
        state_selftest=check_state_selftest(strat.state, rank_tol=rank_tol),
        operators={"E": va @ e @ va.conj().T, "F": va @ f @ va.conj().T, "G": vb @ g @ vb.conj().T, "H": vb @ h @ vb.conj().T},
        projectors={"E-": lift_a(em), "F-": lift_a(fm), "G-": lift_b(gm), "H-": lift_b(hm), "G+": lift_b(gp)},
        substates=(va @ phi1 @ vb.T, va @ phi2 @ vb.T),
        support_projectors={
            "alice_0": la.hermitize(np.eye(strat.dim_a) - va @ va.conj().T),
            "bob_0": la.hermitize(np.eye(strat.dim_b) - vb @ vb.conj().T),
        },
        tol=tol,
    )


def convex_witnesses(parts: Sequence[tuple[float, BipartiteStrategy]], u_a=None, u_b=None) -> list[DilationWitness]:
    """Witnesses for ``conjugate_local(convex_combination(parts), U_A, U_B)``
    against the ideal strategies ``parts[k][1]`` with trivial auxiliary states."""
    da = sum(s.dim_a for _, s in parts)
    db = sum(s.dim_b for _, s in parts)
    u_a = np.eye(da, dtype=complex) if u_a is None else np.asarray(u_a, dtype=complex)
    u_b = np.eye(db, dtype=complex) if u_b is None else np.asarray(u_b, dtype=complex)
    inv_a, inv_b = u_a.conj().T, u_b.conj().T
    trivial = BipartiteState(np.ones((1, 1), dtype=complex))
    out = []
    oa = ob = 0
    for _, s in parts:
        out.append(DilationWitness(inv_a[oa:oa + s.dim_a], inv_b[ob:ob + s.dim_b], trivial))
        oa += s.dim_a
        ob += s.dim_b
    return out


def verify_convex_dilation(
    strat: BipartiteStrategy,
    ideals: Sequence[BipartiteStrategy],
    witnesses: Sequence[DilationWitness],
    weights: Sequence[float],
    tol: float = TOL,
) -> DilationReport:
    """Check ``U|psi> = (+)_k alpha_k |ideal_k> (x) |aux_k>`` and its measured versions.

    Witness ``k`` maps Alice's (Bob's) whole space into ``ideal_k (x) aux_k``
    and is supported on block ``k``; stacking the witnesses must give an isometry.
    Auxiliary states may differ between blocks.
    """
    n = len(ideals)
    if not (len(witnesses) == len(weights) == n) or n == 0:
        raise InvariantError("ideals, witnesses and weights must be nonempty lists of equal length")
    if any(t.num_vars != strat.num_vars for t in ideals):
        raise InvariantError("ideal strategies have a different number of observables")
    u_a = np.vstack([np.asarray(w.isometry_a, dtype=complex) for w in witnesses])
    u_b = np.vstack([np.asarray(w.isometry_b, dtype=complex) for w in witnesses])
    la.check_isometry(u_a, tol, "stacked U_A")
    la.check_isometry(u_b, tol, "stacked U_B")
    for t, w in zip(ideals, witnesses):
        aux = w.aux_state
        if w.isometry_a.shape[0] != t.dim_a * aux.dim_a or w.isometry_b.shape[0] != t.dim_b * aux.dim_b:
            raise InvariantError("witness ranges do not match ideal (x) aux dimensions")

    def blockdiag(mats):
        return la.direct_sum_rect(mats)

    target = blockdiag([a * np.kron(t.state.amplitudes, w.aux_state.amplitudes) for a, t, w in zip(weights, ideals, witnesses)])
    t_alice = [
        blockdiag([a * np.kron(t.alice[i] @ t.state.amplitudes, w.aux_state.amplitudes) for a, t, w in zip(weights, ideals, witnesses)])
        for i in range(strat.num_vars)
    ]
    t_bob = [
        blockdiag([a * np.kron(t.state.amplitudes @ t.bob[j].T, w.aux_state.amplitudes) for a, t, w in zip(weights, ideals, witnesses)])
        for j in range(strat.num_vars)
    ]
    rep = dilation_residuals(strat, u_a, u_b, target, t_alice, t_bob, tol)
    if n > 1:
        rep.notes.append("auxiliary states are per block and need not coincide")
    return rep
