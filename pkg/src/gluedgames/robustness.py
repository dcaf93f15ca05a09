"""Approximate versions of the glued-game arguments.

Each ``check_*`` function evaluates one inequality on concrete operators and
returns a :class:`LemmaRecord` with ``slack = measured - bound``.  The
inequalities are theorems, so a slack below roundoff means a bug.

The ``O(eps)`` statements carry no explicit constants; they are checked as
empirical fits ``d <= C eps`` over a sweep of perturbed strategies.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg as la
from .errors import InvariantError, PreconditionError
from .games import LcsGame, glued_magic_square, magic_square
from .linalg import BipartiteState, CLUSTER_GAP, RANK_TOL, TOL, Side
from .selftest import GMS_ODD_FIRST, GMS_ODD_SECOND, ordered_product
from .strategies import (
    BipartiteStrategy,
    build_glued_strategy,
    conjugate_local,
    convex_combination,
    mirror_var,
    random_characters,
    representation_from_characters,
    winning_probability,
)

SLACK_FLOOR = -1e-12
MAX_ROBUST_DEFICIT = 0.05
SEMANTICS_NOTE = (
    "compressed operators P A P are not unitary; relation residuals are reported "
    "on the normalized substate, and a sign-snapped unitarization is scored on the Magic Square game"
)


@dataclass
class LemmaRecord:
    lemma: str
    eps: float
    bound: float
    measured: float
    extra: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.measured - self.bound

    @property
    def passed(self) -> bool:
        return self.slack >= SLACK_FLOOR


def _vec(psi) -> np.ndarray:
    if isinstance(psi, BipartiteState):
        return psi.vector
    v = np.asarray(psi, dtype=complex)
    return v.reshape(-1)


def _amp(psi) -> np.ndarray:
    if isinstance(psi, BipartiteState):
        return psi.amplitudes
    m = np.asarray(psi, dtype=complex)
    if m.ndim != 2:
        raise InvariantError("expected a bipartite amplitude matrix")
    return m


def check_lrmul(psi, a, b, tol: float = TOL) -> LemmaRecord:
    """``Re<AB> >= 1 - (sqrt eps + sqrt delta)^2`` with ``eps = 1 - Re<A>``, ``delta = 1 - Re<B>``.

    ``psi`` is a vector (or a bipartite state, flattened) and ``A, B`` act on
    the whole space.  The realness rider (real ``<A>, <B>`` forcing real
    ``<AB>``) is recorded but not asserted: it fails e.g. for ``|0>, X, Y``.
    """
    v = _vec(psi)
    a = la.check_unitary(a, tol, "A")
    b = la.check_unitary(b, tol, "B")
    if a.shape[0] != v.size or b.shape[0] != v.size:
        raise InvariantError("operator dimensions do not match the state")
    ea, eb = np.vdot(v, a @ v), np.vdot(v, b @ v)
    eab = np.vdot(v, a @ (b @ v))
    eps = max(0.0, 1 - ea.real)
    delta = max(0.0, 1 - eb.real)
    bound = 1 - (np.sqrt(eps) + np.sqrt(delta)) ** 2
    rider_applicable = abs(ea.imag) <= 1e-14 and abs(eb.imag) <= 1e-14
    return LemmaRecord("lrmul", eps, float(bound), float(eab.real), {
        "delta": delta,
        "imag_ab": float(eab.imag),
        "rider_applicable": rider_applicable,
        "rider_holds": abs(eab.imag) <= 1e-12,
    })


def check_cycling(psi, u, a, b, tol: float = TOL) -> LemmaRecord:
    """``Re<A U A* (x) I> >= 1 - 9 eps`` where ``eps`` is the larger deficit of
    ``<U (x) I>`` and ``<A (x) B>``."""
    m = _amp(psi)
    u = la.check_unitary(u, tol, "U")
    a = la.check_unitary(a, tol, "A")
    b = la.check_unitary(b, tol, "B")
    eu = la.expectation(m, u).real
    eab = la.expectation(m, a, b).real
    eps = max(0.0, 1 - eu, 1 - eab)
    measured = la.expectation(m, a @ u @ a.conj().T).real
    return LemmaRecord("cycling", eps, 1 - 9 * eps, float(measured), {"deficit_u": 1 - eu, "deficit_ab": 1 - eab})


def schmidt_compatible_split(psi, p: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Summand of ``psi`` obtained by damping Schmidt component ``i`` by
    ``sqrt(<u_i|P|u_i>)``; the closest direct-summand analogue of ``(P (x) I) psi``."""
    sd = la.schmidt(_amp(psi), rank_tol)
    w = np.einsum("ki,kl,li->i", sd.alice_basis.conj(), p, sd.alice_basis).real
    w = np.sqrt(np.clip(w, 0, 1))
    return (sd.alice_basis * (sd.coefficients * w)) @ sd.bob_basis.T


def check_summand(psi, phi, tol: float = TOL, rank_tol: float = RANK_TOL, rel_gap: float = CLUSTER_GAP) -> None:
    """Raise unless ``phi`` is a direct summand of ``psi`` compatible with its
    Schmidt decomposition: in Schmidt coordinates ``phi = M Lambda`` with ``M``
    block diagonal over equal coefficients, self-adjoint, ``0 <= M <= I``."""
    m = _amp(psi)
    f = _amp(phi)
    if f.shape != m.shape:
        raise PreconditionError("phi and psi live on different spaces")
    sd = la.schmidt(m, rank_tol)
    u, lam, w = sd.alice_basis, sd.coefficients, sd.bob_basis
    c = u.conj().T @ f @ w.conj()
    off = float(np.linalg.norm(f - u @ c @ w.T))
    if off > tol:
        raise PreconditionError(f"phi leaves the Schmidt support of psi (residual {off:.3e})")
    start = 0
    mask = np.zeros(c.shape, dtype=bool)
    for value, mult in la.cluster_values(lam, rel_gap):
        blk = slice(start, start + mult)
        mask[blk, blk] = True
        mb = c[blk, blk] / value
        herm = la.max_dev(mb, mb.conj().T)
        if herm > tol / value:
            raise PreconditionError(f"phi is not a Schmidt-compatible summand (non-self-adjoint block, {herm:.3e})")
        ev = np.linalg.eigvalsh(la.hermitize(mb))
        if ev.min() < -tol / value or ev.max() > 1 + tol / value:
            raise PreconditionError("phi is not a Schmidt-compatible summand (block spectrum outside [0,1])")
        start += mult
    leak = float(np.max(np.abs(c[~mask]), initial=0.0))
    if leak > tol:
        raise PreconditionError(f"phi mixes distinct Schmidt coefficients (off-block entry {leak:.3e})")


def check_identity_decomposition(psi, phi, a, tol: float = TOL, rank_tol: float = RANK_TOL) -> LemmaRecord:
    """``<phi|A (x) I|phi> >= ||phi||^2 - eps`` for a summand ``phi`` of ``psi``,
    where ``<psi|A (x) I|psi> = 1 - eps`` and ``A`` is self-adjoint with ``||A|| <= 1``."""
    m = _amp(psi)
    a = la._as_matrix(a)
    if la.max_dev(a, a.conj().T) > tol:
        raise InvariantError("A is not self-adjoint")
    if la.op_norm(a) > 1 + tol:
        raise InvariantError("A has operator norm above 1")
    check_summand(m, phi, tol, rank_tol)
    f = _amp(phi)
    eps = max(0.0, 1 - la.expectation(m, a).real)
    nf = float(np.linalg.norm(f) ** 2)
    measured = float(np.vdot(f, a @ f).real)
    return LemmaRecord("identity_decomposition", eps, nf - eps, measured, {"phi_norm_sq": nf})


def check_commutation_decomposition(psi, a, e, tol: float = TOL, rank_tol: float = RANK_TOL) -> LemmaRecord:
    """With ``<psi|A E A* E* (x) I|psi> = 1 - eps`` and ``phi = (E- (x) I)psi`` normalized,
    ``<phi|A E- A* E- (x) I|phi> >= 1 - eps / ||(E- (x) I) psi||^2``."""
    m = _amp(psi)
    a = la.check_observable(a, tol, "A")
    e = la.check_observable(e, tol, "E")
    _, em = la.eigenprojectors(e, tol)
    pm = em @ m
    p = float(np.linalg.norm(pm) ** 2)
    if np.sqrt(p) <= rank_tol:
        raise PreconditionError(f"||(E- (x) I) psi|| = {np.sqrt(p):.3e} is below rank-tol; phi is undefined")
    eps = max(0.0, 1 - la.expectation(m, a @ e @ a @ e).real)
    q = a @ em @ a
    measured = float(np.linalg.norm(q @ pm) ** 2 / p)
    return LemmaRecord("commutation_decomposition", eps, 1 - eps / p, measured, {"p": p})


def approx_commutation_defect(
    strat: BipartiteStrategy, odd_line_vars: Sequence[int], part_vars: Sequence[int], side: Side = "alice"
) -> dict:
    """``d_i = 1 - Re<psi|E A_i E* A_i|psi>`` for the part's variables (Bob mirrored)."""
    obs = strat.alice if side == "alice" else strat.bob
    e = ordered_product([obs[i] for i in sorted(odd_line_vars)])
    psi = strat.state.amplitudes
    d = {}
    for i in part_vars:
        op = e @ obs[i] @ e.conj().T @ obs[i]
        val = la.expectation(psi, op) if side == "alice" else la.expectation(psi, None, op)
        d[i] = float(1 - val.real)
    return {"defects": d, "max": max(d.values(), default=0.0)}


def fit_linear_constant(eps: Sequence[float], d: Sequence[float]) -> dict:
    """Smallest ``C`` with ``d <= C eps`` on the data, and the least-squares slope through 0."""
    e = np.asarray(eps, dtype=float)
    y = np.asarray(d, dtype=float)
    keep = e > 0
    if not np.any(keep):
        return {"C": None, "slope": None}
    c = float(np.max(y[keep] / e[keep]))
    slope = float(np.dot(e[keep], y[keep]) / np.dot(e[keep], e[keep]))
    return {"C": c, "slope": slope}


def _spectral(h: np.ndarray):
    w, v = np.linalg.eigh(h)
    return w, v


def perturb_strategy(
    strat: BipartiteStrategy,
    target: float,
    seed: int,
    game: LcsGame | None = None,
    rel_tol: float = 0.02,
    max_iter: int = 200,
) -> BipartiteStrategy:
    """Conjugate every observable by ``exp(i s H)`` with independent random
    unit-norm self-adjoint ``H``, choosing ``s`` so the deficit ``1 - p_win``
    is within ``rel_tol`` of ``target``.  The state is left untouched."""
    if not 0 <= target <= 0.2:
        raise PreconditionError(f"target deficit {target} outside [0, 0.2]")
    if target == 0:
        return strat
    game = glued_magic_square() if game is None else game
    rng = np.random.default_rng(seed)
    ha = [_spectral(la.random_hermitian(strat.dim_a, rng)) for _ in strat.alice]
    hb = [_spectral(la.random_hermitian(strat.dim_b, rng)) for _ in strat.bob]
    keys = sorted(strat.alice_per_equation)
    he = [_spectral(la.random_hermitian(strat.dim_a, rng)) for _ in keys]

    def rotate(m, spec, s):
        w, v = spec
        u = (v * np.exp(1j * s * w)) @ v.conj().T
        return la.hermitize(u @ m @ u.conj().T)

    def build(s):
        return BipartiteStrategy(
            strat.state,
            tuple(rotate(a, h, s) for a, h in zip(strat.alice, ha)),
            tuple(rotate(b, h, s) for b, h in zip(strat.bob, hb)),
            {k: rotate(strat.alice_per_equation[k], h, s) for k, h in zip(keys, he)},
        )

    def deficit(s):
        return 1 - winning_probability(game, build(s))

    lo, hi = 0.0, 1e-3
    while deficit(hi) < target:
        lo, hi = hi, 2 * hi
        if hi > 64:
            raise PreconditionError(f"could not bracket target deficit {target}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        d = deficit(mid)
        if abs(d - target) <= rel_tol * target:
            return build(mid)
        if d < target:
            lo = mid
        else:
            hi = mid
    raise PreconditionError(f"calibration did not converge to target deficit {target}")


def _negative_projector(m: np.ndarray) -> np.ndarray:
    """Projector onto the negative eigenspace of the self-adjoint part of ``m``."""
    w, v = np.linalg.eigh(la.hermitize(m))
    neg = v[:, w < 0]
    return la.hermitize(neg @ neg.conj().T)


def sign_snap(m: np.ndarray) -> np.ndarray:
    """Nearest observable to the self-adjoint part of ``m`` (eigenvalue signs, 0 -> +1)."""
    w, v = np.linalg.eigh(la.hermitize(m))
    return la.hermitize((v * np.where(w < 0, -1.0, 1.0)) @ v.conj().T)


def _fixed_alice(game: LcsGame, strat: BipartiteStrategy, choice: str) -> list[np.ndarray]:
    out = []
    for i in range(strat.num_vars):
        eqs = game.equations_with(i)
        x = eqs[0] if choice == "first" else eqs[-1]
        out.append(strat.alice_obs(x, i))
    return out


@dataclass
class ExtractionRecord:
    index: int
    weight_sq: float
    degenerate: bool
    relation_residuals: dict = field(default_factory=dict)
    max_relation_residual: float | None = None
    unitarized_ms_win: float | None = None
    bookkeeping: float | None = None


@dataclass
class RobustnessReport:
    deficit: float
    win_probability: float
    extraction: list
    lemma_records: list = field(default_factory=list)
    commutation_defects: dict = field(default_factory=dict)
    equation_choice: str = "first"
    note: str = SEMANTICS_NOTE

    @property
    def max_relation_residual(self) -> float:
        vals = [r.max_relation_residual for r in self.extraction if not r.degenerate]
        return max(vals, default=0.0)

    @property
    def degenerate(self) -> bool:
        return any(r.degenerate for r in self.extraction)

    @property
    def min_slack(self) -> float:
        return min((r.slack for r in self.lemma_records), default=0.0)

    def to_json(self) -> dict:
        return {
            "note": self.note,
            "deficit": self.deficit,
            "win_probability": self.win_probability,
            "equation_choice": self.equation_choice,
            "max_relation_residual": self.max_relation_residual,
            "degenerate": self.degenerate,
            "extraction": [asdict(r) for r in self.extraction],
            "commutation_defects": self.commutation_defects,
            "min_slack": self.min_slack,
            "lemmas": [
                {"lemma": r.lemma, "eps": r.eps, "bound": r.bound, "measured": r.measured, "slack": r.slack}
                for r in self.lemma_records
            ],
        }


def _relation_residuals(ms: LcsGame, alice, bob, phi) -> dict:
    res = {}
    for x in range(ms.num_equations):
        supp = ms.support(x)
        sign = (-1) ** int(ms.system.rhs[x])
        ra = sign * ordered_product([alice[v] for v in supp])
        rb = sign * ordered_product([bob[v] for v in supp])
        res[f"alice[{x}]"] = 1 - la.expectation(phi, ra).real
        res[f"bob[{x}]"] = 1 - la.expectation(phi, None, rb).real
        res[f"joint[{x}]"] = 1 - la.expectation(phi, ra, rb).real
    for i in range(ms.num_vars):
        res[f"consistency[{i}]"] = 1 - la.expectation(phi, alice[i], bob[i]).real
    return {k: float(v) for k, v in res.items()}


def robust_decompose_gms(
    strat: BipartiteStrategy,
    equation_choice: str = "first",
    with_lemmas: bool = True,
    rank_tol: float = RANK_TOL,
    max_deficit: float = MAX_ROBUST_DEFICIT,
) -> RobustnessReport:
    """Approximate version of the exact decomposition for a strategy winning
    the Glued Magic Square game with probability ``1 - eps``."""
    game = glued_magic_square()
    if strat.num_vars != game.num_vars:
        raise PreconditionError(f"expected {game.num_vars} observables per party, got {strat.num_vars}")
    p = winning_probability(game, strat)
    eps = max(0.0, 1 - p)
    if eps > max_deficit:
        raise PreconditionError(f"deficit {eps:.4g} exceeds the guard {max_deficit}")
    alice = _fixed_alice(game, strat, equation_choice)
    bob = list(strat.bob)
    psi = strat.state.amplitudes
    e = ordered_product([alice[i] for i in GMS_ODD_FIRST])
    f = ordered_product([alice[i] for i in GMS_ODD_SECOND])
    g = ordered_product([bob[i] for i in GMS_ODD_FIRST])
    h = ordered_product([bob[i] for i in GMS_ODD_SECOND])
    em, fm, gm, hm = (_negative_projector(m) for m in (e, f, g, h))
    ms = magic_square()
    records = []
    phis = []
    for k, pa, pb in ((1, em, gm), (2, fm, hm)):
        phi = la.apply_local(psi, pa, pb)
        phis.append(phi)
        n2 = float(np.linalg.norm(phi) ** 2)
        pb_plus = np.eye(strat.dim_b) - pb
        book = float(la.expectation(psi, pa, pb_plus).real)
        if np.sqrt(n2) <= rank_tol:
            records.append(ExtractionRecord(k, n2, True, bookkeeping=book))
            continue
        wa, wb = la.range_basis(pa), la.range_basis(pb)
        sub_phi = wa.conj().T @ phi @ wb.conj() / np.sqrt(n2)
        active = list(range(9)) if k == 1 else [mirror_var(i) for i in range(9)]
        sa = [wa.conj().T @ alice[v] @ wa for v in active]
        sb = [wb.conj().T @ bob[v] @ wb for v in active]
        rel = _relation_residuals(ms, sa, sb, sub_phi)
        snapped = BipartiteStrategy(
            BipartiteState.normalized(sub_phi),
            tuple(sign_snap(m) for m in sa),
            tuple(sign_snap(m) for m in sb),
        )
        records.append(ExtractionRecord(
            k, n2, False, rel, max(rel.values()), winning_probability(ms, snapped), book,
        ))
    if all(r.degenerate for r in records):
        raise PreconditionError("both extracted substates vanish; nothing to extract")
    defects = {
        "alice_first": approx_commutation_defect(strat, GMS_ODD_FIRST, range(9), "alice")["max"],
        "alice_second": approx_commutation_defect(strat, GMS_ODD_SECOND, range(9, 18), "alice")["max"],
        "bob_first": approx_commutation_defect(strat, GMS_ODD_FIRST, range(9), "bob")["max"],
        "bob_second": approx_commutation_defect(strat, GMS_ODD_SECOND, range(9, 18), "bob")["max"],
    }
    lemmas = _strategy_lemma_records(strat, alice, bob, e, f, em, rank_tol) if with_lemmas else []
    return RobustnessReport(eps, p, records, lemmas, defects, equation_choice)


def _strategy_lemma_records(strat, alice, bob, e, f, em, rank_tol) -> list[LemmaRecord]:
    """The four appendix inequalities instantiated on a (near-)perfect strategy."""
    psi = strat.state.amplitudes
    out = []
    u = -(e @ f)
    for i in range(strat.num_vars):
        out.append(check_cycling(psi, u, alice[i], bob[i]))
    ms = magic_square()
    for x in range(ms.num_equations):
        i, j = ms.support(x)[:2]
        out.append(check_lrmul(psi, np.kron(alice[i], bob[i]), np.kron(alice[j], bob[j])))
    a_id = la.hermitize(-(e @ f))
    if la.op_norm(a_id) > 1:
        a_id = a_id / la.op_norm(a_id)
    phi = schmidt_compatible_split(psi, em, rank_tol)
    out.append(check_identity_decomposition(psi, phi, a_id, rank_tol=rank_tol))
    e_obs = np.eye(strat.dim_a) - 2 * em
    if np.linalg.norm(em @ psi) > rank_tol:
        for i in range(9):
            out.append(check_commutation_decomposition(psi, alice[i], e_obs, rank_tol=rank_tol))
    return out


def balanced_convex_strategy(seed: int, weights=(2**-0.5, 2**-0.5), conjugate: bool = True) -> BipartiteStrategy:
    """``a1 S1^sigma (+) a2 S2^tau`` with random characters, optionally seen
    through random local unitaries."""
    rng = np.random.default_rng(seed)
    s1 = build_glued_strategy(1, representation_from_characters(random_characters(rng)))
    s2 = build_glued_strategy(2, representation_from_characters(random_characters(rng)))
    s = convex_combination([(weights[0], s1), (weights[1], s2)])
    if conjugate:
        s = conjugate_local(s, la.random_unitary(s.dim_a, rng), la.random_unitary(s.dim_b, rng))
    return s


def thread_count() -> int:
    """Worker count from ``GLUEDGAMES_THREADS`` (0 or unset = CPU count)."""
    raw = os.environ.get("GLUEDGAMES_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise PreconditionError(f"GLUEDGAMES_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise PreconditionError("GLUEDGAMES_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass
class SweepResult:
    rows: list
    summary: dict


def robust_sweep(
    make_strategy: Callable[[int], BipartiteStrategy],
    eps_grid: Sequence[float] = (1e-2, 1e-3, 1e-4),
    seeds: Sequence[int] = tuple(range(10)),
    include_zero: bool = True,
    equation_choice: str = "first",
    threads: int | None = None,
) -> SweepResult:
    """Perturb, extract and check every lemma over a ``(seed, eps)`` grid.

    ``rows`` hold ``(seed, epsilon, lemma, bound, measured, slack)``; the
    extraction residual appears as lemma ``extraction``.  Grid points run in
    parallel but are aggregated in grid order.
    """
    grid = [(s, e) for e in list(eps_grid) + ([0.0] if include_zero else []) for s in seeds]

    def run(point):
        seed, eps = point
        base = make_strategy(seed)
        strat = perturb_strategy(base, eps, seed)
        return seed, eps, robust_decompose_gms(strat, equation_choice)

    with ThreadPoolExecutor(max_workers=threads or thread_count()) as ex:
        results = list(ex.map(run, grid))

    rows = []
    per_eps: dict[float, list] = {}
    for seed, eps, rep in results:
        for r in rep.lemma_records:
            rows.append({"seed": seed, "epsilon": eps, "lemma": r.lemma, "bound": r.bound, "measured": r.measured, "slack": r.slack})
        rows.append({"seed": seed, "epsilon": eps, "lemma": "extraction", "bound": None, "measured": rep.max_relation_residual, "slack": None})
        per_eps.setdefault(eps, []).append(rep)

    levels = sorted(per_eps, reverse=True)
    max_res = {e: max(r.max_relation_residual for r in per_eps[e]) for e in levels}
    max_def = {e: max(max(r.commutation_defects.values()) for r in per_eps[e]) for e in levels}
    measured_eps = [r.deficit for e in levels for r in per_eps[e]]
    res_all = [r.max_relation_residual for e in levels for r in per_eps[e]]
    def_all = [max(r.commutation_defects.values()) for e in levels for r in per_eps[e]]
    vals = [max_res[e] for e in levels]
    summary = {
        "eps_grid": levels,
        "seeds": list(seeds),
        "equation_choice": equation_choice,
        "max_relation_residual": {repr(e): max_res[e] for e in levels},
        "max_commutation_defect": {repr(e): max_def[e] for e in levels},
        "monotone": all(a > b for a, b in zip(vals, vals[1:])),
        "extraction_fit": fit_linear_constant(measured_eps, res_all),
        "commutation_fit": fit_linear_constant(measured_eps, def_all),
        "min_slack": min((r["slack"] for r in rows if r["slack"] is not None), default=0.0),
        "lemma_counts": {k: sum(1 for r in rows if r["lemma"] == k) for k in sorted({r["lemma"] for r in rows})},
        "note": SEMANTICS_NOTE,
    }
    return SweepResult(rows, summary)
