"""Instance generators shared by the test modules."""

import numpy as np

from gluedgames import games as gm
from gluedgames import linalg as la
from gluedgames import strategies as st


def random_gms_instance(rng, weights=None, pad=0):
    """Conjugated convex combination of S1^sigma and S2^tau with known weights.

    ``pad`` extra unused dimensions per party (identity action, zero amplitude)
    exercise the support restriction.
    """
    if weights is None:
        t = rng.uniform(0.1, np.pi / 2 - 0.1)
        weights = (np.cos(t), np.sin(t))
    s1 = st.build_glued_strategy(1, st.representation_from_characters(st.random_characters(rng)))
    s2 = st.build_glued_strategy(2, st.representation_from_characters(st.random_characters(rng)))
    parts = [(weights[0], s1), (weights[1], s2)]
    s = st.convex_combination(parts)
    if pad:
        s = pad_strategy(s, pad)
    ua, ub = la.random_unitary(s.dim_a, rng), la.random_unitary(s.dim_b, rng)
    return st.conjugate_local(s, ua, ub), parts, (ua, ub)


def pad_strategy(s, extra, leak_var=None):
    """Append ``extra`` unused dimensions on both sides (observables act as +1 there)."""
    da, db = s.dim_a + extra, s.dim_b + extra
    amp = np.zeros((da, db), dtype=complex)
    amp[: s.dim_a, : s.dim_b] = s.state.amplitudes
    pa = lambda m: la.direct_sum_operators([m, np.eye(extra)])  # noqa: E731
    alice = [pa(a) for a in s.alice]
    if leak_var is not None:
        # rotate a support direction into the padding
        rot = np.eye(da, dtype=complex)
        rot[[0, -1]] = rot[[-1, 0]]
        alice[leak_var] = rot @ alice[leak_var] @ rot
    return st.BipartiteStrategy(la.BipartiteState(amp), tuple(alice), tuple(pa(b) for b in s.bob))


def two_part_glued(first, second, first_game, second_game, weights, rng=None):
    """Perfect strategy for glue(first_game, second_game): each block runs one
    ideal strategy with identity on the other part's variables."""
    k, l = first_game.num_vars, second_game.num_vars
    p1 = st.embed_part(first, k + l, list(range(k)))
    p2 = st.embed_part(second, k + l, list(range(k, k + l)))
    s = st.convex_combination([(weights[0], p1), (weights[1], p2)])
    if rng is not None:
        s = st.conjugate_local(s, la.random_unitary(s.dim_a, rng), la.random_unitary(s.dim_b, rng))
    return gm.glue(first_game, second_game), s
