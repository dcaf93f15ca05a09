"""Hide a weighted mix of the two glued strategies behind random local
unitaries, then recover the weights and the two Magic Square blocks from the
strategy alone.

Run with ``python3 demos/decompose_glued_strategy.py``.
"""

import numpy as np

from gluedgames import linalg as la
from gluedgames import selftest as se
from gluedgames import strategies as st

rng = np.random.default_rng(11)
w1, w2 = 0.6, 0.8

s1 = st.build_glued_strategy(1, st.representation_from_characters(st.random_characters(rng)))
s2 = st.build_glued_strategy(2, st.representation_from_characters(st.random_characters(rng)))
mixed = st.convex_combination([(w1, s1), (w2, s2)])
hidden = st.conjugate_local(mixed, la.random_unitary(mixed.dim_a, rng), la.random_unitary(mixed.dim_b, rng))

rep = se.decompose_gms(hidden)
print("recovered weights:", np.round(rep.weights, 12), " planted:", (w1, w2))
print("block dims (alice, bob):", rep.block_dims_alice, rep.block_dims_bob)
print("largest relation residual: %.2e" % max(rep.residuals.values()))
print("Schmidt clusters of the full state:", rep.state_selftest.clusters)
for sub in rep.substrategies:
    print(f"  block {sub.index}: weight {sub.weight:.6f}, Magic Square win {sub.ms_win_probability:.12f}, "
          f"passive nine form a representation: {sub.representation_alice.passed}")
print("decomposition", "PASS" if rep.passed else "FAIL")

# The two-block example family: a fixed 4-dim block next to a free auxiliary state.
alpha = 0.3
ex = st.example_strategy(alpha, np.sqrt(1 - alpha**2), la.random_state(5, 5, rng))
rep = se.decompose_gms(ex)
print("\nexample family weights:", np.round(rep.weights, 12), "block dims:", rep.block_dims_alice)
