"""Classical versus quantum play on the Magic Square, the Magic Pentagram and
their glued composition.

Run with ``python3 demos/pseudo_telepathy.py``.
"""

import numpy as np

from gluedgames import games as gm
from gluedgames import strategies as st

ms, mp, gms = gm.magic_square(), gm.magic_pentagram(), gm.glued_magic_square()

print("game                  equations  pairs  classical  quantum")
for game, strat in ((ms, st.ideal_magic_square()), (mp, st.ideal_magic_pentagram())):
    cv = gm.classical_value(game)
    qv = st.winning_probability(game, strat)
    print(f"{game.name:<22}{game.system.num_equations:>9}{len(game.question_pairs):>7}  {str(cv):>9}  {qv:.12f}")

# The glued game has no ideal strategy of its own; any representation of the
# sign group on a 4-dim space, placed on one half, completes a perfect strategy.
rng = np.random.default_rng(7)
rep = st.representation_from_characters(st.random_characters(rng))
s1 = st.build_glued_strategy(1, rep)
s2 = st.build_glued_strategy(2, rep)
cv = gm.classical_value(gms)
print(f"{gms.name:<22}{gms.system.num_equations:>9}{len(gms.question_pairs):>7}  {str(cv):>9}  "
      f"{st.winning_probability(gms, s1):.12f} (S1), {st.winning_probability(gms, s2):.12f} (S2)")

# Either measurement order gives the same answer distribution for commuting lines.
for order in ("increasing", "decreasing"):
    print(f"S1 win, {order} order: {st.winning_probability(gms, s1, order=order):.12f}")
