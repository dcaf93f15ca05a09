import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from gluedgames import games as gm
from gluedgames import linalg as la
from gluedgames import selftest as se
from gluedgames import strategies as st
from gluedgames.errors import PreconditionError, ProofStepError
from gluedgames.linalg import BipartiteState

from helpers import pad_strategy, random_gms_instance, two_part_glued

seeds = hst.integers(0, 2**31 - 1)


def test_state_preservation_examples(rng):
    s = la.random_state(3, 3, rng)
    r = se.check_state_preservation_identity(np.eye(3), s)
    assert r.delta_state == 0 and r.delta_support == 0 and r.passed
    r = se.check_state_preservation_identity(np.diag([1, -1]), la.product_state(2, 2))
    assert r.delta_state == 0 and r.delta_support == 0


def test_state_preservation_on_gms(rng):
    s, _, _ = random_gms_instance(rng)
    rep = se.decompose_gms(s)
    g = rep.projectors["E-"] + rep.projectors["F-"]
    r = se.check_state_preservation_identity(g, s.state)
    assert r.delta_support <= 1e-8 and r.passed


@given(seeds, hst.integers(1, 5), hst.integers(1, 5))
def test_state_preservation_implication(seed, da, db):
    rng = np.random.default_rng(seed)
    s = la.random_state(da, db, rng)
    g = rng.normal(size=(da, da)) + 1j * rng.normal(size=(da, da))
    g = np.eye(da) + 1e-3 * g
    r = se.check_state_preservation_identity(g, s)
    assert r.implication_holds


def test_restrict_full_rank_unchanged():
    s = st.ideal_magic_square()
    r = se.restrict_to_support(s)
    assert (r.dim_a, r.dim_b) == (4, 4)
    assert st.winning_probability(gm.magic_square(), r) == pytest.approx(1)
    assert np.allclose(la.schmidt(r.state).coefficients, 0.5)


def test_restrict_padded_instance():
    padded = pad_strategy(st.ideal_magic_square(), 1)
    r = se.restrict_to_support(padded)
    assert (r.dim_a, r.dim_b) == (4, 4)
    assert la.schmidt(r.state).rank == 4
    assert st.winning_probability(gm.magic_square(), r) == pytest.approx(1)


def test_restrict_leaking_instance():
    leaky = pad_strategy(st.ideal_magic_square(), 1, leak_var=3)
    with pytest.raises(PreconditionError, match="variable 3|observable 3"):
        se.restrict_to_support(leaky)


def test_glue_commutation_ms_line(rng):
    s = st.build_glued_strategy(1, st.representation_from_characters(st.random_characters(rng)))
    gms = gm.glued_magic_square()
    for side in ("alice", "bob"):
        r = se.check_glue_commutation(s, (2, 5, 8), range(9), side, gms)
        assert r.passed and r.max_residual <= 1e-10
        r = se.check_glue_commutation(s, (9, 12, 15), range(9, 18), side, gms)
        assert r.passed and r.max_residual <= 1e-10


def test_glue_commutation_ms_mp(rng):
    game, s = two_part_glued(st.ideal_magic_square(), st.ideal_magic_pentagram(), gm.magic_square(), gm.magic_pentagram(), (0.6, 0.8), rng)
    assert st.winning_probability(game, s) == pytest.approx(1, abs=1e-12)
    mp_line = [9 + v for v in (1, 2, 3, 4)]
    for side in ("alice", "bob"):
        assert se.check_glue_commutation(s, (2, 5, 8), range(9), side, game).max_residual <= 1e-10
        r = se.check_glue_commutation(s, mp_line, range(9, 19), side, game)
        assert r.passed and r.max_residual <= 1e-10


def test_glue_commutation_mp_mp(rng):
    mp = gm.magic_pentagram()
    game, s = two_part_glued(st.ideal_magic_pentagram(), st.ideal_magic_pentagram(), mp, mp, (0.8, 0.6), rng)
    assert st.winning_probability(game, s) == pytest.approx(1, abs=1e-12)
    for line, part in (((1, 2, 3, 4), range(10)), ((11, 12, 13, 14), range(10, 20))):
        r = se.check_glue_commutation(s, line, part, "alice", game)
        assert r.passed and r.max_residual <= 1e-10


def test_glue_commutation_hypothesis_gate():
    gms = gm.glued_magic_square()
    s = st.identity_strategy(18, la.make_max_entangled(2))
    r = se.check_glue_commutation(s, (2, 5, 8), range(9), "alice", gms)
    assert not r.hypothesis_holds and not r.passed


def test_decompose_recovers_weights():
    rng = np.random.default_rng(7)
    s, _, _ = random_gms_instance(rng, weights=(0.6, 0.8))
    rep = se.decompose_gms(s)
    assert np.allclose(rep.weights, (0.6, 0.8), atol=1e-8)
    assert all(abs(sub.ms_win_probability - 1) <= 1e-9 for sub in rep.substrategies)
    assert rep.passed and not rep.degenerate
    assert max(rep.residuals.values()) <= 1e-8
    assert np.allclose(rep.substates[0] + rep.substates[1], s.state.amplitudes, atol=1e-9)


def test_decompose_degenerate(rng):
    s = st.build_glued_strategy(1, st.representation_from_characters(st.random_characters(rng)))
    rep = se.decompose_gms(s)
    assert rep.weights[0] == pytest.approx(1) and rep.weights[1] == pytest.approx(0, abs=1e-12)
    assert rep.degenerate and rep.substrategies[1].degenerate and rep.passed


def test_decompose_example_strategy(rng):
    a = 2**-0.5
    s = st.example_strategy(a, a, la.random_state(5, 5, rng))
    rep = se.decompose_gms(s)
    assert rep.block_dims_alice == (4, 20) and rep.block_dims_bob == (4, 20)
    assert np.allclose(rep.weights, (a, a), atol=1e-10)
    assert rep.passed


def test_decompose_padded_input():
    rng = np.random.default_rng(11)
    s, _, _ = random_gms_instance(rng, weights=(0.8, 0.6), pad=2)
    rep = se.decompose_gms(s)
    assert np.allclose(rep.weights, (0.8, 0.6), atol=1e-8)
    assert la.projector_rank(rep.support_projectors["alice_0"]) == 2


def test_decompose_rejects_imperfect():
    s = st.identity_strategy(18, la.make_max_entangled(2))
    with pytest.raises(PreconditionError, match="winning probability"):
        se.decompose_gms(s)


def test_decompose_names_failing_step(rng):
    s, _, _ = random_gms_instance(rng)
    with pytest.raises(ProofStepError) as exc:
        se.decompose_gms(s, step_tol=1e-30)
    assert exc.value.step


def test_decompose_equivariance():
    rng = np.random.default_rng(5)
    s, _, _ = random_gms_instance(rng)
    ua, ub = la.random_unitary(s.dim_a, rng), la.random_unitary(s.dim_b, rng)
    r0 = se.decompose_gms(s)
    r1 = se.decompose_gms(st.conjugate_local(s, ua, ub))
    assert np.allclose(r0.weights, r1.weights, atol=1e-9)
    for key in ("E-", "F-"):
        assert la.max_dev(ua @ r0.projectors[key] @ ua.conj().T, r1.projectors[key]) <= 1e-8
    for key in ("G-", "H-"):
        assert la.max_dev(ub @ r0.projectors[key] @ ub.conj().T, r1.projectors[key]) <= 1e-8
    for a, b in zip(r0.substrategies, r1.substrategies):
        assert a.ms_win_probability == pytest.approx(b.ms_win_probability, abs=1e-9)
        assert a.representation_alice.passed == b.representation_alice.passed
    assert r0.passed == r1.passed
    assert r0.to_json()["substrategies"][0]["representation_alice"] is True


def test_verify_representation_examples(rng):
    grid = st.representation_from_characters(st.random_characters(rng)).grid()
    assert se.verify_representation(grid).passed
    bad = se.verify_representation(st.ideal_magic_square().alice)
    assert not bad.passed
    assert bad.residuals["pos3*pos6*pos9=I"] == pytest.approx(2)
    assert se.verify_representation([np.eye(3)] * 9).passed


def test_state_selftest_examples(rng):
    r = se.check_state_selftest(la.make_max_entangled(4))
    assert r.passed and r.clusters == [(pytest.approx(0.5), 4)]
    xi = la.random_state(5, 5, rng)
    r = se.check_state_selftest(BipartiteState(np.kron(la.make_max_entangled(4).amplitudes, xi.amplitudes)))
    assert r.passed and [m for _, m in r.clusters] == [4] * 5
    r = se.check_state_selftest(BipartiteState(np.diag([0.6, 0.8])))
    assert not r.passed


def test_convex_dilation_ground_truth():
    rng = np.random.default_rng(3)
    s, parts, (ua, ub) = random_gms_instance(rng, weights=(0.6, 0.8))
    w = se.convex_witnesses(parts, ua, ub)
    rep = se.verify_convex_dilation(s, [p for _, p in parts], w, [0.6, 0.8])
    assert rep.passed and rep.max_residual() <= 1e-10


def test_convex_dilation_reduces_to_local():
    rng = np.random.default_rng(4)
    ideal = st.ideal_magic_square()
    ua, ub = la.random_unitary(4, rng), la.random_unitary(4, rng)
    s = st.conjugate_local(ideal, ua, ub)
    w = st.DilationWitness(ua.conj().T, ub.conj().T, BipartiteState(np.ones((1, 1))))
    local = st.verify_local_dilation(s, ideal, w)
    conv = se.verify_convex_dilation(s, [ideal], [w], [1.0])
    assert local.passed == conv.passed
    assert conv.max_residual() == pytest.approx(local.max_residual(), abs=1e-14)
    wrong = st.DilationWitness(np.eye(4), np.eye(4), BipartiteState(np.ones((1, 1))))
    assert st.verify_local_dilation(s, ideal, wrong).passed == se.verify_convex_dilation(s, [ideal], [wrong], [1.0]).passed


def test_convex_dilation_swapped_aux():
    rng = np.random.default_rng(6)
    ideal = st.ideal_magic_square()
    aux1, aux2 = la.random_state(2, 2, rng), la.random_state(2, 2, rng)
    b1, b2 = st.tensor_aux(ideal, aux1), st.tensor_aux(ideal, aux2)
    s = st.convex_combination([(0.6, b1), (0.8, b2)])
    eye = np.eye(16)
    good = [st.DilationWitness(eye[:8], eye[:8], aux1), st.DilationWitness(eye[8:], eye[8:], aux2)]
    assert se.verify_convex_dilation(s, [ideal, ideal], good, [0.6, 0.8]).passed
    swapped = [st.DilationWitness(eye[:8], eye[:8], aux2), st.DilationWitness(eye[8:], eye[8:], aux1)]
    assert not se.verify_convex_dilation(s, [ideal, ideal], swapped, [0.6, 0.8]).passed


@settings(max_examples=10)
@given(seeds)
def test_decomposition_invariants(seed):
    rng = np.random.default_rng(seed)
    s, parts, _ = random_gms_instance(rng)
    rep = se.decompose_gms(s)
    assert np.allclose(rep.weights, [w for w, _ in parts], atol=1e-8)
    assert rep.residuals["ef_plus"] <= 1e-9 and rep.residuals["ef_identity"] <= 1e-9 and rep.residuals["fg"] <= 1e-9
    assert rep.state_selftest.passed
    for sub in rep.substrategies:
        assert sub.ms_win_probability >= 1 - 1e-9
        assert sub.representation_alice.passed and sub.representation_bob.passed
        assert sub.state_selftest.passed
