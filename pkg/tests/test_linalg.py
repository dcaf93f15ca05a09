import numpy as np
import pytest
from hypothesis import given, strategies as hst

from gluedgames import linalg as la
from gluedgames.errors import InvariantError, PreconditionError
from gluedgames.linalg import BipartiteState, X, Y, Z


def test_tensor_identity_and_zz_fixes_psi2():
    assert np.allclose(la.tensor(np.eye(2), np.eye(2)), np.eye(4))
    psi2 = la.make_max_entangled(2)
    zz = la.tensor(Z, Z)
    assert np.allclose(zz @ psi2.vector, psi2.vector)
    assert np.isclose(np.vdot(psi2.vector, zz @ psi2.vector), 1)


def test_pauli_product_is_minus_identity():
    prod = la.tensor(Z, Z) @ la.tensor(X, X) @ la.tensor(Y, Y)
    assert np.allclose(prod, -np.eye(4))


def test_amplitude_matrix_convention_matches_kron():
    rng = np.random.default_rng(0)
    s = la.random_state(3, 5, rng)
    a, b = la.random_unitary(3, rng), la.random_unitary(5, rng)
    direct = np.kron(a, b) @ s.vector
    assert np.allclose(la.apply_local(s.amplitudes, a, b).reshape(-1), direct)
    assert np.isclose(la.expectation(s.amplitudes, a, b), np.vdot(s.vector, direct))


def test_direct_sum_operators():
    assert np.allclose(la.direct_sum_operators([np.eye(1), -np.eye(1)]), np.diag([1, -1]))
    m = la.direct_sum_operators([np.eye(2), -np.eye(2)])
    assert np.allclose(m @ m, np.eye(4))
    with pytest.raises(InvariantError):
        la.direct_sum_operators([np.ones((2, 3))])


def test_direct_sum_of_glued_blocks_is_observable():
    from gluedgames.strategies import ideal_magic_square, representation_from_characters

    g1 = representation_from_characters([[1, -1, 1, -1]] * 4).grid()[0]
    a1 = ideal_magic_square().alice[0]
    assert la.is_observable(la.direct_sum_operators([a1, g1]))


def test_embed_direct_sum_gives_psi5():
    w = [np.sqrt(2 / 5), np.sqrt(3 / 5)]
    s = la.embed_direct_sum_state([(w[0], la.make_max_entangled(2)), (w[1], la.make_max_entangled(3))])
    assert np.allclose(s.amplitudes, la.make_max_entangled(5).amplitudes)


def test_embed_single_part_and_equal_weights():
    psi4 = la.make_max_entangled(4)
    assert np.allclose(la.embed_direct_sum_state([(1.0, psi4)]).amplitudes, psi4.amplitudes)
    s = la.embed_direct_sum_state([(2**-0.5, psi4), (2**-0.5, psi4)])
    assert np.allclose(la.schmidt(s).coefficients, np.full(8, 1 / (2 * np.sqrt(2))))


def test_embed_rejects_bad_weights():
    with pytest.raises(InvariantError):
        la.embed_direct_sum_state([(0.5, la.make_max_entangled(2)), (0.5, la.make_max_entangled(2))])


def test_off_diagonal_blocks_are_zero():
    rng = np.random.default_rng(1)
    s1, s2 = la.random_state(2, 3, rng), la.random_state(4, 1, rng)
    s = la.embed_direct_sum_state([(0.6, s1), (0.8, s2)])
    assert s.amplitudes.shape == (6, 4)
    assert np.allclose(s.amplitudes[:2, 3:], 0) and np.allclose(s.amplitudes[2:, :3], 0)
    assert np.allclose(s.amplitudes[:2, :3], 0.6 * s1.amplitudes)


def test_make_max_entangled():
    assert np.allclose(la.make_max_entangled(2).vector, [2**-0.5, 0, 0, 2**-0.5])
    assert np.allclose(la.schmidt(la.make_max_entangled(4)).coefficients, [0.5] * 4)
    s8 = la.make_max_entangled(8)
    assert np.isclose(np.linalg.norm(s8.vector), 1)
    assert np.allclose(la.schmidt(s8).coefficients, [8**-0.5] * 8)
    with pytest.raises(InvariantError):
        la.make_max_entangled(1)


def test_schmidt_examples():
    assert np.allclose(la.schmidt(la.product_state(2, 2)).coefficients, [1])
    s = BipartiteState(np.array([[0.6, 0], [0, 0.8]]))
    assert np.allclose(la.schmidt(s).coefficients, [0.8, 0.6])
    assert np.allclose(la.schmidt(la.make_max_entangled(5)).coefficients, [5**-0.5] * 5)
    with pytest.raises(InvariantError):
        la.schmidt(np.zeros((2, 2)))


def test_state_invariants():
    with pytest.raises(InvariantError):
        BipartiteState(np.ones((2, 2)))
    with pytest.raises(InvariantError):
        BipartiteState(np.array([[np.nan, 0], [0, 1]]))


def test_eigenprojectors_examples():
    p, m = la.eigenprojectors(Z)
    assert np.allclose(p, np.diag([1, 0])) and np.allclose(m, np.diag([0, 1]))
    p, m = la.eigenprojectors(np.eye(3))
    assert np.allclose(p, np.eye(3)) and np.allclose(m, 0)
    with pytest.raises(InvariantError):
        la.eigenprojectors(np.diag([1, 0.5]))


def test_ideal_odd_column_projector():
    from gluedgames.strategies import ideal_magic_square

    a = ideal_magic_square().alice
    e = a[2] @ a[5] @ a[8]
    assert np.allclose(e, -np.eye(4))
    _, em = la.eigenprojectors(e)
    assert np.allclose(em, np.eye(4))


def test_support_projector_examples():
    p = la.support_projector(la.product_state(2, 2), "alice")
    assert np.allclose(p, np.diag([1, 0])) and la.projector_rank(p) == 1
    assert np.allclose(la.support_projector(la.make_max_entangled(4), "alice"), np.eye(4))


def test_support_projector_example_block():
    from gluedgames.strategies import example_strategy
    from gluedgames.selftest import GMS_ODD_FIRST

    rng = np.random.default_rng(2)
    s = example_strategy(0.6, 0.8, la.random_state(5, 5, rng))
    e = s.alice[2] @ s.alice[5] @ s.alice[8]
    g = s.bob[2] @ s.bob[5] @ s.bob[8]
    _, em = la.eigenprojectors(la.hermitize(e))
    _, gm = la.eigenprojectors(la.hermitize(g))
    phi = la.apply_local(s.state.amplitudes, em, gm)
    p = la.support_projector(BipartiteState.normalized(phi), "alice")
    assert la.projector_rank(p) == 4
    expected = np.zeros((24, 24))
    expected[:4, :4] = np.eye(4)
    assert np.allclose(p, expected)
    assert GMS_ODD_FIRST == (2, 5, 8)


def test_subspace_from_projectors():
    assert np.allclose(la.subspace_from_projectors(np.eye(3), np.eye(3)), np.eye(3))
    p, q = np.diag([1, 1, 0, 0]), np.diag([0, 1, 1, 0])
    assert np.allclose(la.subspace_from_projectors(p, q), np.diag([0, 1, 0, 0]))
    h = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(PreconditionError, match="commutator norm"):
        la.subspace_from_projectors(np.diag([1, 0]), h)


def test_cluster_values():
    assert la.cluster_values([0.5, 0.5, 0.5 - 1e-9, 0.2]) == [(pytest.approx(0.5), 3), (pytest.approx(0.2), 1)]


dims = hst.integers(min_value=1, max_value=6)
seeds = hst.integers(min_value=0, max_value=2**31 - 1)


@given(seeds, dims, dims, dims)
def test_tensor_associative_bilinear(seed, d1, d2, d3):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in (d1, d2, d3))
    assert la.max_dev(la.tensor(la.tensor(a, b), c), la.tensor(a, la.tensor(b, c))) <= 1e-12 * max(1, np.abs(a).max() * np.abs(b).max() * np.abs(c).max())
    a2 = rng.normal(size=(d1, d1))
    lhs = la.tensor(2 * a + a2, b)
    rhs = 2 * la.tensor(a, b) + la.tensor(a2, b)
    assert la.max_dev(lhs, rhs) <= 1e-11


@given(seeds, hst.lists(dims, min_size=1, max_size=4))
def test_direct_sum_of_observables_is_observable(seed, ds):
    rng = np.random.default_rng(seed)
    ops = [la.random_observable(d, rng) for d in ds]
    assert la.is_observable(la.direct_sum_operators(ops))


@given(seeds, hst.integers(1, 32), hst.integers(1, 32))
def test_schmidt_reconstructs(seed, da, db):
    rng = np.random.default_rng(seed)
    s = la.random_state(da, db, rng)
    sd = la.schmidt(s)
    assert la.max_dev(sd.reconstruct(), s.amplitudes) <= 1e-10
    assert abs(np.sum(sd.coefficients**2) - 1) <= 1e-10
    assert np.all(np.diff(sd.coefficients) <= 1e-15)
    assert la.max_dev(sd.alice_basis.conj().T @ sd.alice_basis, np.eye(sd.rank)) <= 1e-10


@given(seeds, hst.integers(1, 8))
def test_eigenprojector_identities(seed, d):
    a = la.random_observable(d, np.random.default_rng(seed))
    p, m = la.eigenprojectors(a)
    assert la.max_dev(p @ m, np.zeros_like(p)) <= 1e-10
    assert la.max_dev(p + m, np.eye(d)) <= 1e-10
    assert la.max_dev(p - m, a) <= 1e-10


@given(seeds, hst.integers(1, 6), hst.integers(1, 6), hst.integers(1, 4))
def test_support_projector_fixes_state(seed, da, db, r):
    rng = np.random.default_rng(seed)
    r = min(r, da, db)
    m = rng.normal(size=(da, r)) @ rng.normal(size=(r, db))
    s = BipartiteState.normalized(m)
    pa = la.support_projector(s, "alice")
    pb = la.support_projector(s, "bob")
    assert la.max_dev(la.apply_local(s.amplitudes, pa), s.amplitudes) <= 1e-10
    assert la.max_dev(la.apply_local(s.amplitudes, None, pb), s.amplitudes) <= 1e-10
    assert la.max_dev(pa @ pa, pa) <= 1e-10
