"""Dense complex linear algebra for bipartite strategies.

Index convention, used everywhere in the package: a bipartite state on
``C^dA (x) C^dB`` is stored as its ``dA x dB`` amplitude matrix ``Psi`` with
``Psi[i, j]`` the coefficient of ``|i>_A |j>_B``.  The flattened vector is the
row-major ravel, i.e. index ``i * dB + j``, which matches ``np.kron`` with
Alice as the left (major) factor.  In this picture a local operator acts as

    (A (x) B) |psi>   <->   A @ Psi @ B.T
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .errors import InvariantError, PreconditionError

TOL = 1e-9
RANK_TOL = 1e-9
CLUSTER_GAP = 1e-6

Side = Literal["alice", "bob"]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``pauli("ZX") == Z (x) X``."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _PAULI[ch])
    return out


def bell_basis() -> np.ndarray:
    """Columns Phi+, Phi-, Psi+, Psi-: the joint eigenbasis of Z(x)Z and X(x)X."""
    s = 1 / np.sqrt(2)
    return np.array(
        [[s, s, 0, 0],
         [0, 0, s, s],
         [0, 0, s, -s],
         [s, -s, 0, 0]],
        dtype=complex,
    )


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise InvariantError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvariantError("matrix has non-finite entries")
    return m


def op_norm(m: np.ndarray) -> float:
    """Operator (spectral) norm."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def max_dev(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entrywise deviation ``max |a - b|``."""
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class BipartiteState:
    """Unit vector in ``C^dA (x) C^dB`` stored as a ``dA x dB`` amplitude matrix."""

    amplitudes: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.amplitudes).copy()
        n = np.linalg.norm(m)
        if abs(n - 1) > TOL:
            raise InvariantError(f"state has norm {n:.12g}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "amplitudes", m)

    @classmethod
    def from_vector(cls, vec, dim_a: int, dim_b: int) -> "BipartiteState":
        v = np.asarray(vec, dtype=complex)
        if v.shape != (dim_a * dim_b,):
            raise InvariantError(f"vector of length {v.size} does not fit {dim_a}x{dim_b}")
        return cls(v.reshape(dim_a, dim_b))

    @classmethod
    def normalized(cls, amplitudes) -> "BipartiteState":
        m = _as_matrix(amplitudes)
        n = np.linalg.norm(m)
        if n == 0:
            raise InvariantError("cannot normalize the zero vector")
        return cls(m / n)

    @property
    def dim_a(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dim_b(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """``psi = sum_i coefficients[i] alice_basis[:, i] (x) bob_basis[:, i]``."""

    coefficients: np.ndarray
    alice_basis: np.ndarray
    bob_basis: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        """Amplitude matrix of the decomposed state."""
        return (self.alice_basis * self.coefficients) @ self.bob_basis.T


def tensor(a, b) -> np.ndarray:
    """Kronecker product, left factor is the major (Alice) index."""
    return np.kron(_as_matrix(a), _as_matrix(b))


def direct_sum_operators(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal operator; block ``k`` occupies the index range of summand ``k``."""
    mats = [_as_matrix(o) for o in ops]
    for k, m in enumerate(mats):
        if m.shape[0] != m.shape[1]:
            raise InvariantError(f"summand {k} is not square: {m.shape}")
    return scipy.linalg.block_diag(*mats).astype(complex)


def direct_sum_rect(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal arrangement of possibly rectangular blocks."""
    return scipy.linalg.block_diag(*[_as_matrix(m) for m in mats]).astype(complex)


def embed_direct_sum_state(parts: Sequence[tuple[float, BipartiteState]], tol: float = TOL) -> BipartiteState:
    """State ``(+)_k w_k psi_k`` on ``((+)_k H_A^k) (x) ((+)_k H_B^k)``.

    Off-diagonal blocks ``H_A^k (x) H_B^l`` (k != l) carry zero amplitude, so
    the amplitude matrix is simply block diagonal.
    """
    weights = np.array([w for w, _ in parts], dtype=float)
    if abs(np.sum(weights**2) - 1) > tol:
        raise InvariantError(f"weights squared sum to {np.sum(weights**2):.12g}, expected 1")
    blocks = [w * s.amplitudes for w, s in parts]
    return BipartiteState(scipy.linalg.block_diag(*blocks).astype(complex))


def make_max_entangled(k: int) -> BipartiteState:
    """``(1/sqrt k) sum_i |ii>``."""
    if k < 2:
        raise InvariantError(f"maximally entangled state needs k >= 2, got {k}")
    return BipartiteState(np.eye(k, dtype=complex) / np.sqrt(k))


def product_state(dim_a: int, dim_b: int, i: int = 0, j: int = 0) -> BipartiteState:
    m = np.zeros((dim_a, dim_b), dtype=complex)
    m[i, j] = 1
    return BipartiteState(m)


def schmidt(state: BipartiteState | np.ndarray, rank_tol: float = RANK_TOL) -> SchmidtDecomposition:
    """Schmidt decomposition via SVD of the amplitude matrix.

    Coefficients are nonincreasing; those at or below ``rank_tol`` are dropped.
    """
    psi = state.amplitudes if isinstance(state, BipartiteState) else _as_matrix(state)
    if np.linalg.norm(psi) == 0:
        raise InvariantError("Schmidt decomposition of the zero vector")
    u, s, vh = np.linalg.svd(psi, full_matrices=False)
    keep = s > rank_tol
    return SchmidtDecomposition(s[keep], u[:, keep], vh[keep].T)


def cluster_values(values: Sequence[float], rel_gap: float = CLUSTER_GAP) -> list[tuple[float, int]]:
    """Group nonincreasing values into ``(mean, multiplicity)`` clusters.

    A new cluster starts wherever consecutive values differ by more than
    ``rel_gap`` relative to the larger one.
    """
    vals = sorted((float(v) for v in values), reverse=True)
    groups: list[list[float]] = []
    for v in vals:
        if groups and groups[-1][-1] - v <= rel_gap * abs(groups[-1][-1]):
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def check_observable(m, tol: float = TOL, name: str = "operator") -> np.ndarray:
    """Return ``m`` as a complex matrix, raising unless it is a self-adjoint involution."""
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvariantError(f"{name} is not square: {a.shape}")
    herm = max_dev(a, a.conj().T)
    if herm > tol:
        raise InvariantError(f"{name} is not self-adjoint (deviation {herm:.3e})")
    inv = max_dev(a @ a, np.eye(a.shape[0]))
    if inv > tol:
        raise InvariantError(f"{name} does not square to identity (deviation {inv:.3e})")
    return a


def is_observable(m, tol: float = TOL) -> bool:
    try:
        check_observable(m, tol)
    except InvariantError:
        return False
    return True


def check_unitary(m, tol: float = TOL, name: str = "operator") -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvariantError(f"{name} is not square: {a.shape}")
    dev = max_dev(a.conj().T @ a, np.eye(a.shape[1]))
    if dev > tol:
        raise InvariantError(f"{name} is not unitary (deviation {dev:.3e})")
    return a


def check_isometry(m, tol: float = TOL, name: str = "isometry") -> np.ndarray:
    a = _as_matrix(m)
    dev = max_dev(a.conj().T @ a, np.eye(a.shape[1]))
    if dev > tol:
        raise InvariantError(f"{name} does not have orthonormal columns (deviation {dev:.3e})")
    return a


def eigenprojectors(a, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Spectral projectors ``(A+, A-)`` of an observable, ``A = A+ - A-``."""
    a = check_observable(a, tol)
    eye = np.eye(a.shape[0])
    return hermitize((eye + a) / 2), hermitize((eye - a) / 2)


def projector_rank(p: np.ndarray) -> int:
    return int(round(float(np.trace(p).real)))


def range_basis(p: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the range of a (near-)projector."""
    w, v = np.linalg.eigh(hermitize(p))
    return v[:, w > 0.5]


def support_projector(state: BipartiteState, side: Side, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto the span of one party's Schmidt vectors."""
    sd = schmidt(state, rank_tol)
    basis = sd.alice_basis if side == "alice" else sd.bob_basis
    return hermitize(basis @ basis.conj().T)


def support_basis(state: BipartiteState, side: Side, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of ``Supp_side(psi)`` as matrix columns."""
    sd = schmidt(state, rank_tol)
    return sd.alice_basis if side == "alice" else sd.bob_basis


def subspace_from_projectors(p: np.ndarray, q: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Projector onto ``Ran(P) & Ran(Q)`` for commuting projectors."""
    p = _as_matrix(p)
    q = _as_matrix(q)
    comm = op_norm(p @ q - q @ p)
    if comm > tol:
        raise PreconditionError(f"projectors do not commute (commutator norm {comm:.3e})")
    return hermitize(p @ q)


def apply_local(psi: np.ndarray, a: np.ndarray | None = None, b: np.ndarray | None = None) -> np.ndarray:
    """Amplitude matrix of ``(A (x) B) psi``; ``None`` means identity."""
    out = psi if a is None else a @ psi
    return out if b is None else out @ b.T


def expectation(psi: np.ndarray, a: np.ndarray | None = None, b: np.ndarray | None = None) -> complex:
    """``<psi| A (x) B |psi>`` for an amplitude matrix ``psi``."""
    return complex(np.vdot(psi, apply_local(psi, a, b)))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=rng).astype(complex)


def random_state(dim_a: int, dim_b: int, rng: np.random.Generator) -> BipartiteState:
    m = rng.normal(size=(dim_a, dim_b)) + 1j * rng.normal(size=(dim_a, dim_b))
    return BipartiteState.normalized(m)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random self-adjoint matrix scaled to unit operator norm."""
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = hermitize(m)
    return h / op_norm(h)


def random_observable(d: int, rng: np.random.Generator, signs=None) -> np.ndarray:
    u = random_unitary(d, rng)
    if signs is None:
        signs = rng.choice([-1.0, 1.0], size=d)
    return hermitize((u * np.asarray(signs)) @ u.conj().T)
