"""
Projection Postulate Engine

Dense complex linear algebra for finite-dimensional Hilbert spaces.

Conventions used everywhere in the engine:
  * inner(phi, psi) is conjugate-linear in its FIRST argument
    (np.vdot(phi, psi)); Born weights always use |.|^2.
  * Tensor products are big-endian: the left factor is the most significant
    index, matching |q0 q1 ...> circuit order.
  * A set of vectors is passed around as a 2-D array whose ROWS are the
    vectors (shape (k, dim)).
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimMismatch, NormError, NotHermitian, NotOrthonormal, NotPositive
from tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """A unit-norm pure state in a fixed computational basis."""

    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.amplitudes.shape[0])

    @classmethod
    def from_amplitudes(cls, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES) -> "StateVector":
        vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if vec.size < 1:
            raise DimMismatch("A state vector needs at least one amplitude")
        norm_sq = float(np.vdot(vec, vec).real)
        if abs(norm_sq - 1.0) > tol.norm:
            raise NormError(f"State is not normalized: ||psi||^2 = {norm_sq!r}")
        return cls(_frozen(vec))

    @classmethod
    def normalized(cls, vector) -> "StateVector":
        """Normalize an arbitrary nonzero vector into a state."""
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise NormError("Cannot normalize the zero vector")
        return cls(_frozen(vec / norm))

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        if not 0 <= index < dim:
            raise DimMismatch(f"Basis index {index} out of range for dim {dim}")
        vec = np.zeros(dim, dtype=complex)
        vec[index] = 1.0
        return cls(_frozen(vec))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def from_matrix(cls, matrix, tol: Tolerances = DEFAULT_TOLERANCES) -> "DensityOperator":
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise DimMismatch(f"A density operator must be a nonempty square matrix, got shape {mat.shape}")
        herm_err = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_err > tol.herm:
            raise NotHermitian(f"Matrix is not Hermitian (max deviation {herm_err:.3e})")
        trace = np.trace(mat)
        if abs(trace - 1.0) > tol.norm:
            raise NormError(f"Density operator trace is {trace!r}, expected 1")
        smallest = float(np.linalg.eigvalsh(mat)[0])
        if smallest < -tol.psd:
            raise NotPositive(f"Density operator has negative eigenvalue {smallest:.3e}")
        return cls(_frozen(mat))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_pure(self, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return abs(self.purity() - 1.0) <= tol.norm


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


State = Union[StateVector, DensityOperator]


# --------------------------------------------------------------------------- #
# Basic operations
# --------------------------------------------------------------------------- #

def pure_to_density(psi: StateVector, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """rho_psi = psi psi^dagger, the rank-1 projector onto psi."""
    vec = psi.amplitudes
    norm_sq = float(np.vdot(vec, vec).real)
    if abs(norm_sq - 1.0) > tol.norm:
        raise NormError(f"State is not normalized: ||psi||^2 = {norm_sq!r}")
    return DensityOperator(_frozen(np.outer(vec, vec.conj())))


def as_density(state: State, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    if isinstance(state, DensityOperator):
        return state
    return pure_to_density(state, tol=tol)


def _vector(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes
    return np.asarray(x, dtype=complex).reshape(-1)


def _operator(x) -> np.ndarray:
    if isinstance(x, (DensityOperator, Projector)):
        return x.matrix
    return np.asarray(x, dtype=complex)


def inner(phi, psi) -> complex:
    """<phi, psi>, conjugate-linear in phi."""
    a, b = _vector(phi), _vector(psi)
    if a.shape != b.shape:
        raise DimMismatch(f"Inner product of vectors with dims {a.shape[0]} and {b.shape[0]}")
    return complex(np.vdot(a, b))


def apply(op, psi) -> np.ndarray:
    """Matrix-vector product. The result is not normalized."""
    mat, vec = _operator(op), _vector(psi)
    if mat.ndim != 2 or mat.shape[1] != vec.shape[0]:
        raise DimMismatch(f"Cannot apply operator of shape {mat.shape} to vector of dim {vec.shape[0]}")
    return mat @ vec


def tensor(*factors):
    """Kronecker product, left factor most significant.

    Two or more StateVectors give a StateVector, two or more DensityOperators
    give a DensityOperator; anything else is treated as a plain array.
    """
    if not factors:
        raise DimMismatch("tensor() needs at least one factor")
    if all(isinstance(f, StateVector) for f in factors):
        out = factors[0].amplitudes
        for f in factors[1:]:
            out = np.kron(out, f.amplitudes)
        return StateVector(_frozen(out))
    if all(isinstance(f, DensityOperator) for f in factors):
        out = factors[0].matrix
        for f in factors[1:]:
            out = np.kron(out, f.matrix)
        return DensityOperator(_frozen(out))
    arrays = [f.amplitudes if isinstance(f, StateVector) else _operator(f) for f in factors]
    out = arrays[0]
    for a in arrays[1:]:
        out = np.kron(out, a)
    return out


def partial_trace(rho: State, dims: Sequence[int], keep: Union[int, Sequence[int]],
                  tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """Reduced density operator on the subsystems listed in `keep` (kept in ascending order)."""
    mat = as_density(rho, tol=tol).matrix
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != mat.shape[0]:
        raise DimMismatch(f"Factor dims {dims} do not multiply to {mat.shape[0]}")
    kept = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if not kept or any(k < 0 or k >= len(dims) for k in kept):
        raise DimMismatch(f"Invalid subsystem selection {keep} for {len(dims)} factors")

    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = [rows[k] if k not in kept else letters[n + k] for k in range(n)]
    out = [rows[k] for k in kept] + [cols[k] for k in kept]
    spec = f"{''.join(rows)}{''.join(cols)}->{''.join(out)}"
    reduced = np.einsum(spec, mat.reshape(dims + dims))
    side = int(np.prod([dims[k] for k in kept]))
    reduced = reduced.reshape(side, side)
    trace_err = abs(np.trace(reduced) - 1.0)
    if trace_err > tol.norm:
        logger.warning(f"Partial trace drifted from unit trace by {trace_err:.3e}")
    return DensityOperator(_frozen(reduced))


# --------------------------------------------------------------------------- #
# Vector sets and projectors
# --------------------------------------------------------------------------- #

def stack_vectors(vectors: Iterable) -> np.ndarray:
    """Rows-are-vectors array from a sequence of StateVectors / arrays."""
    rows = [_vector(v) for v in vectors]
    if not rows:
        raise NotOrthonormal("Empty vector set")
    if len({r.shape[0] for r in rows}) != 1:
        raise DimMismatch("Vectors of different dims in one set")
    return np.array(rows, dtype=complex)


def gram_error(rows: np.ndarray) -> float:
    """max |<v_k, v_l> - delta_kl| over the rows."""
    gram = rows.conj() @ rows.T
    return float(np.max(np.abs(gram - np.eye(rows.shape[0]))))


def projector_onto(vectors, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """Sum_k v_k v_k^dagger for an orthonormal set."""
    rows = vectors if isinstance(vectors, np.ndarray) and vectors.ndim == 2 else stack_vectors(vectors)
    err = gram_error(rows)
    if err > tol.norm:
        raise NotOrthonormal(f"Vectors are not orthonormal (Gram deviation {err:.3e})")
    matrix = rows.T @ rows.conj()
    return Projector(_frozen(matrix), int(rows.shape[0]))


def complete_orthonormal_basis(leading, span_rows: np.ndarray,
                               rng: Optional[np.random.Generator] = None,
                               tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Extend orthonormal `leading` vectors to an orthonormal basis of span(span_rows).

    Candidates are taken from random combinations of the span rows when `rng` is
    given (seeded fill), then from the span rows themselves; Gram-Schmidt keeps
    the first ones that add a new direction. The result always starts with
    `leading` unchanged.
    """
    span_rows = np.asarray(span_rows, dtype=complex)
    target = span_rows.shape[0]
    basis = [] if leading is None or len(leading) == 0 else list(stack_vectors(leading))
    if basis and gram_error(np.array(basis)) > tol.norm:
        raise NotOrthonormal("Leading vectors are not orthonormal")

    candidates = []
    if rng is not None:
        coeffs = rng.normal(size=(target, target)) + 1j * rng.normal(size=(target, target))
        candidates.extend(coeffs @ span_rows)
    candidates.extend(span_rows)

    for cand in candidates:
        if len(basis) >= target:
            break
        v = np.array(cand, dtype=complex)
        # two passes of modified Gram-Schmidt for stability
        for _ in range(2):
            for b in basis:
                v = v - np.vdot(b, v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
    if len(basis) != target:
        raise NotOrthonormal(f"Could not complete basis: got {len(basis)} of {target} vectors")
    return np.array(basis, dtype=complex)


# --------------------------------------------------------------------------- #
# Figures of merit
# --------------------------------------------------------------------------- #

def fidelity(psi: StateVector, rho: State) -> float:
    """<psi|rho|psi> against a pure target."""
    vec = _vector(psi)
    mat = as_density(rho).matrix
    return float(np.real(np.vdot(vec, mat @ vec)))


def trace_distance(rho: State, sigma: State) -> float:
    """(1/2) ||rho - sigma||_1."""
    a, b = as_density(rho).matrix, as_density(sigma).matrix
    if a.shape != b.shape:
        raise DimMismatch(f"Trace distance between dims {a.shape[0]} and {b.shape[0]}")
    diff = a - b
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


# --------------------------------------------------------------------------- #
# Qubit constants
# --------------------------------------------------------------------------- #

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

KET_0 = StateVector.basis(2, 0)
KET_1 = StateVector.basis(2, 1)
KET_PLUS = StateVector.normalized([1, 1])


def phase_gate(theta: float) -> np.ndarray:
    """diag(1, e^{i theta})."""
    return np.diag([1.0, np.exp(1j * theta)]).astype(complex)


def bell_states() -> Tuple[StateVector, StateVector, StateVector, StateVector]:
    """(Phi+, Psi+, Phi-, Psi-) on two qubits."""
    s = 1 / np.sqrt(2)
    return (
        StateVector(_frozen([s, 0, 0, s])),
        StateVector(_frozen([0, s, s, 0])),
        StateVector(_frozen([s, 0, 0, -s])),
        StateVector(_frozen([0, s, -s, 0])),
    )
