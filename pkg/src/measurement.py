"""
Projection Postulate Engine

The projection postulates as executable channels.

  * Lüders: selecting alpha_i maps rho to P_i rho P_i / p_i; without
    selection the state becomes sum_i P_i rho P_i.
  * von Neumann: the A-measurement is realized through a nondegenerate
    refinement D = sum_i sum_n gamma_in P_{e_in} commuting with A, A = f(D).
    Without selection the state becomes sum_in <e_in|rho|e_in> P_{e_in};
    selecting alpha_i keeps the i-th block of that mixture, normalized.
  * For nondegenerate spectra both coincide with the basic postulate
    (pp_nondegenerate).

Every channel accepts a StateVector or a DensityOperator. Parent outcomes are
indexed by their position in the ascending eigenvalue order, refined
outcomes by (i, n) pairs.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from errors import DegenerateSpectrum, DimMismatch, NormError, NotInEigenspace, NotOrthonormal, SpanMismatch, UnknownOutcome, ZeroProbabilityOutcome
from hilbert import (
    DensityOperator, State, StateVector, as_density, complete_orthonormal_basis,
    gram_error, projector_onto, pure_to_density, stack_vectors,
)
from random_ensembles import haar_unitary
from spectral import Observable, make_observable
from tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)


class Postulate(str, Enum):
    LUDERS = "luders"
    VON_NEUMANN_REFINED = "von_neumann_refined"
    PP_NONDEGENERATE = "pp_nondegenerate"


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    outcome: float
    probability: float
    post_state: DensityOperator
    postulate: Postulate
    selection: Optional[int] = None


# --------------------------------------------------------------------------- #
# Gamma strategies
# --------------------------------------------------------------------------- #

class FractionalGammaStrategy:
    """gamma_in = i + n / (2 * max_n + 2); floor(gamma_in) recovers i."""

    name = "fractional"

    def assign(self, block_sizes: Sequence[int]) -> List[np.ndarray]:
        max_n = max(block_sizes) - 1
        step = 1.0 / (2 * max_n + 2)
        return [np.array([i + n * step for n in range(size)]) for i, size in enumerate(block_sizes)]


class SequentialGammaStrategy:
    """gamma = 0, 1, 2, ... running through the blocks in order."""

    name = "sequential"

    def assign(self, block_sizes: Sequence[int]) -> List[np.ndarray]:
        out = []
        start = 0
        for size in block_sizes:
            out.append(np.arange(start, start + size, dtype=float))
            start += size
        return out


DEFAULT_GAMMA_STRATEGY = FractionalGammaStrategy()


@dataclass(frozen=True, eq=False)
class RefinementObservable:
    """Nondegenerate D refining `parent`: eigenvectors[i] are rows spanning H_i."""

    parent: Observable
    eigenvectors: Tuple[np.ndarray, ...]
    gammas: Tuple[np.ndarray, ...]
    coarse_table: Dict[float, float]

    @property
    def dim(self) -> int:
        return self.parent.dim

    def coarse_map(self, gamma: float) -> float:
        """f(gamma_in) = alpha_i."""
        try:
            return self.coarse_table[float(gamma)]
        except KeyError:
            raise UnknownOutcome(f"{gamma!r} is not an eigenvalue of this refinement")

    def outcomes(self) -> List[Tuple[int, int, float, np.ndarray]]:
        """(i, n, gamma_in, e_in) for every refined outcome."""
        return [(i, n, float(g[n]), vecs[n])
                for i, (vecs, g) in enumerate(zip(self.eigenvectors, self.gammas))
                for n in range(vecs.shape[0])]

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for _, _, gamma, vec in self.outcomes():
            out += gamma * np.outer(vec, vec.conj())
        return out

    def as_observable(self, tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
        values = [gamma for _, _, gamma, _ in self.outcomes()]
        bases = [vec[np.newaxis, :] for _, _, _, vec in self.outcomes()]
        return make_observable(values, bases, tol=tol)

    def commutator_norm(self) -> float:
        a, d = self.parent.matrix(), self.matrix()
        return float(np.max(np.abs(a @ d - d @ a)))


class BayesCheck(NamedTuple):
    lhs: float
    rhs: float
    residual: float


# --------------------------------------------------------------------------- #
# Helpers
# --------------------------------------------------------------------------- #

def _check_dims(obs_dim: int, state: State) -> None:
    state_dim = state.dim
    if state_dim != obs_dim:
        raise DimMismatch(f"Observable acts on dim {obs_dim}, state has dim {state_dim}")


def _block_probability(proj: np.ndarray, rho: np.ndarray) -> float:
    return float(np.real(np.trace(proj @ rho)))


def _expectations(rows: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """<e|rho|e> for every row e."""
    return np.real(np.einsum("ka,ab,kb->k", rows.conj(), rho, rows))


# --------------------------------------------------------------------------- #
# Born rule and Lüders channels
# --------------------------------------------------------------------------- #

def born_probabilities(obs: Observable, state: State, tol: Tolerances = DEFAULT_TOLERANCES) -> List[Tuple[float, float]]:
    """[(alpha_i, Tr(rho P_i))] in ascending eigenvalue order."""
    _check_dims(obs.dim, state)
    rho = as_density(state, tol=tol).matrix
    probs = [(float(alpha), _block_probability(p.matrix, rho)) for alpha, p in zip(obs.eigenvalues, obs.projectors)]
    total = sum(p for _, p in probs)
    if abs(total - 1.0) > tol.norm:
        logger.warning(f"Born probabilities sum to {total!r}")
    return probs


def luders_selective(obs: Observable, psi: State, i: int, tol: Tolerances = DEFAULT_TOLERANCES) -> MeasurementRecord:
    """Select alpha_i: post-state P_i psi / ||P_i psi|| (or P_i rho P_i / p_i)."""
    _check_dims(obs.dim, psi)
    obs.check_index(i)
    proj = obs.projectors[i].matrix
    if isinstance(psi, StateVector):
        projected = proj @ psi.amplitudes
        prob = float(np.vdot(projected, projected).real)
        if prob <= tol.prob:
            raise ZeroProbabilityOutcome(f"Outcome {obs.eigenvalues[i]} has probability {prob:.3e}")
        post = pure_to_density(StateVector.normalized(projected), tol=tol)
    else:
        rho = psi.matrix
        prob = _block_probability(proj, rho)
        if prob <= tol.prob:
            raise ZeroProbabilityOutcome(f"Outcome {obs.eigenvalues[i]} has probability {prob:.3e}")
        post = DensityOperator.from_matrix(proj @ rho @ proj / prob, tol=tol)
    return MeasurementRecord(float(obs.eigenvalues[i]), prob, post, Postulate.LUDERS, i)


def luders_nonselective(obs: Observable, rho: State, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """sum_i P_i rho P_i."""
    _check_dims(obs.dim, rho)
    mat = as_density(rho, tol=tol).matrix
    out = np.zeros_like(mat)
    for proj in obs.projectors:
        out += proj.matrix @ mat @ proj.matrix
    return DensityOperator.from_matrix(out, tol=tol)


def pp_nondegenerate(obs: Observable, psi: State, tol: Tolerances = DEFAULT_TOLERANCES) -> List[MeasurementRecord]:
    """One record per eigenvector e_k: probability |<psi, e_k>|^2, post-state e_k e_k^dagger."""
    _check_dims(obs.dim, psi)
    if not obs.is_nondegenerate:
        raise DegenerateSpectrum(f"Observable has eigenspace ranks {obs.ranks}; use the Lüders or refined channels")
    rho = as_density(psi, tol=tol).matrix
    records = []
    for k, (alpha, basis) in enumerate(zip(obs.eigenvalues, obs.eigenbases)):
        e_k = basis[0]
        prob = float(np.real(np.vdot(e_k, rho @ e_k)))
        post = DensityOperator.from_matrix(np.outer(e_k, e_k.conj()), tol=tol)
        records.append(MeasurementRecord(float(alpha), prob, post, Postulate.PP_NONDEGENERATE, k))
    return records


# --------------------------------------------------------------------------- #
# von Neumann refinement
# --------------------------------------------------------------------------- #

def build_refinement(obs: Observable, bases: Optional[Sequence] = None, gamma_strategy=None,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> RefinementObservable:
    """Choose an orthonormal basis {e_in} of every H_i and distinct gammas.

    `bases` may be None (use obs.eigenbases) or a per-block sequence whose
    entries are None (keep the default for that block) or an orthonormal basis.
    """
    strategy = gamma_strategy or DEFAULT_GAMMA_STRATEGY
    if bases is not None and len(bases) != len(obs):
        raise SpanMismatch(f"Got {len(bases)} refinement bases for {len(obs)} eigenspaces")

    chosen = []
    for i, default in enumerate(obs.eigenbases):
        supplied = None if bases is None else bases[i]
        if supplied is None:
            chosen.append(default)
            continue
        rows = supplied if isinstance(supplied, np.ndarray) and supplied.ndim == 2 else stack_vectors(supplied)
        rows = np.array(rows, dtype=complex)
        if rows.shape[1] != obs.dim:
            raise DimMismatch(f"Basis for block {i} has dim {rows.shape[1]}, expected {obs.dim}")
        err = gram_error(rows)
        if err > tol.norm:
            raise NotOrthonormal(f"Refinement basis for block {i} is not orthonormal (Gram deviation {err:.3e})")
        spanned = projector_onto(rows, tol=tol).matrix
        span_err = float(np.max(np.abs(spanned - obs.projectors[i].matrix)))
        if rows.shape[0] != obs.projectors[i].rank or span_err > tol.herm:
            raise SpanMismatch(f"Refinement basis for block {i} does not span the eigenspace (deviation {span_err:.3e})")
        chosen.append(rows)

    gammas = strategy.assign([rows.shape[0] for rows in chosen])
    flat = np.concatenate(gammas)
    if len(set(flat.tolist())) != flat.size:
        raise SpanMismatch(f"Gamma strategy '{getattr(strategy, 'name', strategy)}' produced repeated values")
    table = {float(g): float(obs.eigenvalues[i]) for i, block in enumerate(gammas) for g in block}
    logger.debug(f"Built refinement with {flat.size} outcomes over {len(obs)} blocks")
    return RefinementObservable(obs, tuple(chosen), tuple(np.asarray(g) for g in gammas), table)


def aligned_basis(obs: Observable, state: State, i: int, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Basis of H_i whose first vector is P_i psi / ||P_i psi|| (pure input) or the dominant
    eigenvector of P_i rho P_i (mixed input)."""
    obs.check_index(i)
    proj = obs.projectors[i].matrix
    if isinstance(state, StateVector):
        lead = proj @ state.amplitudes
    else:
        block = proj @ state.matrix @ proj
        values, vectors = np.linalg.eigh((block + block.conj().T) / 2)
        lead = vectors[:, -1]
    norm = np.linalg.norm(lead)
    if norm ** 2 <= tol.prob:
        return obs.eigenbases[i]
    return complete_orthonormal_basis([lead / norm], obs.eigenbases[i], tol=tol)


def random_block_basis(obs: Observable, i: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random orthonormal basis of H_i."""
    obs.check_index(i)
    u = haar_unitary(obs.projectors[i].rank, rng)
    return u @ obs.eigenbases[i]


def refined_probabilities(d: RefinementObservable, state: State, tol: Tolerances = DEFAULT_TOLERANCES) -> List[Tuple[Tuple[int, int], float, float]]:
    """[((i, n), gamma_in, P(D = gamma_in))]."""
    _check_dims(d.dim, state)
    rho = as_density(state, tol=tol).matrix
    out = []
    for i, (rows, gammas) in enumerate(zip(d.eigenvectors, d.gammas)):
        weights = _expectations(rows, rho)
        out.extend(((i, n), float(gammas[n]), float(w)) for n, w in enumerate(weights))
    return out


def vn_refined_nonselective(d: RefinementObservable, psi: State, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """sum_i sum_n |<psi, e_in>|^2 P_{e_in}."""
    _check_dims(d.dim, psi)
    rho = as_density(psi, tol=tol).matrix
    out = np.zeros_like(rho)
    for rows in d.eigenvectors:
        weights = _expectations(rows, rho)
        out += (rows.T * weights) @ rows.conj()
    return DensityOperator.from_matrix(out, tol=tol)


def vn_refined_selective(d: RefinementObservable, psi: State, i: int, tol: Tolerances = DEFAULT_TOLERANCES) -> MeasurementRecord:
    """Select alpha_i via D: normalized sum_n |<psi, e_in>|^2 P_{e_in}."""
    _check_dims(d.dim, psi)
    d.parent.check_index(i)
    rho = as_density(psi, tol=tol).matrix
    rows = d.eigenvectors[i]
    weights = _expectations(rows, rho)
    prob = float(np.sum(weights))
    if prob <= tol.prob:
        raise ZeroProbabilityOutcome(f"Outcome {d.parent.eigenvalues[i]} has probability {prob:.3e}")
    post = (rows.T * (weights / prob)) @ rows.conj()
    return MeasurementRecord(float(d.parent.eigenvalues[i]), prob, DensityOperator.from_matrix(post, tol=tol),
                             Postulate.VON_NEUMANN_REFINED, i)


def vn_refined_branch(d: RefinementObservable, psi: State, i: int, n: int, tol: Tolerances = DEFAULT_TOLERANCES) -> MeasurementRecord:
    """Full refined-outcome knowledge: D = gamma_in observed, post-state P_{e_in}."""
    _check_dims(d.dim, psi)
    d.parent.check_index(i)
    rows = d.eigenvectors[i]
    if not 0 <= n < rows.shape[0]:
        raise UnknownOutcome(f"Refined index {n} out of range for block {i} of rank {rows.shape[0]}")
    rho = as_density(psi, tol=tol).matrix
    e = rows[n]
    prob = float(np.real(np.vdot(e, rho @ e)))
    if prob <= tol.prob:
        raise ZeroProbabilityOutcome(f"Refined outcome ({i}, {n}) has probability {prob:.3e}")
    return MeasurementRecord(float(d.gammas[i][n]), prob, DensityOperator.from_matrix(np.outer(e, e.conj()), tol=tol),
                             Postulate.VON_NEUMANN_REFINED, i)


def bayes_check(d: RefinementObservable, psi: State, i: int, phi, tol: Tolerances = DEFAULT_TOLERANCES) -> BayesCheck:
    """Compare P(D = gamma_phi | rho_psi) with P(A = alpha_i | rho_psi) * P(D = gamma_phi | G_i).

    The left side is measured directly with a refinement whose block-i basis
    starts with phi; the right side first applies the A-measurement (Lüders
    state G_i) and then the same refinement.
    """
    obs = d.parent
    _check_dims(obs.dim, psi)
    obs.check_index(i)
    vec = phi.amplitudes if isinstance(phi, StateVector) else np.asarray(phi, dtype=complex).reshape(-1)
    if vec.shape[0] != obs.dim:
        raise DimMismatch(f"Probe has dim {vec.shape[0]}, expected {obs.dim}")
    norm = float(np.linalg.norm(vec))
    if norm <= tol.norm:
        raise NormError(f"Probe vector has norm {norm:.3e}")
    proj = obs.projectors[i].matrix
    if float(np.linalg.norm(proj @ vec - vec)) > tol.norm:
        raise NotInEigenspace(f"Probe vector is not in eigenspace {i}")
    vec = vec / norm

    bases = list(d.eigenvectors)
    bases[i] = complete_orthonormal_basis([vec], obs.eigenbases[i], tol=tol)
    probe_refinement = build_refinement(obs, bases, tol=tol)

    direct = refined_probabilities(probe_refinement, psi, tol=tol)
    lhs = next(p for (blk, n), _, p in direct if blk == i and n == 0)

    p_i = born_probabilities(obs, psi, tol=tol)[i][1]
    if p_i <= tol.prob:
        rhs = 0.0
    else:
        g_i = luders_selective(obs, psi, i, tol=tol).post_state
        after = refined_probabilities(probe_refinement, g_i, tol=tol)
        rhs = p_i * next(p for (blk, n), _, p in after if blk == i and n == 0)
    return BayesCheck(lhs, rhs, abs(lhs - rhs))
