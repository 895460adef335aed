"""
Projection Postulate Engine

Spectral decomposition of Hermitian operators with explicit grouping of
near-equal eigenvalues into degenerate eigenspaces.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from errors import DimMismatch, DuplicateEigenvalue, GroupingAmbiguous, NotHermitian, NotOrthonormal, SpanMismatch, UnknownOutcome
from hilbert import Projector, gram_error, projector_onto, stack_vectors
from tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Observable:
    """A = sum_i alpha_i P_i with distinct ascending alpha_i.

    eigenbases[i] holds an orthonormal basis of H_i as rows.
    """

    eigenvalues: np.ndarray
    projectors: Tuple[Projector, ...]
    eigenbases: Tuple[np.ndarray, ...]
    dim: int

    @property
    def ranks(self) -> List[int]:
        return [p.rank for p in self.projectors]

    @property
    def is_nondegenerate(self) -> bool:
        return all(r == 1 for r in self.ranks)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for alpha, proj in zip(self.eigenvalues, self.projectors):
            out += alpha * proj.matrix
        return out

    def outcome_index(self, value: float, tol: Tolerances = DEFAULT_TOLERANCES) -> int:
        """Position of `value` in the ascending eigenvalue list."""
        hits = np.flatnonzero(np.abs(self.eigenvalues - value) <= tol.eig)
        if hits.size == 0:
            raise UnknownOutcome(f"{value} is not an eigenvalue of this observable")
        return int(hits[0])

    def check_index(self, i: int) -> None:
        if not 0 <= i < len(self.eigenvalues):
            raise UnknownOutcome(f"Outcome index {i} out of range (observable has {len(self.eigenvalues)} outcomes)")


def _group_boundaries(values: np.ndarray, tol_eig: float) -> List[List[int]]:
    """Consecutive-gap grouping of ascending values. Gaps in (tol_eig, 2*tol_eig) are ambiguous."""
    groups = [[0]]
    for k, gap in enumerate(np.diff(values), start=1):
        if gap <= tol_eig:
            groups[-1].append(k)
        elif gap < 2 * tol_eig:
            raise GroupingAmbiguous(
                f"Eigenvalue gap {gap:.3e} between {values[k - 1]!r} and {values[k]!r} "
                f"lies inside the ambiguity band ({tol_eig:.1e}, {2 * tol_eig:.1e})"
            )
        else:
            groups.append([k])
    return groups


def spectral_decompose(matrix, tol_eig: float = None, tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
    """Decompose a Hermitian matrix, merging eigenvalues closer than tol_eig into one eigenspace."""
    tol_eig = tol.eig if tol_eig is None else tol_eig
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise DimMismatch(f"Expected a nonempty square matrix, got shape {mat.shape}")
    herm_err = float(np.max(np.abs(mat - mat.conj().T)))
    if herm_err > tol.herm:
        raise NotHermitian(f"Matrix is not Hermitian (max deviation {herm_err:.3e})")
    mat = (mat + mat.conj().T) / 2

    values, vectors = np.linalg.eigh(mat)
    groups = _group_boundaries(values, tol_eig)

    eigenvalues = []
    eigenbases = []
    projectors = []
    for group in groups:
        eigenvalues.append(float(np.mean(values[group])))
        # eigh does not promise orthonormality inside a degenerate cluster
        q, _ = np.linalg.qr(vectors[:, group])
        rows = q.T.copy()
        eigenbases.append(rows)
        projectors.append(projector_onto(rows, tol=tol))

    obs = Observable(np.array(eigenvalues), tuple(projectors), tuple(eigenbases), mat.shape[0])
    recon_err = float(np.max(np.abs(obs.matrix() - mat)))
    if recon_err > tol.recon:
        logger.warning(f"Spectral reconstruction error {recon_err:.3e} exceeds {tol.recon:.1e}")
    logger.debug(f"Decomposed dim-{obs.dim} operator into {len(obs)} eigenspaces with ranks {obs.ranks}")
    return obs


def make_observable(eigenvalues: Sequence[float], eigenbases: Sequence, tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
    """Build an Observable from distinct eigenvalues and jointly orthonormal eigenbases."""
    values = np.asarray(eigenvalues, dtype=float).reshape(-1)
    if values.size == 0 or values.size != len(eigenbases):
        raise DimMismatch("Need one eigenbasis per eigenvalue")
    bases = [b if isinstance(b, np.ndarray) and b.ndim == 2 else stack_vectors(b) for b in eigenbases]
    dims = {b.shape[1] for b in bases}
    if len(dims) != 1:
        raise DimMismatch("Eigenbases live in spaces of different dimension")
    dim = dims.pop()

    order = np.argsort(values, kind="stable")
    values = values[order]
    bases = [bases[k] for k in order]
    gaps = np.diff(values)
    if gaps.size and float(np.min(gaps)) <= tol.eig:
        raise DuplicateEigenvalue(f"Eigenvalues are not distinct: {list(values)}")

    joint = np.vstack(bases)
    err = gram_error(joint)
    if err > tol.norm:
        raise NotOrthonormal(f"Eigenbases are not jointly orthonormal (Gram deviation {err:.3e})")
    if joint.shape[0] != dim:
        raise SpanMismatch(f"Eigenbases span {joint.shape[0]} of {dim} dimensions")

    projectors = tuple(projector_onto(b, tol=tol) for b in bases)
    return Observable(values, projectors, tuple(np.array(b) for b in bases), dim)


def function_of(obs: Observable, f: Callable[[float], float], tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
    """f(A) = sum_i f(alpha_i) P_i; eigenspaces whose images collide are merged."""
    images = [float(f(alpha)) for alpha in obs.eigenvalues]
    order = np.argsort(images, kind="stable")

    merged_values: List[float] = []
    merged_bases: List[List[np.ndarray]] = []
    for k in order:
        value = images[k]
        if merged_values and abs(value - merged_values[-1]) <= tol.eig:
            merged_bases[-1].append(obs.eigenbases[k])
        else:
            merged_values.append(value)
            merged_bases.append([obs.eigenbases[k]])
    bases = [np.vstack(parts) for parts in merged_bases]
    return make_observable(merged_values, bases, tol=tol)


def local_observable(single_site, site: int, site_dims: Sequence[int], tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
    """I (x) ... (x) A (x) ... (x) I with A acting on factor `site`.

    Any such operator on a composite space has a degenerate spectrum.
    """
    site_dims = list(site_dims)
    if not 0 <= site < len(site_dims):
        raise DimMismatch(f"Site {site} out of range for {len(site_dims)} factors")
    local = np.asarray(single_site, dtype=complex)
    if local.shape != (site_dims[site], site_dims[site]):
        raise DimMismatch(f"Local operator shape {local.shape} does not match site dim {site_dims[site]}")
    full = np.eye(1, dtype=complex)
    for k, d in enumerate(site_dims):
        full = np.kron(full, local if k == site else np.eye(d, dtype=complex))
    return spectral_decompose(full, tol=tol)
