"""
Projection Postulate Engine

Seeded random states, unitaries and observables with planted degeneracies.
Every generator takes an explicit numpy Generator; callers derive streams with
`stream(seed, *keys)` so results do not depend on evaluation order.
"""

from typing import List, Sequence

import numpy as np

from hilbert import StateVector
from spectral import Observable, spectral_decompose
from tolerances import DEFAULT_TOLERANCES, Tolerances


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, key_1, key_2, ...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys)))


def haar_state(dim: int, rng: np.random.Generator) -> StateVector:
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector.normalized(vec)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with the phase correction on R's diagonal."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_partition(dim: int, max_rank: int, rng: np.random.Generator) -> List[int]:
    """Block ranks in [1, max_rank] summing to dim."""
    ranks = []
    remaining = dim
    while remaining > 0:
        r = int(rng.integers(1, min(max_rank, remaining) + 1))
        ranks.append(r)
        remaining -= r
    return ranks


def planted_observable(ranks: Sequence[int], rng: np.random.Generator,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> Observable:
    """U diag(...) U^dagger with exactly repeated integer eigenvalues, decomposed back into an Observable."""
    dim = int(sum(ranks))
    offset = int(rng.integers(-3, 4))
    diagonal = np.concatenate([np.full(r, float(offset + 2 * k)) for k, r in enumerate(ranks)])
    u = haar_unitary(dim, rng)
    return spectral_decompose(u @ np.diag(diagonal) @ u.conj().T, tol=tol)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2
