"""
Projection Postulate Engine

RefinementChoiceMixin: protocol configuration and the refinement bases a
von Neumann measurement uses for each eigenspace of a local observable.

Local observables here have eigenspaces of the form span{v_k (x) r}, where v_k
is the measured subsystem's vector for outcome k and r runs over a basis of
the unmeasured rest. The refinement choices are:

  computational  r runs over the computational basis of the rest
  rotated        r runs over a fixed generic rotation of that basis
  aligned        the first vector of every block is the normalized P_k psi
  random         r runs over one Haar-random basis of the rest, shared by all blocks

This is a mixin for ProtocolRunner (see protocol_runner.py) and is not meant to
be instantiated on its own; it relies on `self.config`, `self.tol` and
`self.logger` provided by the composed class.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from errors import ConfigError
from hilbert import State
from measurement import Postulate, RefinementObservable, aligned_basis, build_refinement
from random_ensembles import haar_unitary, stream
from spectral import Observable, make_observable

# generic qubit rotation used by the "rotated" refinement
ROTATION_ANGLE = np.pi / 8
ROTATION_PHASE = np.pi / 5


class RefinementChoice(str, Enum):
    COMPUTATIONAL = "computational"
    ROTATED = "rotated"
    ALIGNED = "aligned"
    RANDOM = "random"


@dataclass(frozen=True)
class ProtocolConfig:
    postulate: Postulate = Postulate.LUDERS
    refinement: RefinementChoice = RefinementChoice.COMPUTATIONAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "postulate", Postulate(self.postulate))
        object.__setattr__(self, "refinement", RefinementChoice(self.refinement))
        if self.postulate == Postulate.PP_NONDEGENERATE:
            raise ConfigError("Protocols measure degenerate observables; use 'luders' or 'von_neumann_refined'")

    def with_changes(self, **changes) -> "ProtocolConfig":
        return replace(self, **changes)

    @property
    def label(self) -> str:
        if self.postulate == Postulate.LUDERS:
            return "luders"
        return f"vn/{self.refinement.value}"


def rotated_qubit_rows() -> np.ndarray:
    c, s = np.cos(ROTATION_ANGLE), np.sin(ROTATION_ANGLE)
    phase = np.exp(1j * ROTATION_PHASE)
    return np.array([[c, phase * s], [-np.conj(phase) * s, c]], dtype=complex)


def rest_basis_rows(n_qubits: int, rotated: bool) -> np.ndarray:
    """Computational (or rotated) basis of n qubits, as rows."""
    rows = np.eye(1, dtype=complex)
    single = rotated_qubit_rows() if rotated else np.eye(2, dtype=complex)
    for _ in range(n_qubits):
        rows = np.kron(rows, single)
    return rows


def product_block(local_vector: np.ndarray, rest_rows: np.ndarray) -> np.ndarray:
    """Rows local_vector (x) r for every row r."""
    return np.array([np.kron(local_vector, r) for r in rest_rows], dtype=complex)


def local_measurement(eigenvalues: Sequence[float], local_vectors: Sequence[np.ndarray], rest_qubits: int) -> Observable:
    """sum_k eigenvalue_k |v_k><v_k| (x) I_rest, with product eigenbases."""
    rest = rest_basis_rows(rest_qubits, rotated=False)
    return make_observable(list(eigenvalues), [product_block(v, rest) for v in local_vectors])


class RefinementChoiceMixin:

    def _refinement_for(self, obs: Observable, state: State, local_vectors: Sequence[np.ndarray],
                        rest_qubits: int, stream_key: int,
                        config: Optional[ProtocolConfig] = None) -> RefinementObservable:
        """Refinement of a local observable according to config.refinement (default self.config)."""
        config = config or self.config
        choice = config.refinement
        bases: List[Optional[np.ndarray]]
        if choice == RefinementChoice.COMPUTATIONAL:
            bases = [product_block(v, rest_basis_rows(rest_qubits, rotated=False)) for v in local_vectors]
        elif choice == RefinementChoice.ROTATED:
            bases = [product_block(v, rest_basis_rows(rest_qubits, rotated=True)) for v in local_vectors]
        elif choice == RefinementChoice.ALIGNED:
            bases = [aligned_basis(obs, state, k, tol=self.tol) for k in range(len(obs))]
        elif choice == RefinementChoice.RANDOM:
            rest = haar_unitary(2 ** rest_qubits, stream(config.seed, stream_key))
            bases = [product_block(v, rest) for v in local_vectors]
        else:
            raise ConfigError(f"Unknown refinement choice {choice!r}")
        self.logger.debug(f"Using {choice.value} refinement for a {obs.dim}-dim local observable")
        return build_refinement(obs, bases, tol=self.tol)
