"""
Projection Postulate Engine

OneWayMixin: single-qubit rotations driven by adaptive measurements on a
linear cluster state.

A cluster of n qubits (3 to 5) is prepared as |+>^n followed by controlled-Z
on every neighbouring pair. Qubits 0 .. n-2 are measured in turn in the basis
{(|0> +/- e^{i theta}|1>)/sqrt(2)}; outcome s of a measurement at angle theta
applies X^s H Rz(-theta) to the logical qubit, with Rz(t) = diag(1, e^{it}).

Byproducts are tracked as a pair (x, z) meaning the logical state carries
X^x Z^z. A measurement angle is flipped to (-1)^x theta before use, after which
(x, z) becomes (s xor z, x). The output qubit is corrected by Z^z X^x.

Each measurement is an observable on all remaining qubits with two
eigenspaces of rank 2^(remaining-1), handled by the configured postulate.
Measured qubits are traced out after each step.

This is a mixin for ProtocolRunner (see protocol_runner.py) and is not meant to
be instantiated on its own.
"""

from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError
from hilbert import (
    CZ, HADAMARD, KET_PLUS, PAULI_X, PAULI_Z, DensityOperator, StateVector,
    fidelity, partial_trace, phase_gate, pure_to_density,
)
from measurement import Postulate, born_probabilities, luders_selective, vn_refined_selective
from protocols.refinement_choice import ProtocolConfig, local_measurement
from random_ensembles import stream

MIN_CLUSTER = 3
MAX_CLUSTER = 5

BRANCH_STREAM = 2
REFINEMENT_STREAM_BASE = 16


@dataclass(frozen=True, eq=False)
class ClusterRun:
    cluster_size: int
    angles: Tuple[float, ...]
    adapted_angles: Tuple[float, ...]
    branch: Tuple[int, ...]
    byproduct: Tuple[int, int]
    probability: float
    output_state: DensityOperator
    target_unitary: np.ndarray
    target_state: StateVector
    fidelity: float
    config: ProtocolConfig

    @property
    def byproduct_record(self) -> str:
        return "".join(str(s) for s in self.branch)


def measurement_vectors(theta: float) -> Tuple[np.ndarray, np.ndarray]:
    """(|0> + e^{i theta}|1>)/sqrt(2) and (|0> - e^{i theta}|1>)/sqrt(2)."""
    phase = np.exp(1j * theta)
    return (np.array([1.0, phase], dtype=complex) / np.sqrt(2),
            np.array([1.0, -phase], dtype=complex) / np.sqrt(2))


def cluster_state(n: int) -> StateVector:
    """Linear cluster |+>^n with CZ between neighbours."""
    amps = np.ones(1, dtype=complex)
    for _ in range(n):
        amps = np.kron(amps, KET_PLUS.amplitudes)
    for j in range(n - 1):
        gate = np.kron(np.kron(np.eye(2 ** j), CZ), np.eye(2 ** (n - j - 2)))
        amps = gate @ amps
    return StateVector.from_amplitudes(amps)


def target_unitary(angles: Sequence[float]) -> np.ndarray:
    """H Rz(-theta_last) ... H Rz(-theta_0)."""
    u = np.eye(2, dtype=complex)
    for theta in angles:
        u = HADAMARD @ phase_gate(-theta) @ u
    return u


def _normalize_angles(angles: Union[float, Sequence[float]], cluster_size: Optional[int]) -> Tuple[float, ...]:
    if np.isscalar(angles):
        size = MIN_CLUSTER if cluster_size is None else cluster_size
        # beta on the first qubit, X-basis measurements on the rest
        angles = (float(angles),) + (0.0,) * (size - 2)
    angles = tuple(float(a) for a in angles)
    size = len(angles) + 1
    if cluster_size is not None and cluster_size != size:
        raise ConfigError(f"{len(angles)} angles do not fit a cluster of {cluster_size} qubits")
    if not MIN_CLUSTER <= size <= MAX_CLUSTER:
        raise ConfigError(f"Cluster size must be between {MIN_CLUSTER} and {MAX_CLUSTER}, got {size}")
    return angles


class OneWayMixin:

    def one_way_rotation(self, angles: Union[float, Sequence[float]], config: Optional[ProtocolConfig] = None,
                         branch: Optional[Sequence[int]] = None, cluster_size: Optional[int] = None) -> ClusterRun:
        """Run the measurement pattern; outcomes are sampled from the seed unless `branch` fixes them."""
        config = config or self.config
        angles = _normalize_angles(angles, cluster_size)
        if branch is not None:
            branch = tuple(int(s) for s in branch)
            if len(branch) != len(angles) or any(s not in (0, 1) for s in branch):
                raise ConfigError(f"Branch {branch} must hold one bit per measured qubit ({len(angles)})")
        return self._one_way(config, angles, branch)

    def _one_way(self, config: ProtocolConfig, angles: Tuple[float, ...], branch: Optional[Tuple[int, ...]]) -> ClusterRun:
        n = len(angles) + 1
        state = pure_to_density(cluster_state(n), tol=self.tol)
        rng = stream(config.seed, BRANCH_STREAM)

        x, z = 0, 0
        probability = 1.0
        adapted: List[float] = []
        outcomes: List[int] = []
        for j, theta in enumerate(angles):
            remaining = n - j
            theta_j = -theta if x else theta
            vectors = measurement_vectors(theta_j)
            obs = local_measurement((0.0, 1.0), vectors, rest_qubits=remaining - 1)

            if branch is None:
                probs = np.array([p for _, p in born_probabilities(obs, state, tol=self.tol)])
                s = int(rng.choice(2, p=probs / probs.sum()))
            else:
                s = branch[j]

            if config.postulate == Postulate.LUDERS:
                record = luders_selective(obs, state, s, tol=self.tol)
            elif config.postulate == Postulate.VON_NEUMANN_REFINED:
                d = self._refinement_for(obs, state, vectors, rest_qubits=remaining - 1,
                                         stream_key=REFINEMENT_STREAM_BASE + j, config=config)
                record = vn_refined_selective(d, state, s, tol=self.tol)
            else:
                raise ConfigError(f"Unsupported postulate {config.postulate.value!r} for one-way computation")

            probability *= record.probability
            state = partial_trace(record.post_state, (2, 2 ** (remaining - 1)), keep=1, tol=self.tol)
            x, z = s ^ z, x
            adapted.append(theta_j)
            outcomes.append(s)

        correction = np.linalg.matrix_power(PAULI_Z, z) @ np.linalg.matrix_power(PAULI_X, x)
        output = DensityOperator.from_matrix(correction @ state.matrix @ correction.conj().T, tol=self.tol)
        u = target_unitary(angles)
        target = StateVector.normalized(u @ KET_PLUS.amplitudes)
        run = ClusterRun(
            cluster_size=n,
            angles=angles,
            adapted_angles=tuple(adapted),
            branch=tuple(outcomes),
            byproduct=(x, z),
            probability=probability,
            output_state=output,
            target_unitary=u,
            target_state=target,
            fidelity=fidelity(target, output),
            config=config,
        )
        self.logger.debug(
            f"One-way [{config.label}] angles {angles} branch {run.byproduct_record}: fidelity={run.fidelity:.12f}"
        )
        return run

    def one_way_all_branches(self, angles: Union[float, Sequence[float]], config: Optional[ProtocolConfig] = None,
                             cluster_size: Optional[int] = None) -> List[ClusterRun]:
        n_measured = len(_normalize_angles(angles, cluster_size))
        return [self.one_way_rotation(angles, config=config, branch=bits, cluster_size=cluster_size)
                for bits in product((0, 1), repeat=n_measured)]
