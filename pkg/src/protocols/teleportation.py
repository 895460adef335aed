"""
Projection Postulate Engine

TeleportationMixin: one-qubit teleportation with Alice's Bell measurement
modelled as a degenerate observable on the full three-qubit space.

Alice holds qubits 0 (the unknown input) and 1, Bob holds qubit 2. Her
observable is A = sum_k k * (B_k (x) I) with B_k the Bell projectors in the
order (Phi+, Psi+, Phi-, Psi-); every eigenspace has rank 2. Bob applies the
Pauli correction for the announced k.

Under the refined postulate Alice learns only k, so Bob's state is the
k-block of the refined mixture. The refined-branch view additionally reports
what Bob would hold if the refined outcome (k, n) were announced.

This is a mixin for ProtocolRunner (see protocol_runner.py) and is not meant to
be instantiated on its own.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from errors import ConfigError, DimMismatch
from hilbert import (
    I2, PAULI_X, PAULI_Z, DensityOperator, StateVector, bell_states, fidelity, partial_trace, tensor,
)
from measurement import (
    Postulate, born_probabilities, luders_nonselective, luders_selective, refined_probabilities,
    vn_refined_branch, vn_refined_nonselective, vn_refined_selective,
)
from protocols.refinement_choice import ProtocolConfig, RefinementChoice, local_measurement
from random_ensembles import stream
from spectral import Observable

# correction U_k for Bell outcome k; Z X means X is applied first
BELL_CORRECTIONS = (I2, PAULI_X, PAULI_Z, PAULI_Z @ PAULI_X)
BELL_EIGENVALUES = (0.0, 1.0, 2.0, 3.0)
QUBIT_DIMS = (2, 2, 2)
BOB = 2

# stream keys under ProtocolConfig.seed
OUTCOME_STREAM = 0
REFINEMENT_STREAM = 1


@dataclass(frozen=True, eq=False)
class RefinedBranch:
    refined_index: int
    probability: float
    bob_state: DensityOperator
    fidelity: float


@dataclass(frozen=True, eq=False)
class TeleportationRun:
    input_state: StateVector
    config: ProtocolConfig
    outcome: int
    probability: float
    bob_state: DensityOperator
    fidelity: float
    bob_marginal: DensityOperator
    refined_branches: List[RefinedBranch] = field(default_factory=list)

    @property
    def postulate(self) -> Postulate:
        return self.config.postulate


@dataclass(frozen=True)
class SweepRow:
    basis_id: int
    refinement: str
    outcome: int
    fidelity: float


@dataclass(frozen=True)
class SweepResult:
    seed: int
    rows: List[SweepRow]

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([row.fidelity for row in self.rows])

    @property
    def min_fidelity(self) -> float:
        return float(np.min(self.fidelities))

    @property
    def max_fidelity(self) -> float:
        return float(np.max(self.fidelities))

    @property
    def spread(self) -> float:
        return self.max_fidelity - self.min_fidelity

    def rows_for(self, basis_id: int) -> List[SweepRow]:
        return [row for row in self.rows if row.basis_id == basis_id]


def _correct(bob: DensityOperator, k: int, tol) -> DensityOperator:
    u = BELL_CORRECTIONS[k]
    return DensityOperator.from_matrix(u @ bob.matrix @ u.conj().T, tol=tol)


class TeleportationMixin:

    def alice_observable(self) -> Observable:
        """Bell measurement on qubits (0, 1), identity on Bob's qubit."""
        if getattr(self, "_alice_observable", None) is None:
            bells = [b.amplitudes for b in bell_states()]
            self._alice_observable = local_measurement(BELL_EIGENVALUES, bells, rest_qubits=1)
        return self._alice_observable

    def teleport(self, psi_in: StateVector, config: Optional[ProtocolConfig] = None,
                 outcome: Optional[int] = None) -> TeleportationRun:
        """Teleport psi_in; the Bell outcome is sampled from the seed unless given."""
        config = config or self.config
        if psi_in.dim != 2:
            raise DimMismatch(f"Teleportation input must be one qubit, got dim {psi_in.dim}")
        return self._teleport(config, psi_in, outcome)

    def _teleport(self, config: ProtocolConfig, psi_in: StateVector, outcome: Optional[int]) -> TeleportationRun:
        obs = self.alice_observable()
        total = tensor(psi_in, bell_states()[0])
        probs = np.array([p for _, p in born_probabilities(obs, total, tol=self.tol)])
        if outcome is None:
            rng = stream(config.seed, OUTCOME_STREAM)
            outcome = int(rng.choice(len(probs), p=probs / probs.sum()))
        obs.check_index(outcome)

        branches: List[RefinedBranch] = []
        if config.postulate == Postulate.LUDERS:
            record = luders_selective(obs, total, outcome, tol=self.tol)
            averaged = luders_nonselective(obs, total, tol=self.tol)
        elif config.postulate == Postulate.VON_NEUMANN_REFINED:
            bells = [b.amplitudes for b in bell_states()]
            d = self._refinement_for(obs, total, bells, rest_qubits=1, stream_key=REFINEMENT_STREAM,
                                     config=config)
            record = vn_refined_selective(d, total, outcome, tol=self.tol)
            averaged = vn_refined_nonselective(d, total, tol=self.tol)
            for (i, n), _, weight in refined_probabilities(d, total, tol=self.tol):
                if i != outcome or weight <= self.tol.prob:
                    continue
                post = vn_refined_branch(d, total, i, n, tol=self.tol).post_state
                bob = _correct(partial_trace(post, QUBIT_DIMS, BOB, tol=self.tol), outcome, self.tol)
                branches.append(RefinedBranch(n, weight, bob, fidelity(psi_in, bob)))
        else:
            raise ConfigError(f"Unsupported postulate {config.postulate.value!r} for teleportation")

        bob = _correct(partial_trace(record.post_state, QUBIT_DIMS, BOB, tol=self.tol), outcome, self.tol)
        run = TeleportationRun(
            input_state=psi_in,
            config=config,
            outcome=outcome,
            probability=record.probability,
            bob_state=bob,
            fidelity=fidelity(psi_in, bob),
            bob_marginal=partial_trace(averaged, QUBIT_DIMS, BOB, tol=self.tol),
            refined_branches=branches,
        )
        self.logger.debug(f"Teleport [{config.label}] outcome {outcome}: p={run.probability:.6f} fidelity={run.fidelity:.12f}")
        return run

    def teleport_all_outcomes(self, psi_in: StateVector, config: Optional[ProtocolConfig] = None) -> List[TeleportationRun]:
        return [self.teleport(psi_in, config=config, outcome=k) for k in range(len(BELL_EIGENVALUES))]

    def refinement_sweep(self, psi_in: StateVector, n_bases: int, seed: int = 0) -> SweepResult:
        """Teleport every outcome under n_bases refinements.

        Basis 0 is the aligned refinement; bases 1.. pair every Bell vector with a
        Haar-random basis of Bob's qubit, each drawn from its own (seed, basis id) stream.
        """
        if n_bases < 1:
            raise ConfigError(f"n_bases must be at least 1, got {n_bases}")
        rows: List[SweepRow] = []
        for basis_id in range(n_bases):
            if basis_id == 0:
                config = ProtocolConfig(Postulate.VON_NEUMANN_REFINED, RefinementChoice.ALIGNED, seed)
            else:
                basis_seed = int(stream(seed, basis_id).integers(0, 2 ** 63 - 1))
                config = ProtocolConfig(Postulate.VON_NEUMANN_REFINED, RefinementChoice.RANDOM, basis_seed)
            for run in self.teleport_all_outcomes(psi_in, config=config):
                rows.append(SweepRow(basis_id, config.refinement.value, run.outcome, run.fidelity))
        result = SweepResult(seed, rows)
        self.logger.info(
            f"Refinement sweep over {n_bases} bases: fidelity in [{result.min_fidelity:.6f}, {result.max_fidelity:.6f}]"
        )
        return result
