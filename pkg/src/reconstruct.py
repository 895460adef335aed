"""
Projection Postulate Engine

Rebuilds the post-measurement block operators g_m from refinement statistics
alone and compares them with the Lüders prediction P_m psi (x) P_m psi.

The only input is a quadratic-form oracle q(phi) = <phi, g_m phi>, which a
refinement measurement provides for any unit phi in H_m: it is the
probability of the refined outcome whose eigenvector is phi. Diagonal entries
come from the basis vectors themselves, off-diagonal entries from the
polarization probes

    (e_n + e_j)/sqrt2  ->  q = (g_nn + g_jj)/2 + Re g_nj
    (e_n + i e_j)/sqrt2 ->  q = (g_nn + g_jj)/2 - Im g_nj

with g_nj = <e_n, g e_j> (conjugate-linear in the first slot). Worked 2x2
example: block coordinates (a, b) = (1/sqrt2, i/sqrt2) give g_01 = a conj(b)
= -i/2; the i-probe has q = |(a - i b)/sqrt2|^2 = 1 and (g_00 + g_11)/2 = 1/2,
so Im g_01 = 1/2 - 1 = -1/2 as required.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from errors import BlockMissing, ConfigError, NotOrthonormal, OracleRangeError
from hilbert import DensityOperator, State, as_density, complete_orthonormal_basis, gram_error, stack_vectors
from measurement import born_probabilities, build_refinement, refined_probabilities
from random_ensembles import stream
from spectral import Observable
from tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


class OracleMode(str, Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


# --------------------------------------------------------------------------- #
# Oracles
# --------------------------------------------------------------------------- #

class QuadraticFormOracle:
    """phi -> <phi, g_m phi> for unit phi in H_m.

    `evaluate` takes the call index so sampled oracles can derive their random
    stream from it; the result never depends on evaluation order.
    """

    mode: OracleMode = OracleMode.EXACT
    shots_per_call: int = 0

    def __init__(self):
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def evaluate(self, phi: np.ndarray, call_index: int) -> float:
        with self._lock:
            self._calls += 1
        return self._quadratic_form(np.asarray(phi, dtype=complex), call_index)

    def _quadratic_form(self, phi: np.ndarray, call_index: int) -> float:
        raise NotImplementedError


class ExactOracle(QuadraticFormOracle):
    """q(phi) = <phi, rho phi>, i.e. |<psi, phi>|^2 for a pure state."""

    mode = OracleMode.EXACT

    def __init__(self, state: State, tol: Tolerances = DEFAULT_TOLERANCES):
        super().__init__()
        self.rho = as_density(state, tol=tol).matrix

    def _quadratic_form(self, phi: np.ndarray, call_index: int) -> float:
        return float(np.real(np.vdot(phi, self.rho @ phi)))


class SampledOracle(QuadraticFormOracle):
    """Frequency of the refined outcome phi over `shots` simulated refinement measurements.

    Each call builds a refinement whose block-m eigenbasis starts with phi
    (completed with seeded fill vectors) and samples the full refined outcome
    distribution with the stream (seed, block_index, call_index).
    """

    mode = OracleMode.SAMPLED

    def __init__(self, state: State, obs: Observable, block_index: int, shots: int, seed: int = 0,
                 tol: Tolerances = DEFAULT_TOLERANCES):
        super().__init__()
        if shots < 1:
            raise ConfigError(f"Sampled oracle needs shots >= 1, got {shots}")
        self.state = state
        self.obs = obs
        self.block_index = block_index
        self.shots_per_call = int(shots)
        self.seed = int(seed)
        self.tol = tol

    def _quadratic_form(self, phi: np.ndarray, call_index: int) -> float:
        rng = stream(self.seed, self.block_index, call_index)
        bases: List[Optional[np.ndarray]] = [None] * len(self.obs)
        bases[self.block_index] = complete_orthonormal_basis([phi], self.obs.eigenbases[self.block_index], rng=rng, tol=self.tol)
        refinement = build_refinement(self.obs, bases, tol=self.tol)
        table = refined_probabilities(refinement, self.state, tol=self.tol)
        probs = np.clip(np.array([p for _, _, p in table]), 0.0, None)
        probs = probs / probs.sum()
        counts = rng.multinomial(self.shots_per_call, probs)
        target = next(k for k, ((i, n), _, _) in enumerate(table) if i == self.block_index and n == 0)
        return counts[target] / self.shots_per_call


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    block_index: int
    outcome: float
    probability: float
    reconstructed: np.ndarray
    reference: np.ndarray
    max_abs_error: float
    frobenius_error: float
    shots_used: int
    oracle_calls: int
    mode: OracleMode
    off_block: float
    second_eigenvalue: float

    def normalized(self) -> np.ndarray:
        """G_m = g_m / p_m."""
        return self.reconstructed / self.probability


class ConstraintResiduals(NamedTuple):
    in_block: float
    out_of_block: float


class ConvergenceResult(NamedTuple):
    shots: List[int]
    errors: List[float]
    slope: float
    intercept: float


# --------------------------------------------------------------------------- #
# Block support and reconstruction
# --------------------------------------------------------------------------- #

def complement_rows(obs: Observable, m: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of H_m, as rows."""
    others = [b for k, b in enumerate(obs.eigenbases) if k != m]
    if not others:
        return np.zeros((0, obs.dim), dtype=complex)
    return np.vstack(others)


def block_support_check(g, basis_m, complement, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """max |<w, g v>| over basis pairs with at least one vector in the complement.

    Zero means g maps H into H_m and vanishes on the complement.
    """
    rows_m = np.asarray(basis_m, dtype=complex) if isinstance(basis_m, np.ndarray) else stack_vectors(basis_m)
    comp = np.asarray(complement, dtype=complex) if isinstance(complement, np.ndarray) else (
        stack_vectors(complement) if len(complement) else np.zeros((0, rows_m.shape[1]), dtype=complex))
    if comp.shape[0] == 0:
        return 0.0
    joint = np.vstack([rows_m, comp])
    err = gram_error(joint)
    if err > tol.norm:
        raise NotOrthonormal(f"Block and complement bases are not jointly orthonormal (Gram deviation {err:.3e})")
    elements = joint.conj() @ np.asarray(g, dtype=complex) @ joint.T
    mask = np.ones(elements.shape, dtype=bool)
    k = rows_m.shape[0]
    mask[:k, :k] = False
    return float(np.max(np.abs(elements[mask])))


def _polarization_probes(rows: np.ndarray) -> List[Tuple[str, int, int, np.ndarray]]:
    d = rows.shape[0]
    probes = [("diag", n, n, rows[n]) for n in range(d)]
    for n in range(d):
        for j in range(n + 1, d):
            probes.append(("re", n, j, (rows[n] + rows[j]) / SQRT2))
            probes.append(("im", n, j, (rows[n] + 1j * rows[j]) / SQRT2))
    return probes


def reconstruct_block(oracle: QuadraticFormOracle, basis_m, max_workers: Optional[int] = None,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Block matrix g[n, j] = <e_n, g_m e_j> in the given basis of H_m, from d_m^2 oracle calls."""
    rows = np.asarray(basis_m, dtype=complex) if isinstance(basis_m, np.ndarray) else stack_vectors(basis_m)
    probes = _polarization_probes(rows)

    def _run(indexed):
        k, probe = indexed
        return oracle.evaluate(probe[3], k)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(_run, enumerate(probes)))
    else:
        values = [_run(item) for item in enumerate(probes)]

    if oracle.mode == OracleMode.EXACT:
        for (kind, n, j, _), q in zip(probes, values):
            if not -tol.norm <= q <= 1.0 + tol.norm:
                raise OracleRangeError(f"Oracle returned {q!r} for probe {kind}({n}, {j})")

    d = rows.shape[0]
    g = np.zeros((d, d), dtype=complex)
    for (kind, n, _, _), q in zip(probes, values):
        if kind == "diag":
            g[n, n] = q
    for (kind, n, j, _), q in zip(probes, values):
        mean_diag = (g[n, n].real + g[j, j].real) / 2
        if kind == "re":
            g[n, j] += q - mean_diag
        elif kind == "im":
            g[n, j] += 1j * (mean_diag - q)
    for n in range(d):
        for j in range(n + 1, d):
            g[j, n] = np.conj(g[n, j])
    if oracle.mode == OracleMode.SAMPLED:
        g = (g + g.conj().T) / 2
    return g


def embed_block(block: np.ndarray, basis_m: np.ndarray) -> np.ndarray:
    """sum_nj block[n, j] |e_n><e_j| in the full space."""
    rows = np.asarray(basis_m, dtype=complex)
    return rows.T @ block @ rows.conj()


def verify_theorem(psi: State, obs: Observable, mode: OracleMode = OracleMode.EXACT, shots: Optional[int] = None,
                   seed: int = 0, max_workers: Optional[int] = None,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> List[ReconstructionReport]:
    """Reconstruct every block with p_m > tol.prob and compare with P_m rho P_m."""
    mode = OracleMode(mode)
    if mode == OracleMode.SAMPLED and (shots is None or shots < 1):
        raise ConfigError("SAMPLED mode needs shots >= 1")
    rho = as_density(psi, tol=tol).matrix
    reports = []
    for m, (alpha, p_m) in enumerate(born_probabilities(obs, psi, tol=tol)):
        if p_m <= tol.prob:
            logger.debug(f"Skipping block {m} (alpha={alpha}): probability {p_m:.3e}")
            continue
        if mode == OracleMode.EXACT:
            oracle = ExactOracle(psi, tol=tol)
        else:
            oracle = SampledOracle(psi, obs, m, shots, seed=seed, tol=tol)
        basis = obs.eigenbases[m]
        block = reconstruct_block(oracle, basis, max_workers=max_workers, tol=tol)
        full = embed_block(block, basis)

        proj = obs.projectors[m].matrix
        reference = proj @ rho @ proj
        diff = full - reference
        eigs = np.sort(np.linalg.eigvalsh(block))[::-1]
        report = ReconstructionReport(
            block_index=m,
            outcome=float(alpha),
            probability=p_m,
            reconstructed=full,
            reference=reference,
            max_abs_error=float(np.max(np.abs(diff))),
            frobenius_error=float(np.linalg.norm(diff)),
            shots_used=oracle.calls * oracle.shots_per_call,
            oracle_calls=oracle.calls,
            mode=mode,
            off_block=block_support_check(full, basis, complement_rows(obs, m), tol=tol),
            second_eigenvalue=float(eigs[1]) if eigs.size > 1 else 0.0,
        )
        logger.debug(f"Block {m}: rank {basis.shape[0]}, p={p_m:.6f}, max error {report.max_abs_error:.3e}")
        reports.append(report)
    return reports


def _nearest_density(matrix: np.ndarray, tol: Tolerances) -> DensityOperator:
    """Hermitize, clip negative eigenvalues, renormalize."""
    herm = (matrix + matrix.conj().T) / 2
    values, vectors = np.linalg.eigh(herm)
    values = np.clip(values, 0.0, None)
    if values.sum() <= 0.0:
        raise BlockMissing("Reconstructed operator has no positive weight")
    values = values / values.sum()
    return DensityOperator.from_matrix((vectors * values) @ vectors.conj().T, tol=tol)


def assemble_nonselective(reports: Sequence[ReconstructionReport], probabilities: Sequence[Tuple[float, float]],
                          tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """g_psi = sum_m g_m over the reconstructed blocks."""
    if not reports:
        raise BlockMissing("No reconstruction reports supplied")
    present = {r.block_index for r in reports}
    missing = [m for m, (_, p) in enumerate(probabilities) if p > tol.prob and m not in present]
    if missing:
        raise BlockMissing(f"No reconstruction for admissible blocks {missing}")
    total = sum(r.reconstructed for r in reports)
    if all(r.mode == OracleMode.EXACT for r in reports):
        return DensityOperator.from_matrix(total, tol=tol)
    return _nearest_density(total, tol)


def normalize_block(report: ReconstructionReport, tol: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """The normalized post-measurement state G_m = g_m / p_m."""
    if report.mode == OracleMode.EXACT:
        return DensityOperator.from_matrix(report.normalized(), tol=tol)
    return _nearest_density(report.normalized(), tol)


def refinement_constraint_residuals(candidate: State, psi: State, obs: Observable, m: int, probes: Sequence,
                                    tol: Tolerances = DEFAULT_TOLERANCES) -> ConstraintResiduals:
    """How far a candidate G_m is from the two constraints refinement statistics impose.

    in_block: max over probes phi in H_m of |Tr(G P_phi) - <phi, rho phi>/p_m|.
    out_of_block: max over the complement basis of |Tr(G P_phi')|.
    """
    g = as_density(candidate, tol=tol).matrix
    rho = as_density(psi, tol=tol).matrix
    p_m = born_probabilities(obs, psi, tol=tol)[m][1]
    rows = stack_vectors(probes)
    in_block = 0.0
    for phi in rows:
        phi = phi / np.linalg.norm(phi)
        predicted = float(np.real(np.vdot(phi, rho @ phi))) / p_m
        observed = float(np.real(np.vdot(phi, g @ phi)))
        in_block = max(in_block, abs(observed - predicted))
    out_of_block = 0.0
    for phi in complement_rows(obs, m):
        out_of_block = max(out_of_block, abs(float(np.real(np.vdot(phi, g @ phi)))))
    return ConstraintResiduals(in_block, out_of_block)


def convergence_study(psi: State, obs: Observable, shots_grid: Sequence[int] = (1000, 10000, 100000, 1000000),
                      seed: int = 0, repeats: int = 10, tol: Tolerances = DEFAULT_TOLERANCES) -> ConvergenceResult:
    """RMS Frobenius error of SAMPLED reconstructions per shot count, with a log-log slope fit."""
    if repeats < 1 or len(shots_grid) < 2:
        raise ConfigError("Convergence study needs repeats >= 1 and at least two shot counts")
    errors = []
    for s, shots in enumerate(shots_grid):
        squared = []
        for r in range(repeats):
            run_seed = int(np.random.SeedSequence(int(seed), spawn_key=(s, r)).generate_state(1)[0])
            reports = verify_theorem(psi, obs, mode=OracleMode.SAMPLED, shots=int(shots), seed=run_seed, tol=tol)
            squared.append(sum(rep.frobenius_error ** 2 for rep in reports))
        errors.append(float(np.sqrt(np.mean(squared))))
        logger.info(f"shots={shots}: RMS Frobenius error {errors[-1]:.3e}")

    x = np.log10(np.asarray(shots_grid, dtype=float)).reshape(-1, 1)
    y = np.log10(np.asarray(errors))
    fit = LinearRegression().fit(x, y)
    return ConvergenceResult([int(s) for s in shots_grid], errors, float(fit.coef_[0]), float(fit.intercept_))
