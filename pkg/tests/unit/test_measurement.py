"""Unit tests for measurement: Born rule, Lüders channels, the basic postulate,
refinements, refined channels and the Bayes identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import integers

from errors import DegenerateSpectrum, DimMismatch, NormError, NotInEigenspace, NotOrthonormal, SpanMismatch, UnknownOutcome, ZeroProbabilityOutcome
from hilbert import KET_0, KET_1, KET_PLUS, DensityOperator, StateVector, partial_trace, pure_to_density, trace_distance
from measurement import (
    FractionalGammaStrategy, Postulate, SequentialGammaStrategy, aligned_basis, bayes_check,
    born_probabilities, build_refinement, luders_nonselective, luders_selective, pp_nondegenerate,
    random_block_basis, refined_probabilities, vn_refined_branch, vn_refined_nonselective,
    vn_refined_selective,
)
from random_ensembles import haar_state, planted_observable, random_partition, stream
from spectral import local_observable, make_observable, spectral_decompose

S = 1 / np.sqrt(2)


def ket(bits):
    out = np.ones(1, dtype=complex)
    for b in bits:
        out = np.kron(out, [0, 1] if b == "1" else [1, 0])
    return out


@pytest.fixture
def qubit_z():
    """diag(0, 1) with eigenvectors |0>, |1>."""
    return make_observable([0, 1], [[KET_0], [KET_1]])


@pytest.fixture
def rotated_plus_block():
    return np.array([(ket("00") + ket("01")) * S, (ket("00") - ket("01")) * S])


def _random_pair(seed, max_dim=12):
    gen = stream(seed)
    dim = int(gen.integers(2, max_dim + 1))
    obs = planted_observable(random_partition(dim, min(8, dim), gen), gen)
    return obs, haar_state(dim, gen), gen


class TestBornProbabilities:
    def test_born_eigenstate(self, qubit_z):
        assert born_probabilities(qubit_z, KET_0) == [(0.0, pytest.approx(1.0)), (1.0, pytest.approx(0.0))]

    def test_born_rank_two_block(self):
        obs = spectral_decompose(np.diag([1.0, 1.0, 0.0]))
        psi = StateVector.normalized([1, 1, 1])
        probs = dict(born_probabilities(obs, psi))
        assert probs[1.0] == pytest.approx(2 / 3)

    def test_born_bell_z_on_first(self, z_on_first, bell_phi_plus):
        probs = born_probabilities(z_on_first, bell_phi_plus)
        assert [a for a, _ in probs] == [-1.0, 1.0]
        assert [p for _, p in probs] == [pytest.approx(0.5), pytest.approx(0.5)]

    def test_born_dim_mismatch(self, qubit_z, bell_phi_plus):
        with pytest.raises(DimMismatch):
            born_probabilities(qubit_z, bell_phi_plus)

    @settings(max_examples=60, deadline=None)
    @given(integers(min_value=0, max_value=2 ** 32))
    def test_born_probabilities_sum_to_one(self, seed):
        obs, psi, _ = _random_pair(seed)
        assert abs(sum(p for _, p in born_probabilities(obs, psi)) - 1.0) <= 1e-10


class TestLudersChannels:
    def test_luders_selective_superposition(self, qubit_z):
        record = luders_selective(qubit_z, KET_PLUS, 1)
        assert record.probability == pytest.approx(0.5)
        assert np.allclose(record.post_state.matrix, np.diag([0, 1]))
        assert record.postulate == Postulate.LUDERS
        assert record.outcome == 1.0

    def test_luders_selective_bell_plus_block(self, z_on_first, bell_phi_plus):
        record = luders_selective(z_on_first, bell_phi_plus, 1)
        assert record.probability == pytest.approx(0.5)
        assert np.allclose(record.post_state.matrix, np.outer(ket("00"), ket("00")))
        assert record.post_state.is_pure()

    def test_luders_selective_fixed_point(self, z_on_first):
        psi = StateVector.normalized(ket("00") + 1j * ket("01"))
        record = luders_selective(z_on_first, psi, 1)
        assert record.probability == pytest.approx(1.0)
        assert np.allclose(record.post_state.matrix, pure_to_density(psi).matrix)

    def test_luders_selective_zero_probability(self, qubit_z):
        with pytest.raises(ZeroProbabilityOutcome):
            luders_selective(qubit_z, KET_0, 1)

    def test_luders_selective_unknown_outcome(self, qubit_z):
        with pytest.raises(UnknownOutcome):
            luders_selective(qubit_z, KET_0, 5)

    def test_luders_selective_mixed_input(self, z_on_first, bell_phi_plus):
        rho = luders_nonselective(z_on_first, bell_phi_plus)
        record = luders_selective(z_on_first, rho, 0)
        assert record.probability == pytest.approx(0.5)
        assert np.allclose(record.post_state.matrix, np.outer(ket("11"), ket("11")))

    def test_luders_nonselective_examples(self, qubit_z, z_on_first, bell_phi_plus):
        diag = DensityOperator.from_matrix(np.diag([0.25, 0.75]))
        assert np.allclose(luders_nonselective(qubit_z, diag).matrix, diag.matrix)
        assert np.allclose(luders_nonselective(qubit_z, KET_PLUS).matrix, np.diag([0.5, 0.5]))
        expected = (np.outer(ket("00"), ket("00")) + np.outer(ket("11"), ket("11"))) / 2
        assert np.allclose(luders_nonselective(z_on_first, bell_phi_plus).matrix, expected)

    @settings(max_examples=60, deadline=None)
    @given(integers(min_value=0, max_value=2 ** 32))
    def test_luders_nonselective_channel_properties(self, seed):
        obs, psi, _ = _random_pair(seed)
        once = luders_nonselective(obs, psi)
        twice = luders_nonselective(obs, once)
        assert abs(np.trace(once.matrix) - 1.0) <= 1e-10
        assert np.linalg.eigvalsh(once.matrix)[0] >= -1e-10
        assert np.max(np.abs(twice.matrix - once.matrix)) <= 1e-10


class TestPpNondegenerate:
    def test_pp_nondegenerate_eigenstate_and_superposition(self, qubit_z):
        records = pp_nondegenerate(qubit_z, KET_1)
        assert [r.probability for r in records] == [pytest.approx(0.0), pytest.approx(1.0)]
        records = pp_nondegenerate(qubit_z, KET_PLUS)
        assert [r.probability for r in records] == [pytest.approx(0.5), pytest.approx(0.5)]
        assert all(r.postulate == Postulate.PP_NONDEGENERATE for r in records)

    def test_pp_nondegenerate_rejects_degenerate(self, z_on_first, bell_phi_plus):
        with pytest.raises(DegenerateSpectrum):
            pp_nondegenerate(z_on_first, bell_phi_plus)

    def test_pp_nondegenerate_agrees_with_luders(self):
        gen = stream(21)
        obs = planted_observable([1, 1, 1, 1, 1], gen)
        psi = haar_state(5, gen)
        for k, record in enumerate(pp_nondegenerate(obs, psi)):
            luders = luders_selective(obs, psi, k)
            assert record.probability == pytest.approx(luders.probability, abs=1e-12)
            assert np.max(np.abs(record.post_state.matrix - luders.post_state.matrix)) <= 1e-10


class TestBuildRefinement:
    def test_refinement_single_block(self):
        obs = make_observable([5], [np.eye(2)])
        d = build_refinement(obs)
        assert np.allclose(d.matrix(), np.diag(d.gammas[0]))
        assert all(d.coarse_map(g) == 5.0 for g in d.gammas[0])

    def test_refinement_rotated_basis_commutes(self, z_on_first, rotated_plus_block):
        d = build_refinement(z_on_first, [None, rotated_plus_block])
        assert d.commutator_norm() <= 1e-10
        assert np.allclose(d.eigenvectors[1], rotated_plus_block)

    def test_refinement_of_nondegenerate_is_relabeling(self, qubit_z):
        d = build_refinement(qubit_z)
        assert np.allclose(d.matrix(), np.diag([g[0] for g in d.gammas]))
        assert d.as_observable().is_nondegenerate

    def test_fractional_gammas_floor_to_block_index(self):
        gammas = FractionalGammaStrategy().assign([3, 1, 2])
        for i, block in enumerate(gammas):
            assert all(int(np.floor(g)) == i for g in block)
        flat = np.concatenate(gammas)
        assert len(set(flat.tolist())) == flat.size

    def test_sequential_gamma_strategy(self, z_on_first):
        d = build_refinement(z_on_first, gamma_strategy=SequentialGammaStrategy())
        assert [list(g) for g in d.gammas] == [[0.0, 1.0], [2.0, 3.0]]
        assert d.coarse_map(3.0) == 1.0
        with pytest.raises(UnknownOutcome):
            d.coarse_map(4.0)

    def test_refinement_rejects_bad_bases(self, z_on_first):
        with pytest.raises(NotOrthonormal):
            build_refinement(z_on_first, [None, [ket("00"), ket("00")]])
        with pytest.raises(SpanMismatch):
            build_refinement(z_on_first, [None, [ket("00"), ket("10")]])
        with pytest.raises(SpanMismatch):
            build_refinement(z_on_first, [None])


class TestRefinedChannels:
    def test_vn_nonselective_eigenstate(self, z_on_first):
        d = build_refinement(z_on_first)
        psi = StateVector.from_amplitudes(ket("01"))
        assert np.allclose(vn_refined_nonselective(d, psi).matrix, pure_to_density(psi).matrix)

    def test_vn_nonselective_single_block(self):
        obs = make_observable([1], [np.eye(2)])
        d = build_refinement(obs)
        assert np.allclose(vn_refined_nonselective(d, KET_PLUS).matrix, np.eye(2) / 2)

    def test_vn_nonselective_bell_computational(self, z_on_first, bell_phi_plus):
        d = build_refinement(z_on_first)
        assert np.allclose(vn_refined_nonselective(d, bell_phi_plus).matrix, np.diag([0.5, 0, 0, 0.5]))

    def test_vn_selective_eigenvector(self, z_on_first):
        d = build_refinement(z_on_first)
        record = vn_refined_selective(d, StateVector.from_amplitudes(ket("00")), 1)
        assert record.probability == pytest.approx(1.0)
        assert np.allclose(record.post_state.matrix, np.outer(ket("00"), ket("00")))

    def test_vn_selective_bell_computational(self, z_on_first, bell_phi_plus):
        record = vn_refined_selective(build_refinement(z_on_first), bell_phi_plus, 1)
        assert record.probability == pytest.approx(0.5)
        assert np.allclose(record.post_state.matrix, np.outer(ket("00"), ket("00")))
        assert record.postulate == Postulate.VON_NEUMANN_REFINED

    def test_vn_selective_rotated_diverges_from_luders(self, z_on_first, bell_phi_plus, rotated_plus_block):
        d = build_refinement(z_on_first, [None, rotated_plus_block])
        vn = vn_refined_selective(d, bell_phi_plus, 1)
        luders = luders_selective(z_on_first, bell_phi_plus, 1)
        mixture = sum(np.outer(e, e.conj()) for e in rotated_plus_block) / 2
        assert np.allclose(vn.post_state.matrix, mixture)
        assert trace_distance(vn.post_state, luders.post_state) >= 0.1

    def test_vn_selective_aligned_matches_luders(self, z_on_first, bell_phi_plus):
        d = build_refinement(z_on_first, [aligned_basis(z_on_first, bell_phi_plus, k) for k in range(2)])
        for k in range(2):
            vn = vn_refined_selective(d, bell_phi_plus, k)
            luders = luders_selective(z_on_first, bell_phi_plus, k)
            assert np.max(np.abs(vn.post_state.matrix - luders.post_state.matrix)) <= 1e-10

    def test_vn_selective_zero_probability(self, z_on_first):
        d = build_refinement(z_on_first)
        with pytest.raises(ZeroProbabilityOutcome):
            vn_refined_selective(d, StateVector.from_amplitudes(ket("00")), 0)

    def test_vn_refined_branch_is_pure_eigenvector(self, z_on_first, bell_phi_plus, rotated_plus_block):
        d = build_refinement(z_on_first, [None, rotated_plus_block])
        record = vn_refined_branch(d, bell_phi_plus, 1, 1)
        e = rotated_plus_block[1]
        assert record.probability == pytest.approx(0.25)
        assert np.allclose(record.post_state.matrix, np.outer(e, e.conj()))
        with pytest.raises(UnknownOutcome):
            vn_refined_branch(d, bell_phi_plus, 1, 2)

    def test_refined_probabilities_sum_to_block_probabilities(self, planted_observable):
        obs, psi = planted_observable([3, 1, 2], seed=6)
        d = build_refinement(obs, [random_block_basis(obs, k, stream(6, k)) for k in range(len(obs))])
        refined = refined_probabilities(d, psi)
        born = born_probabilities(obs, psi)
        for i, (_, p_i) in enumerate(born):
            assert sum(p for (blk, _), _, p in refined if blk == i) == pytest.approx(p_i, abs=1e-12)

    def test_refinement_does_not_change_parent_statistics(self, planted_observable):
        obs, psi = planted_observable([2, 3, 1], seed=11)
        d = build_refinement(obs, [random_block_basis(obs, k, stream(11, k)) for k in range(len(obs))])
        after = born_probabilities(obs, vn_refined_nonselective(d, psi))
        before = born_probabilities(obs, psi)
        for (_, a), (_, b) in zip(after, before):
            assert a == pytest.approx(b, abs=1e-10)

    def test_refinement_basis_does_not_signal(self):
        gen = stream(31)
        psi = haar_state(6, gen)
        obs = local_observable(np.diag([0.0, 1.0]), 0, [2, 3])
        marginals = []
        for k in range(10):
            bases = [random_block_basis(obs, i, stream(31, k, i)) for i in range(len(obs))]
            rho = vn_refined_nonselective(build_refinement(obs, bases), psi)
            marginals.append(partial_trace(rho, [2, 3], keep=0).matrix)
        for m in marginals[1:]:
            assert np.max(np.abs(m - marginals[0])) <= 1e-10

    def test_nonselective_averaging_aligned_vs_rotated(self, z_on_first, bell_phi_plus, rotated_plus_block):
        luders = luders_nonselective(z_on_first, bell_phi_plus)
        aligned = build_refinement(z_on_first, [aligned_basis(z_on_first, bell_phi_plus, k) for k in range(2)])
        assert np.max(np.abs(vn_refined_nonselective(aligned, bell_phi_plus).matrix - luders.matrix)) <= 1e-10
        rotated = build_refinement(z_on_first, [None, rotated_plus_block])
        assert trace_distance(vn_refined_nonselective(rotated, bell_phi_plus), luders) > 1e-3


class TestBayesCheck:
    def test_bayes_lueders_vector(self, planted_observable):
        obs, psi = planted_observable([2, 3], seed=2)
        d = build_refinement(obs)
        projected = obs.projectors[1].matrix @ psi.amplitudes
        p_1 = float(np.vdot(projected, projected).real)
        result = bayes_check(d, psi, 1, projected / np.sqrt(p_1))
        assert result.lhs == pytest.approx(p_1, abs=1e-12)
        assert result.rhs == pytest.approx(p_1, abs=1e-12)

    def test_bayes_orthogonal_probe(self, planted_observable):
        obs, psi = planted_observable([3, 1], seed=5)
        aligned = aligned_basis(obs, psi, 0)
        result = bayes_check(build_refinement(obs), psi, 0, aligned[1])
        assert result.lhs == pytest.approx(0.0, abs=1e-12)
        assert result.rhs == pytest.approx(0.0, abs=1e-12)

    def test_bayes_random_probe_rank_three_block(self):
        gen = stream(77)
        obs = planted_observable([3, 2, 1], gen)
        psi = haar_state(6, gen)
        phi = haar_state(3, gen).amplitudes @ obs.eigenbases[0]
        d = build_refinement(obs, [random_block_basis(obs, k, gen) for k in range(3)])
        assert bayes_check(d, psi, 0, phi).residual <= 1e-12

    def test_bayes_rejects_probe_outside_block(self, z_on_first, bell_phi_plus):
        with pytest.raises(NotInEigenspace):
            bayes_check(build_refinement(z_on_first), bell_phi_plus, 1, ket("11"))

    def test_bayes_rejects_zero_vector(self, z_on_first, bell_phi_plus):
        with pytest.raises(NormError):
            bayes_check(build_refinement(z_on_first), bell_phi_plus, 1, np.zeros(4))
