"""Unit tests for spectral: decomposition with degeneracy grouping, explicit
construction, functions of observables and local observables."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import integers

from errors import DimMismatch, DuplicateEigenvalue, GroupingAmbiguous, NotHermitian, NotOrthonormal, SpanMismatch, UnknownOutcome
from hilbert import PAULI_Z
from measurement import build_refinement
from random_ensembles import haar_unitary, random_hermitian, random_partition, stream, planted_observable
from spectral import function_of, local_observable, make_observable, spectral_decompose


def _assert_complete(obs, tol=1e-10):
    total = sum(p.matrix for p in obs.projectors)
    assert np.max(np.abs(total - np.eye(obs.dim))) <= tol
    for a in range(len(obs)):
        for b in range(a + 1, len(obs)):
            assert np.max(np.abs(obs.projectors[a].matrix @ obs.projectors[b].matrix)) <= tol
    assert sum(obs.ranks) == obs.dim


class TestSpectralDecompose:
    def test_decompose_diagonal(self):
        obs = spectral_decompose(np.diag([1.0, 1.0, 2.0]))
        assert np.allclose(obs.eigenvalues, [1, 2])
        assert obs.ranks == [2, 1]
        assert np.allclose(obs.projectors[0].matrix, np.diag([1, 1, 0]))

    def test_decompose_local_z_is_degenerate(self):
        obs = spectral_decompose(np.kron(PAULI_Z, np.eye(2)))
        assert np.allclose(obs.eigenvalues, [-1, 1])
        assert obs.ranks == [2, 2]
        assert not obs.is_nondegenerate

    def test_decompose_planted_degeneracy(self, rng):
        u = haar_unitary(4, rng)
        obs = spectral_decompose(u @ np.diag([3.0, 3.0, 5.0, 7.0]) @ u.conj().T)
        assert np.allclose(obs.eigenvalues, [3, 5, 7])
        assert obs.ranks == [2, 1, 1]
        _assert_complete(obs)

    def test_decompose_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            spectral_decompose([[1.0, 1.0], [0.0, 1.0]])

    def test_decompose_ambiguous_gap(self):
        with pytest.raises(GroupingAmbiguous):
            spectral_decompose(np.diag([1.0, 1.0 + 1.5e-8]))

    def test_decompose_merges_and_splits_around_tolerance(self):
        merged = spectral_decompose(np.diag([1.0, 1.0 + 1e-12, 2.0]))
        assert merged.ranks == [2, 1]
        split = spectral_decompose(np.diag([1.0, 1.0 + 1e-6]))
        assert split.ranks == [1, 1]

    @settings(max_examples=40, deadline=None)
    @given(integers(min_value=0, max_value=2 ** 32), integers(min_value=1, max_value=16))
    def test_decompose_round_trip_random_hermitian(self, seed, dim):
        m = random_hermitian(dim, stream(seed))
        obs = spectral_decompose(m)
        assert np.max(np.abs(obs.matrix() - m)) <= 1e-9
        _assert_complete(obs)

    @settings(max_examples=40, deadline=None)
    @given(integers(min_value=0, max_value=2 ** 32), integers(min_value=2, max_value=16))
    def test_planted_observables_keep_their_ranks(self, seed, dim):
        gen = stream(seed)
        ranks = random_partition(dim, min(8, dim), gen)
        obs = planted_observable(ranks, gen)
        assert obs.ranks == list(ranks)
        _assert_complete(obs)

    def test_outcome_index_lookup(self, z_on_first):
        assert z_on_first.outcome_index(1.0) == 1
        assert z_on_first.outcome_index(-1.0) == 0
        with pytest.raises(UnknownOutcome):
            z_on_first.outcome_index(0.0)
        with pytest.raises(UnknownOutcome):
            z_on_first.check_index(2)


class TestMakeObservable:
    def test_make_observable_diagonal(self):
        obs = make_observable([0, 1], [[[1, 0]], [[0, 1]]])
        assert np.allclose(obs.matrix(), np.diag([0, 1]))

    def test_make_observable_parity_like(self):
        e = np.eye(4)
        obs = make_observable([-1, 1], [[e[1], e[2]], [e[0], e[3]]])
        assert np.allclose(obs.matrix(), np.diag([1, -1, -1, 1]))
        assert obs.ranks == [2, 2]

    def test_make_observable_scalar(self):
        obs = make_observable([5], [np.eye(3)])
        assert np.allclose(obs.matrix(), 5 * np.eye(3))
        assert len(obs) == 1

    def test_make_observable_sorts_eigenvalues(self):
        obs = make_observable([2, -1], [[[1, 0]], [[0, 1]]])
        assert list(obs.eigenvalues) == [-1, 2]
        assert np.allclose(obs.matrix(), np.diag([2, -1]))

    def test_make_observable_errors(self):
        with pytest.raises(DuplicateEigenvalue):
            make_observable([1, 1], [[[1, 0]], [[0, 1]]])
        with pytest.raises(NotOrthonormal):
            make_observable([0, 1], [[[1, 0]], [[1, 0]]])
        with pytest.raises(SpanMismatch):
            make_observable([0, 1], [[[1, 0, 0]], [[0, 1, 0]]])

    def test_make_observable_rebuilds_decomposition(self, rng):
        u = haar_unitary(3, rng)
        obs = spectral_decompose(u @ np.diag([1.0, 1.0, 2.0]) @ u.conj().T)
        rebuilt = make_observable(obs.eigenvalues, obs.eigenbases)
        assert rebuilt.ranks == obs.ranks
        assert np.max(np.abs(rebuilt.matrix() - obs.matrix())) <= 1e-12
        assert make_observable(np.array([0.0, 1.0]), [[[1, 0]], [[0, 1]]]).ranks == [1, 1]

    def test_make_observable_rejects_empty_and_unpaired(self):
        with pytest.raises(DimMismatch):
            make_observable(np.array([]), [])
        with pytest.raises(DimMismatch):
            make_observable(np.array([0.0, 1.0]), [np.eye(2)])


class TestFunctionOf:
    def test_function_of_identity_and_monotone(self):
        obs = make_observable([1, 2, 3], [np.eye(3)[[0]], np.eye(3)[[1]], np.eye(3)[[2]]])
        same = function_of(obs, lambda x: x)
        assert np.allclose(same.matrix(), obs.matrix())
        squared = function_of(obs, lambda x: x ** 2)
        assert np.allclose(squared.eigenvalues, [1, 4, 9])
        for a, b in zip(squared.projectors, obs.projectors):
            assert np.allclose(a.matrix, b.matrix)

    def test_function_of_merges_collisions(self):
        obs = make_observable([-1, 0, 1], [np.eye(3)[[0]], np.eye(3)[[1]], np.eye(3)[[2]]])
        squared = function_of(obs, lambda x: x ** 2)
        assert np.allclose(squared.eigenvalues, [0, 1])
        assert squared.ranks == [1, 2]

    def test_function_of_composes(self, planted_observable):
        obs, _ = planted_observable([2, 1, 3], seed=4)
        f, g = (lambda x: x ** 2), (lambda x: x + 1.0)
        twice = function_of(function_of(obs, f), g)
        once = function_of(obs, lambda x: g(f(x)))
        assert np.max(np.abs(twice.matrix() - once.matrix())) <= 1e-10

    def test_coarse_graining_refinement_recovers_parent(self, planted_observable):
        obs, _ = planted_observable([3, 2, 2], seed=8)
        d = build_refinement(obs)
        recovered = function_of(d.as_observable(), d.coarse_map)
        assert np.allclose(recovered.eigenvalues, obs.eigenvalues)
        for a, b in zip(recovered.projectors, obs.projectors):
            assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-10


class TestLocalObservable:
    def test_local_observable_on_second_site(self):
        obs = local_observable(PAULI_Z, 1, [2, 2])
        assert np.allclose(obs.matrix(), np.kron(np.eye(2), PAULI_Z))
        assert obs.ranks == [2, 2]

    def test_local_observable_rank_is_rest_dimension(self):
        obs = local_observable(np.diag([0.0, 1.0, 2.0]), 0, [3, 2, 2])
        assert obs.ranks == [4, 4, 4]
