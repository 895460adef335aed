"""
Shared pytest fixtures for the projection postulate engine test suite.

Key design points:
  * `src/` is put on sys.path so the flat top-level modules
    (`hilbert`, `measurement`, `protocols.*`, ...) import.
  * Every random object comes from a seeded stream so failures reproduce.
  * `z_on_first` is the two-qubit Z (x) I observable with computational
    eigenbases, the worked example most unit tests start from.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from hilbert import KET_0, KET_1, bell_states, tensor  # noqa: E402
from protocol_runner import ProtocolRunner  # noqa: E402
from protocols.refinement_choice import ProtocolConfig  # noqa: E402
from random_ensembles import haar_state, planted_observable as _planted, stream  # noqa: E402
from spectral import make_observable  # noqa: E402


def ket(bits: str) -> np.ndarray:
    """Computational basis vector for a bit string, e.g. ket('01')."""
    factors = [KET_1 if b == "1" else KET_0 for b in bits]
    return factors[0].amplitudes if len(factors) == 1 else tensor(*factors).amplitudes


@pytest.fixture
def rng():
    return stream(1234)


@pytest.fixture
def bell_phi_plus():
    return bell_states()[0]


@pytest.fixture
def z_on_first():
    """Z (x) I: eigenvalue -1 on span{|10>, |11>}, +1 on span{|00>, |01>}."""
    return make_observable([-1.0, 1.0], [[ket("10"), ket("11")], [ket("00"), ket("01")]])


@pytest.fixture
def planted_observable():
    """Factory: planted_observable(ranks, seed) -> (observable, haar state of matching dim)."""

    def _make(ranks, seed=0):
        gen = stream(seed, 99)
        obs = _planted(ranks, gen)
        return obs, haar_state(obs.dim, gen)

    return _make


@pytest.fixture
def make_runner():
    """Factory that builds a ProtocolRunner.

    Usage:
        r = make_runner()                                   # Lüders, seed 0
        r = make_runner("von_neumann_refined", "rotated", seed=3)
    """

    def _make(postulate="luders", refinement="computational", seed=0, **kwargs):
        return ProtocolRunner(ProtocolConfig(postulate, refinement, seed), **kwargs)

    return _make


@pytest.fixture
def write_state(tmp_path):
    """Write a {"dim", "re", "im"} payload (or raw text) to tmp_path/<name> and return the path."""

    def _write(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload, indent=2))
        return path

    return _write
