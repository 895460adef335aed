"""Foundation smoke test: the fixtures build a usable runner offline."""

import numpy as np

from measurement import Postulate


def test_make_runner_builds(make_runner):
    r = make_runner()
    assert r.config.postulate == Postulate.LUDERS
    assert r.config.seed == 0
    assert r.alice_observable().dim == 8


def test_write_state_and_load(write_state):
    from state_io import load_state

    path = write_state("plus.json", {"dim": 2, "re": [2 ** -0.5, 2 ** -0.5], "im": [0.0, 0.0]})
    psi = load_state(path)
    assert np.allclose(psi.amplitudes, [2 ** -0.5, 2 ** -0.5])
