"""Unit tests for state_io: the {dim, re, im} text format and JSON reports."""

import json

import numpy as np
import pytest

from errors import IoError, NormError, ParseError
from hilbert import StateVector
from measurement import Postulate
from state_io import (
    decode, dumps_report, encode_state, load_operator, load_state, save_operator, save_report, save_state,
    to_jsonable,
)

S = 1 / np.sqrt(2)


def test_save_and_load_state(tmp_path):
    psi = StateVector.from_amplitudes([S, 1j * S])
    path = tmp_path / "psi.json"
    save_state(psi, path)
    assert json.loads(path.read_text()) == {"dim": 2, "re": [S, 0.0], "im": [0.0, S]}
    assert np.array_equal(load_state(path).amplitudes, psi.amplitudes)


def test_save_and_load_operator(tmp_path):
    op = np.array([[1.0, -1j], [1j, 2.0]])
    path = tmp_path / "nested" / "op.json"
    save_operator(op, path)
    assert np.array_equal(load_operator(path), op)


def test_encode_state_fields():
    assert list(encode_state(StateVector.basis(3, 1))) == ["dim", "re", "im"]


def test_unknown_field_suggests_a_name(write_state):
    path = write_state("typo.json", '{\n  "dim": 2,\n  "real": [1, 0],\n  "im": [0, 0]\n}\n')
    with pytest.raises(ParseError) as info:
        load_state(path)
    assert info.value.field == "real"
    assert info.value.line == 3
    assert "did you mean 're'" in str(info.value)


def test_missing_field(write_state):
    path = write_state("short.json", {"dim": 2, "re": [1, 0]})
    with pytest.raises(ParseError) as info:
        load_state(path)
    assert info.value.field == "im"


def test_wrong_entry_count(write_state):
    path = write_state("count.json", {"dim": 3, "re": [1, 0], "im": [0, 0]})
    with pytest.raises(ParseError) as info:
        load_state(path)
    assert info.value.field == "re"


@pytest.mark.parametrize("dim", [0, -1, 2.5, True, "2"])
def test_bad_dim(dim):
    with pytest.raises(ParseError) as info:
        decode(json.dumps({"dim": dim, "re": [1, 0], "im": [0, 0]}))
    assert info.value.field == "dim"


def test_non_numeric_entry():
    with pytest.raises(ParseError):
        decode('{"dim": 2, "re": [1, "x"], "im": [0, 0]}')


def test_invalid_json_reports_position():
    with pytest.raises(ParseError) as info:
        decode('{\n  "dim": 2,\n  "re": [1, 0\n}')
    assert info.value.line is not None


def test_non_object_document():
    with pytest.raises(ParseError):
        decode("[1, 0]")


def test_unnormalized_state(write_state):
    path = write_state("big.json", {"dim": 2, "re": [1, 1], "im": [0, 0]})
    with pytest.raises(NormError):
        load_state(path)


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_state(tmp_path / "absent.json")


def test_report_conversion():
    payload = {
        "postulate": Postulate.LUDERS,
        "count": np.int64(3),
        "flag": np.bool_(True),
        "value": np.float64(0.25),
        "matrix": np.eye(2, dtype=complex),
        "amplitude": 1j,
        "list": (np.float32(1.5), 2),
    }
    out = to_jsonable(payload)
    assert out["postulate"] == "luders"
    assert out["count"] == 3 and isinstance(out["count"], int)
    assert out["flag"] is True
    assert out["matrix"] == {"dim": 2, "re": [1.0, 0.0, 0.0, 1.0], "im": [0.0, 0.0, 0.0, 0.0]}
    assert out["amplitude"] == {"re": 0.0, "im": 1.0}
    assert out["list"] == [1.5, 2]


def test_report_is_sorted_and_finite(tmp_path):
    text = dumps_report({"b": 1.0, "a": [np.float64(2.0)]})
    assert text.index('"a"') < text.index('"b"')
    with pytest.raises(IoError):
        dumps_report({"bad": float("nan")})
    save_report({"x": 1}, tmp_path / "report.json")
    assert json.loads((tmp_path / "report.json").read_text()) == {"x": 1}
