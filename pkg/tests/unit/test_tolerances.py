"""Unit tests for tolerances: defaults, overrides and the override file."""

import json

import pytest

from errors import ConfigError, IoError, ParseError
from tolerances import DEFAULT_TOLERANCES, TOLERANCES_ENV_VAR, Tolerances, load_tolerances


def test_defaults():
    assert DEFAULT_TOLERANCES.norm == 1e-10
    assert DEFAULT_TOLERANCES.eig == 1e-8
    assert DEFAULT_TOLERANCES.prob == 1e-12
    assert DEFAULT_TOLERANCES.sampled_bound(10000) == pytest.approx(0.05)


def test_overrides_replace_fields():
    tol = DEFAULT_TOLERANCES.with_overrides({"norm": "1e-8", "theorem": 1e-6})
    assert tol.norm == 1e-8
    assert tol.theorem == 1e-6
    assert tol.eig == DEFAULT_TOLERANCES.eig
    assert DEFAULT_TOLERANCES.with_overrides(None) is DEFAULT_TOLERANCES


def test_unknown_override_suggests_a_name():
    with pytest.raises(ConfigError, match="did you mean 'theorem'"):
        DEFAULT_TOLERANCES.with_overrides({"theorm": 1e-6})


@pytest.mark.parametrize("value", [0, -1e-3, "abc", None])
def test_override_must_be_positive_number(value):
    with pytest.raises(ConfigError):
        DEFAULT_TOLERANCES.with_overrides({"norm": value})


def test_load_from_file(tmp_path):
    path = tmp_path / "tol.json"
    path.write_text(json.dumps({"recon": 1e-7}))
    assert load_tolerances(path).recon == 1e-7


def test_load_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "tol.json"
    path.write_text(json.dumps({"bayes": 1e-9}))
    monkeypatch.setenv(TOLERANCES_ENV_VAR, str(path))
    assert load_tolerances().bayes == 1e-9
    monkeypatch.delenv(TOLERANCES_ENV_VAR)
    assert load_tolerances() == Tolerances()


def test_load_errors(tmp_path):
    with pytest.raises(IoError):
        load_tolerances(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_tolerances(bad)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ParseError):
        load_tolerances(listed)
