import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import model_params, symmetric_params
from ragnet.model import (FIELD_NAMES, ModelParams, ParameterError, SymmetricParams,
                          arrival_pgf, load_params, validate)


def _half(**changes):
    d = dict.fromkeys(FIELD_NAMES, 0.5)
    d.update(changes)
    return d


def test_valid_params_accepted():
    p = ModelParams(**_half(l1_minus=0.4, l1_plus=0.6))
    assert validate(p) is p


def test_signal_effects_must_sum_to_one():
    with pytest.raises(ParameterError, match="l1_minus\\+l1_plus"):
        ModelParams(**_half(l1_minus=0.5, l1_plus=0.6))


def test_range_violation_names_field():
    with pytest.raises(ParameterError, match="alpha1 out of \\[0,1\\]"):
        ModelParams(**_half(alpha1=1.2))


@pytest.mark.parametrize("bad", [float("nan"), "0.3", None])
def test_non_numeric_rejected(bad):
    with pytest.raises(ParameterError):
        ModelParams(**_half(s2=bad))


def test_json_rejects_unknown_and_missing_fields():
    with pytest.raises(ParameterError, match="unknown"):
        ModelParams.from_dict({**_half(), "extra": 1})
    d = _half()
    del d["s1"]
    with pytest.raises(ParameterError, match="missing"):
        ModelParams.from_dict(d)


def test_pgf_normalisation_and_examples():
    p = ModelParams(**_half())
    assert arrival_pgf(1, 1, p) == 1.0
    q = ModelParams(**_half(lambda1=0.0, lambda2=0.0))
    assert arrival_pgf(0.3 + 0.2j, -0.7, q) == 1.0
    r = ModelParams(**_half(lambda1=0.2, lambda2=0.3))
    # enumerate the four arrival outcomes at x = y = 0: only (0, 0) survives
    outcomes = {(a, b): (0.2 if a else 0.8) * (0.3 if b else 0.7) for a in (0, 1) for b in (0, 1)}
    assert arrival_pgf(0, 0, r) == pytest.approx(outcomes[(0, 0)], abs=1e-15)
    assert arrival_pgf(0, 0, r) == pytest.approx(0.56, abs=1e-15)


@given(model_params())
def test_pgf_one_at_one(p):
    assert abs(arrival_pgf(1.0, 1.0, p) - 1.0) <= 1e-15


@given(model_params(), st.complex_numbers(max_magnitude=1.0), st.complex_numbers(max_magnitude=1.0))
def test_pgf_factorises(p, x, y):
    assert arrival_pgf(x, y, p) == pytest.approx(arrival_pgf(x, 1, p) * arrival_pgf(1, y, p),
                                                 abs=1e-14)


@given(model_params())
def test_pgf_derivative_is_rate(p):
    h = 1e-6
    d = (arrival_pgf(1 + h, 1, p) - arrival_pgf(1 - h, 1, p)) / (2 * h)
    assert d == pytest.approx(p.lambda1, abs=1e-9)


@given(model_params())
def test_round_trips(p):
    assert ModelParams.from_json(json.dumps(p.to_dict())) == p
    assert p.swapped().swapped() == p


@given(symmetric_params())
def test_symmetric_embedding(sp):
    m = sp.embed()
    assert m.is_symmetric()
    assert SymmetricParams.from_model(m) == sp
    assert SymmetricParams.from_dict(sp.to_dict()) == sp


def test_symmetric_replace_keeps_normalisation():
    sp = SymmetricParams.make(0.1, 0.5, 0.2, 0.5).replace(l_plus=0.8)
    assert sp.l_minus == pytest.approx(0.2)


def test_load_params_dispatches_on_keys(tmp_path):
    f = tmp_path / "s.json"
    f.write_text(json.dumps({"lambda": 0.1, "alpha": 0.5, "s": 0.2, "l_minus": 0.5,
                             "l_plus": 0.5}))
    assert isinstance(load_params(f), SymmetricParams)
    g = tmp_path / "m.json"
    g.write_text(json.dumps(_half()))
    assert isinstance(load_params(g), ModelParams)
    assert np.isclose(load_params(g).alpha(2), 0.5)
