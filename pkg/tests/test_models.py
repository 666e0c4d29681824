import json
from pathlib import Path

import numpy as np
import pytest

from jointqec.analytic import two_qubit_code
from jointqec.codes import protocol_cost
from jointqec.lindblad import build_lindblad_span, check_hnls
from jointqec.models import (
    ModelFormatError, builtin_model, code_from_dict, code_to_dict, hadamard_field, hadamard_matrix, load_code,
    load_model, maximal_advantage, model_from_dict, model_to_dict, parse_builtin_spec, resolve_model, save_code,
    save_model, single_qubit, su_d_jz,
)
from jointqec.operators import SIGMA_Z, gram_matrix
from jointqec.protocol import synthesize_protocol

MODELS = sorted((Path(__file__).parent.parent / "models").glob("*.json"))


def _same_model(a, b):
    assert a.dim == b.dim and a.name == b.name and a.time == b.time
    for xs, ys in ((a.generators, b.generators), (a.strong_lindblads, b.strong_lindblads),
                   (a.weak_lindblads, b.weak_lindblads)):
        assert len(xs) == len(ys)
        for x, y in zip(xs, ys):
            assert np.array_equal(x, y)
    assert np.array_equal(a.cost_matrix, b.cost_matrix)
    assert a.metadata.get("options") == b.metadata.get("options")


def test_shipped_models_exist():
    assert len(MODELS) >= 4


@pytest.mark.parametrize("path", MODELS, ids=lambda p: p.stem)
def test_shipped_model_round_trip(path, tmp_path):
    model = load_model(path)
    out = tmp_path / "m.json"
    save_model(model, out)
    assert json.loads(out.read_text()) == json.loads(path.read_text())
    _same_model(model, load_model(out))


def test_builtin_examples():
    m = single_qubit()
    assert (m.dim, m.n_params) == (2, 2)
    assert np.allclose(m.strong_lindblads[0], SIGMA_Z)
    m = su_d_jz(3)
    assert (m.dim, m.n_params) == (3, 6)
    assert build_lindblad_span(3, m.strong_lindblads).size == 3
    m = maximal_advantage(3)
    assert m.dim == 4
    assert np.allclose(gram_matrix(m.generators), np.eye(3))


def test_hadamard_metadata():
    m = hadamard_field(p=4)
    a = np.asarray(m.metadata["hadamard_transform"])
    assert np.allclose(a, hadamard_matrix(4))
    assert np.allclose(a @ a.T, np.eye(4))
    with pytest.raises(ValueError):
        hadamard_matrix(3)


def test_parse_builtin_spec():
    assert parse_builtin_spec("su_d_jz:3") == ("su_d_jz", {"d": 3})
    name, params = parse_builtin_spec("two_qubit_anticorrelated:gamma=0.5")
    assert name == "two_qubit_anticorrelated" and params == {"gamma": 0.5}
    with pytest.raises(ValueError):
        parse_builtin_spec("nope")


def test_resolve_model(tmp_path):
    assert resolve_model("maximal_advantage:2").n_params == 2
    with pytest.raises(FileNotFoundError):
        resolve_model(str(tmp_path / "missing.json"))


def test_format_errors(tmp_path):
    good = model_to_dict(single_qubit())
    bad = dict(good, schema="other/1")
    with pytest.raises(ModelFormatError, match=r"\$\.schema"):
        model_from_dict(bad)
    bad = dict(good, dim=0)
    with pytest.raises(ModelFormatError, match=r"\$\.dim"):
        model_from_dict(bad)
    bad = dict(good, cost_matrix=[[1.0]])
    with pytest.raises(ModelFormatError, match=r"\$\.cost_matrix"):
        model_from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["generators"][0][0][1] = [5.0, 0.0]
    with pytest.raises(ModelFormatError, match="generators"):
        model_from_dict(bad)
    path = tmp_path / "broken.json"
    path.write_text('{"schema": "jointqec-model/1",\n "dim": 2,,}')
    with pytest.raises(ModelFormatError, match="line 2"):
        load_model(path)


def test_builtin_verdict_claims():
    assert check_hnls(builtin_model("single_qubit")).achievable
    assert check_hnls(builtin_model("su_d_jz", d=4)).achievable


def test_code_round_trip(tmp_path):
    model = builtin_model("two_qubit_anticorrelated")
    code = two_qubit_code()
    path = tmp_path / "c.code.json"
    save_code(path, code, extra={"note": "analytic"})
    back = load_code(path)
    assert np.allclose(back.states, code.states, atol=0)
    assert protocol_cost(back, model.generators, np.eye(3), 1.0).cost == pytest.approx(
        protocol_cost(code, model.generators, np.eye(3), 1.0).cost)


def test_code_with_protocol(tmp_path):
    jp = synthesize_protocol(single_qubit())
    data = code_to_dict(jp.code, jp.protocol)
    assert "measurement" in data
    back = code_from_dict(json.loads(json.dumps(data)))
    assert np.allclose(back.states, jp.code.states)


def test_code_format_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2")
    with pytest.raises(ModelFormatError):
        load_code(path)
    with pytest.raises(ModelFormatError):
        code_from_dict({"schema": "jointqec-code/1"})
