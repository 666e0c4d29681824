"""Builtin sensing models and the JSON model file format.

Model files hold complex matrices as nested lists of ``[re, im]`` pairs::

    {
      "schema": "jointqec-model/1",
      "name": "single_qubit",
      "dim": 2,
      "generators": [[[[0, 0], [1, 0]], [[1, 0], [0, 0]]], ...],
      "strong_lindblads": [...],
      "weak_lindblads": [],
      "cost_matrix": [[1, 0], [0, 1]],
      "time": 1.0,
      "options": {"tol": 1e-8, "restarts": 64, "seed": 0}
    }
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .lindblad import SensingModel
from .operators import (
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    embed_local,
    gell_mann_basis,
    kron,
    orthonormalize_hermitian_set,
    spin_z,
)

SCHEMA = "jointqec-model/1"


class ModelFormatError(ValueError):
    """Raised with the JSON path of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# builtin models

def single_qubit(cost_matrix=None, time: float = 1.0) -> SensingModel:
    return SensingModel(2, [SIGMA_X, SIGMA_Y], [SIGMA_Z], cost_matrix=cost_matrix, time=time, name="single_qubit")


def two_qubit_anticorrelated(gamma: float = 1.0, cost_matrix=None, time: float = 1.0) -> SensingModel:
    """Two qubits in a common field with spatially anticorrelated z-fluctuations."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    gens = [(kron(s, IDENTITY_2) + kron(IDENTITY_2, s)) / 2 for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    lind = np.sqrt(2 * gamma) * (kron(SIGMA_Z, IDENTITY_2) - kron(IDENTITY_2, SIGMA_Z))
    return SensingModel(4, gens, [lind], cost_matrix=cost_matrix, time=time,
                        name="two_qubit_anticorrelated", metadata={"gamma": gamma})


def hadamard_matrix(p: int) -> np.ndarray:
    """``A_ij = prod_k (-1)^(i_k j_k) / sqrt(P)`` over binary digits."""
    r = p.bit_length() - 1
    if p < 1 or 1 << r != p:
        raise ValueError(f"Hadamard size must be a power of two, got {p}")
    idx = np.arange(p)
    parity = np.zeros((p, p), dtype=int)
    for k in range(r):
        parity += ((idx[:, None] >> k) & 1) * ((idx[None, :] >> k) & 1)
    return (-1.0) ** parity / np.sqrt(p)


def hadamard_field(r: int | None = None, p: int | None = None, cost_matrix=None, time: float = 1.0) -> SensingModel:
    """``P = 2^r`` noiseless qubits, each sensing its own z-field."""
    if p is None:
        if r is None:
            raise ValueError("give r or p")
        r = int(r)
        if r < 0:
            raise ValueError("r must be non-negative")
        p = 1 << r
    hadamard = hadamard_matrix(int(p))
    if p > 8:
        raise ValueError(f"P = {p} qubits means dimension 2^{p}; only P <= 8 is supported")
    gens = [embed_local(SIGMA_Z, i, p) for i in range(p)]
    return SensingModel(2 ** p, gens, cost_matrix=cost_matrix, time=time, name="hadamard_field",
                        metadata={"hadamard_transform": hadamard.tolist()})


def maximal_advantage(p: int, cost_matrix=None, time: float = 1.0) -> SensingModel:
    """``G_i = (|0><i| + |i><0|)/sqrt(2)`` on ``P + 1`` levels, noiseless."""
    p = int(p)
    if p < 1:
        raise ValueError("P must be positive")
    gens = []
    for i in range(1, p + 1):
        g = np.zeros((p + 1, p + 1), dtype=complex)
        g[0, i] = g[i, 0] = 1 / np.sqrt(2)
        gens.append(g)
    return SensingModel(p + 1, gens, cost_matrix=cost_matrix, time=time, name="maximal_advantage")


def su_d_noiseless(d: int, cost_matrix=None, time: float = 1.0) -> SensingModel:
    """All ``d^2 - 1`` orthonormal Gell-Mann generators, no noise."""
    d = int(d)
    if d < 2:
        raise ValueError("d must be at least 2")
    return SensingModel(d, gell_mann_basis(d), cost_matrix=cost_matrix, time=time, name="su_d_noiseless")


def su_d_jz_generators(d: int) -> list[np.ndarray]:
    """Orthonormal basis of the complement of ``span{1, J_z, J_z^2}``, Gell-Mann order."""
    jz = spin_z(d)
    span = [np.eye(d, dtype=complex), jz, jz @ jz]
    basis, rank = orthonormalize_hermitian_set(span + gell_mann_basis(d))
    n_span = len(orthonormalize_hermitian_set(span)[0])
    return basis[n_span:]


def su_d_jz(d: int, cost_matrix=None, time: float = 1.0) -> SensingModel:
    """SU(d) generators under ``J_z`` dephasing, ``P = d^2 - 3``."""
    d = int(d)
    if d < 3:
        raise ValueError("d must be at least 3")
    return SensingModel(d, su_d_jz_generators(d), [spin_z(d)], cost_matrix=cost_matrix, time=time, name="su_d_jz")


BUILTINS = {
    "single_qubit": (single_qubit, []),
    "two_qubit_anticorrelated": (two_qubit_anticorrelated, [("gamma", float)]),
    "hadamard_field": (hadamard_field, [("r", int), ("p", int)]),
    "maximal_advantage": (maximal_advantage, [("p", int)]),
    "su_d_noiseless": (su_d_noiseless, [("d", int)]),
    "su_d_jz": (su_d_jz, [("d", int)]),
}


def builtin_model(name: str, **params) -> SensingModel:
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")
    factory, _ = BUILTINS[name]
    return factory(**params)


def parse_builtin_spec(spec: str) -> tuple[str, dict]:
    """``"maximal_advantage:3"`` or ``"two_qubit_anticorrelated:gamma=0.5"`` -> (name, params)."""
    name, _, rest = spec.partition(":")
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")
    fields = BUILTINS[name][1]
    params = {}
    if rest:
        for pos, item in enumerate(rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq:
                if pos >= len(fields):
                    raise ValueError(f"too many positional parameters for {name}")
                key, value = fields[pos][0], item
            types = dict(fields)
            if key not in types:
                raise ValueError(f"{name} has no parameter {key!r}")
            try:
                params[key] = types[key](value)
            except ValueError:
                raise ValueError(f"parameter {key}={value!r} is not a valid {types[key].__name__}") from None
    return name, params


# model files

def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _decode_matrix(obj, path: str, dim: int) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != dim:
        raise ModelFormatError(path, f"expected {dim} rows")
    out = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != dim:
            raise ModelFormatError(f"{path}[{i}]", f"expected {dim} entries")
        for j, pair in enumerate(row):
            p = f"{path}[{i}][{j}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise ModelFormatError(p, "expected a [re, im] pair")
            re, im = pair
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (re, im)):
                raise ModelFormatError(p, "entries must be numbers")
            if not (math.isfinite(re) and math.isfinite(im)):
                raise ModelFormatError(p, "entries must be finite")
            out[i, j] = complex(re, im)
    return out


def _decode_list(obj, path: str, dim: int, required: bool) -> list[np.ndarray]:
    if obj is None:
        if required:
            raise ModelFormatError(path, "missing")
        return []
    if not isinstance(obj, list):
        raise ModelFormatError(path, "expected a list of matrices")
    return [_decode_matrix(m, f"{path}[{k}]", dim) for k, m in enumerate(obj)]


def model_from_dict(data: dict) -> SensingModel:
    if not isinstance(data, dict):
        raise ModelFormatError("$", "expected an object")
    schema = data.get("schema")
    if schema != SCHEMA:
        raise ModelFormatError("$.schema", f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    dim = data.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ModelFormatError("$.dim", "expected a positive integer")
    gens = _decode_list(data.get("generators"), "$.generators", dim, True)
    strong = _decode_list(data.get("strong_lindblads"), "$.strong_lindblads", dim, False)
    weak = _decode_list(data.get("weak_lindblads"), "$.weak_lindblads", dim, False)
    w = data.get("cost_matrix")
    if w is not None:
        try:
            w = np.array(w, dtype=float)
        except (TypeError, ValueError):
            raise ModelFormatError("$.cost_matrix", "expected a real matrix") from None
        if w.shape != (len(gens), len(gens)):
            raise ModelFormatError("$.cost_matrix", f"expected shape {(len(gens), len(gens))}, got {w.shape}")
    time = data.get("time", 1.0)
    if not isinstance(time, (int, float)) or isinstance(time, bool):
        raise ModelFormatError("$.time", "expected a number")
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise ModelFormatError("$.options", "expected an object")
    metadata = dict(data.get("metadata", {}))
    metadata["options"] = options
    try:
        return SensingModel(dim, gens, strong, weak, cost_matrix=w, time=float(time),
                            name=str(data.get("name", "")), metadata=metadata)
    except ValueError as exc:
        field = "$.generators" if "generators" in str(exc) or "Hermitian" in str(exc) else "$"
        raise ModelFormatError(field, str(exc)) from None


def model_to_dict(model: SensingModel) -> dict:
    metadata = {k: v for k, v in model.metadata.items() if k != "options"}
    out = {
        "schema": SCHEMA,
        "name": model.name,
        "dim": model.dim,
        "generators": [_encode_matrix(g) for g in model.generators],
        "strong_lindblads": [_encode_matrix(l) for l in model.strong_lindblads],
        "weak_lindblads": [_encode_matrix(l) for l in model.weak_lindblads],
        "cost_matrix": np.asarray(model.cost_matrix, dtype=float).tolist(),
        "time": model.time,
        "options": model.metadata.get("options", {}),
    }
    if metadata:
        out["metadata"] = metadata
    return out


def load_model(path) -> SensingModel:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return model_from_dict(data)


def save_model(model: SensingModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def resolve_model(arg: str) -> SensingModel:
    """A model file path, or a builtin spec such as ``su_d_jz:3``."""
    p = Path(arg)
    if p.exists():
        return load_model(p)
    name = arg.partition(":")[0]
    if name in BUILTINS:
        name, params = parse_builtin_spec(arg)
        return builtin_model(name, **params)
    raise FileNotFoundError(f"{arg!r} is neither a model file nor a builtin model")


# code artifacts

CODE_SCHEMA = "jointqec-code/1"


def _encode_vector(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).ravel()]


def _decode_vector(obj, path: str, n: int) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != n:
        raise ModelFormatError(path, f"expected {n} [re, im] pairs")
    out = np.zeros(n, dtype=complex)
    for i, pair in enumerate(obj):
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
            raise ModelFormatError(f"{path}[{i}]", "expected a [re, im] pair of numbers")
        out[i] = complex(*pair)
    return out


def code_to_dict(code, protocol=None, extra: dict | None = None) -> dict:
    """Code states (system index slow) and, optionally, the measurement and estimator."""
    out = {
        "schema": CODE_SCHEMA,
        "dim_system": code.layout.dim_system,
        "dim_ancilla": code.layout.dim_ancilla,
        "states": [_encode_vector(s) for s in code.states],
    }
    if protocol is not None:
        out["measurement"] = {
            "basis": [_encode_vector(b) for b in protocol.basis],
            "estimators": np.asarray(protocol.estimators, dtype=float).tolist(),
        }
    if extra:
        out.update(extra)
    return out


def code_from_dict(data: dict):
    from .codes import CodeSpace

    if not isinstance(data, dict):
        raise ModelFormatError("$", "expected an object")
    if data.get("schema") != CODE_SCHEMA:
        raise ModelFormatError("$.schema", f"unsupported schema {data.get('schema')!r}, expected {CODE_SCHEMA!r}")
    dims = []
    for key in ("dim_system", "dim_ancilla"):
        v = data.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ModelFormatError(f"$.{key}", "expected a positive integer")
        dims.append(v)
    states = data.get("states")
    if not isinstance(states, list) or not states:
        raise ModelFormatError("$.states", "expected a non-empty list of states")
    n = dims[0] * dims[1]
    vecs = [_decode_vector(s, f"$.states[{k}]", n) for k, s in enumerate(states)]
    return CodeSpace.from_states(vecs, dims[0])


def save_code(path, code, protocol=None, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(code_to_dict(code, protocol, extra), indent=1) + "\n")


def load_code(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return code_from_dict(data)
