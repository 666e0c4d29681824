"""Closed-form codes and states used as references for the numerical pipeline."""
from __future__ import annotations

import numpy as np

from .codes import CodeSpace

UP, DOWN = 0, 1


def _two_qubit(a: int, b: int) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[2 * a + b] = 1.0
    return v


PHI_PLUS = (_two_qubit(UP, UP) + _two_qubit(DOWN, DOWN)) / np.sqrt(2)
PHI_MINUS = (_two_qubit(UP, UP) - _two_qubit(DOWN, DOWN)) / np.sqrt(2)
PSI_PLUS = (_two_qubit(UP, DOWN) + _two_qubit(DOWN, UP)) / np.sqrt(2)
PSI_MINUS = (_two_qubit(UP, DOWN) - _two_qubit(DOWN, UP)) / np.sqrt(2)


def two_qubit_cos_phi() -> float:
    """Optimal mixing angle of the anticorrelated two-qubit code, about 0.39."""
    return float(np.sqrt((np.sqrt(7 + 4 * np.sqrt(2)) - 3) / (4 * np.sqrt(2) - 2)))


def _with_ancilla(terms, n_anc: int) -> np.ndarray:
    """``sum coeff * |system> |label>_A`` with ancilla labels starting at 1."""
    out = np.zeros((4, n_anc), dtype=complex)
    for coeff, sys, label in terms:
        out[:, label - 1] += coeff * sys
    return out.ravel()


def two_qubit_code(cos_phi: float | None = None) -> CodeSpace:
    """Four-state code for the anticorrelated two-qubit model, ancilla labels 1..4.

    Every state carries weight ``b^2 = 1 - 2 cos^2(phi)`` on the ``Phi`` Bell
    states and ``a^2 = 2 cos^2(phi)`` on ``Psi_+``, which makes ``sz1 sz2``
    act as a multiple of the identity on the code; ``Psi_-`` never appears,
    so ``sz1 - sz2`` has vanishing matrix elements. The cost is
    ``2 / (4 a^2 b^2 (1 + 1/sqrt(2))^2) + 1 / (4 b^4)`` at ``T = 1``.
    """
    c = two_qubit_cos_phi() if cos_phi is None else float(cos_phi)
    if not 0 <= 2 * c * c < 1:
        raise ValueError("need 2 cos^2(phi) < 1")
    a = np.sqrt(2) * c
    b = np.sqrt(1 - 2 * c * c)
    r2 = np.sqrt(2)
    states = [
        _with_ancilla([(a, PSI_PLUS, 1), (b / r2, PHI_PLUS, 2), (1j * b / r2, PHI_MINUS, 3)], 4),
        _with_ancilla([(-1j * b, PHI_PLUS, 1), (-1j * a, PSI_PLUS, 2)], 4),
        _with_ancilla([(-b, PHI_MINUS, 1), (1j * a, PSI_PLUS, 3)], 4),
        _with_ancilla([(-1j * b / r2, PHI_MINUS, 2), (b / r2, PHI_PLUS, 3), (a, PSI_PLUS, 4)], 4),
    ]
    return CodeSpace.from_states(states, 4, metadata={"cos_phi": c})


def two_qubit_code_cost(cos_phi: float, time: float = 1.0) -> float:
    a2 = 2 * cos_phi ** 2
    b2 = 1 - a2
    k2 = (1 + 1 / np.sqrt(2)) ** 2
    return (2 / (4 * a2 * b2 * k2) + 1 / (4 * b2 * b2)) / time ** 2


def dfs_code() -> CodeSpace:
    """Decoherence-free code ``span{psi_z, (sz1 + sz2)/2 psi_z}`` sensing the z-field."""
    # (sz1 + sz2)/2 maps PHI_PLUS to PHI_MINUS; phase i makes D real
    return CodeSpace.from_states([PHI_PLUS, 1j * PHI_MINUS], 4)


def max_advantage_code(p: int, phased: bool = True) -> CodeSpace:
    """``c_0 = |0>``, ``c_i = i|i>`` (or ``|i>`` unphased) on ``P + 1`` levels, trivial ancilla."""
    states = np.eye(p + 1, dtype=complex)
    if phased:
        states[1:] *= 1j
    return CodeSpace.from_states(states, p + 1)


def max_entangled_state(d: int) -> np.ndarray:
    """``sum_k |k>|k> / sqrt(d)`` on system (x) ancilla of equal dimension."""
    return (np.eye(d, dtype=complex) / np.sqrt(d)).ravel()
