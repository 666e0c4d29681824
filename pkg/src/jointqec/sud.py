"""Analytic codes for the SU(d) generators under ``J_z`` dephasing.

Spin labels ``m = j, j-1, ..., -j`` map to matrix indices ``j - m``. The
generators split into real off-diagonal ``G^R_kl``, imaginary off-diagonal
``G^I_kl`` and ``d - 3`` diagonal ones. Each group gets its own code:

* real and imaginary: input ``sum_m |m>|m>_A / sqrt(d)`` and, per pair,
  ``p (|k>|l>_A +/- |l>|k>_A)/sqrt2 + q|j>|klj>_B + r|-j>|kl(-j)>_B + s|0>|kl0>_B``
  with ``q^2, r^2, s^2`` fixed by the error-correction conditions;
* diagonal: purifications of ``G_+`` and ``G_-`` (the positive and negative
  parts) on orthogonal ancilla sectors, one two-state code per generator.

Only integer ``j`` (odd ``d``) is built; the ``|0>`` level used by ``s``
does not exist for half-integer spin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import CodeSpace, protocol_cost, qfi_and_compatibility, verify_qec
from .models import su_d_jz_generators
from .operators import spin_z

DEFAULT_P2 = 1 / 6


class AppendixDError(ValueError):
    pass


@dataclass
class PairCoefficients:
    k: int
    l: int
    p: float
    q: float
    r: float
    s: float

    @property
    def norm_residual(self) -> float:
        return abs(self.p ** 2 + self.q ** 2 + self.r ** 2 + self.s ** 2 - 1)


def pair_coefficients(j: int, k: int, l: int, p2: float = DEFAULT_P2) -> PairCoefficients:
    """``(p, q, r, s)`` for the pair of spin labels ``(k, l)``; raises if a square is negative."""
    target = j * (j + 1) / 3
    q2 = (target - p2 / 2 * (k * k + l * l + j * (k + l))) / (2 * j * j)
    r2 = (target - p2 / 2 * (k * k + l * l - j * (k + l))) / (2 * j * j)
    s2 = 1 - p2 - (target - p2 / 2 * (k * k + l * l)) / (j * j)
    squares = np.array([p2, q2, r2, s2])
    if np.any(squares < -1e-14):
        raise AppendixDError(f"negative coefficient square for (k, l) = ({k}, {l}): {squares}")
    p, q, r, s = np.sqrt(np.clip(squares, 0, None))
    return PairCoefficients(k, l, float(p), float(q), float(r), float(s))


@dataclass
class AnalyticSudCode:
    j: int
    real_code: CodeSpace
    imag_code: CodeSpace
    diag_codes: list[CodeSpace]
    coefficients: list[PairCoefficients]
    real_generators: list[np.ndarray]
    imag_generators: list[np.ndarray]
    diag_generators: list[np.ndarray]
    p2: float = DEFAULT_P2

    @property
    def d(self) -> int:
        return 2 * self.j + 1

    @property
    def predicted_pair_fisher(self) -> float:
        return 4 * self.p2 / self.d

    @property
    def predicted_real_cost(self) -> float:
        return 3 * self.j * self.d ** 2 / 2


def _family_code(j: int, pairs, coeffs, sign: float, phase: complex) -> CodeSpace:
    d = 2 * j + 1
    n_anc = d + 3 * len(pairs)
    states = [(np.eye(d, n_anc, dtype=complex) / np.sqrt(d)).ravel()]
    top, bottom, middle = 0, d - 1, j
    for n, ((a, b), c) in enumerate(zip(pairs, coeffs)):
        v = np.zeros((d, n_anc), dtype=complex)
        v[a, b] += c.p / np.sqrt(2)
        v[b, a] += sign * c.p / np.sqrt(2)
        v[top, d + 3 * n] += c.q
        v[bottom, d + 3 * n + 1] += c.r
        v[middle, d + 3 * n + 2] += c.s
        states.append(phase * v.ravel())
    return CodeSpace.from_states(states, d, metadata={"j": j})


def _diag_code(g: np.ndarray) -> CodeSpace:
    """``c_0 = (c_+ + c_-)/sqrt2``, ``c_1 = i (c_+ - c_-)/sqrt2`` with ``c_+-`` purifying ``G_+-``."""
    diag = np.diag(g).real
    d = diag.size
    half = np.abs(diag).sum() / 2
    plus = np.zeros((d, 2 * d), dtype=complex)
    minus = np.zeros((d, 2 * d), dtype=complex)
    idx = np.arange(d)
    plus[idx, idx] = np.sqrt(np.clip(diag, 0, None) / half)
    minus[idx, d + idx] = np.sqrt(np.clip(-diag, 0, None) / half)
    cp, cm = plus.ravel(), minus.ravel()
    return CodeSpace.from_states([(cp + cm) / np.sqrt(2), 1j * (cp - cm) / np.sqrt(2)], d)


def appendix_d_code(j, p2: float = DEFAULT_P2) -> AnalyticSudCode:
    """Real, imaginary and diagonal family codes for spin ``j`` (integer, ``j >= 1``)."""
    if int(j) != j or j < 1:
        raise AppendixDError(f"only integer spin j >= 1 is supported, got {j}")
    j = int(j)
    d = 2 * j + 1
    pairs = [(a, b) for a in range(d) for b in range(a + 1, d)]
    coeffs = [pair_coefficients(j, j - a, j - b, p2) for a, b in pairs]
    gens = su_d_jz_generators(d)
    n_pairs = len(pairs)
    real_gens = gens[:n_pairs]
    imag_gens = gens[n_pairs:2 * n_pairs]
    diag_gens = gens[2 * n_pairs:]
    # G^R c_0 is real; the extra i puts it in the imaginary part read off by the estimator
    real_code = _family_code(j, pairs, coeffs, +1.0, 1j)
    # G^I in Gell-Mann order is -i(|a><b| - |b><a|)/sqrt2
    imag_code = _family_code(j, pairs, coeffs, -1.0, -1.0)
    diag_codes = [_diag_code(g) for g in diag_gens]
    return AnalyticSudCode(j, real_code, imag_code, diag_codes, coeffs, real_gens, imag_gens, diag_gens, p2)


@dataclass
class AppendixDReport:
    coefficient_residual: float
    condition_residual: float
    orthonormality_residual: float
    qec_residuals: dict
    real_fisher: np.ndarray
    imag_fisher: np.ndarray
    compatibility: float
    diag_fishers: np.ndarray
    real_cost: float
    imag_cost: float
    diag_cost: float
    family_costs: dict = field(default_factory=dict)

    @property
    def combined_cost(self) -> float:
        """Families run with the optimal probabilities ``~ sqrt(C_f)``."""
        vals = [c for c in self.family_costs.values() if c > 0]
        return float(sum(np.sqrt(vals)) ** 2)

    @property
    def max_qec_residual(self) -> float:
        return max(self.qec_residuals.values())


def verify_appendix_d(code: AnalyticSudCode) -> AppendixDReport:
    """Coefficient relations, error correction, QFI and costs at ``T = 1``."""
    j, d = code.j, code.d
    jz = spin_z(d)
    span = [np.eye(d, dtype=complex), jz, jz @ jz]
    target = j * (j + 1) / 3
    coef_res = max(c.norm_residual for c in code.coefficients)
    cond = 0.0
    for c in code.coefficients:
        cond = max(cond,
                   abs(c.p ** 2 / 2 * (c.k + c.l) + (c.q ** 2 - c.r ** 2) * j),
                   abs(c.p ** 2 / 2 * (c.k ** 2 + c.l ** 2) + (c.q ** 2 + c.r ** 2) * j * j - target))
    codes = {"real": code.real_code, "imag": code.imag_code}
    codes.update({f"diag{i}": c for i, c in enumerate(code.diag_codes)})
    qec = {name: verify_qec(c, span, 1e-8).max_residual for name, c in codes.items()}
    ortho = max(c.orthonormality_residual() for c in codes.values())

    real = qfi_and_compatibility(code.real_code, code.real_generators)
    imag = qfi_and_compatibility(code.imag_code, code.imag_generators)
    eye = np.eye(len(code.real_generators))
    real_cost = protocol_cost(code.real_code, code.real_generators, eye, 1.0).cost
    imag_cost = protocol_cost(code.imag_code, code.imag_generators, eye, 1.0).cost
    diag_f = np.array([
        1 / protocol_cost(c, [g], np.eye(1), 1.0).cost for c, g in zip(code.diag_codes, code.diag_generators)
    ])
    n_diag = len(diag_f)
    # uniform mixture over the diagonal parameters
    diag_cost = float(n_diag * np.sum(1 / diag_f)) if n_diag else 0.0
    return AppendixDReport(
        coefficient_residual=float(coef_res),
        condition_residual=float(cond),
        orthonormality_residual=float(ortho),
        qec_residuals=qec,
        real_fisher=real.fisher,
        imag_fisher=imag.fisher,
        compatibility=max(real.compatibility, imag.compatibility),
        diag_fishers=diag_f,
        real_cost=real_cost,
        imag_cost=imag_cost,
        diag_cost=diag_cost,
        family_costs={"real": real_cost, "imag": imag_cost, "diag": diag_cost},
    )


def appendix_d_cost(d: int) -> float:
    """Combined construction cost at ``T = 1``; NaN for even ``d`` (not constructed)."""
    if d % 2 == 0:
        return float("nan")
    return verify_appendix_d(appendix_d_code((d - 1) // 2)).combined_cost
