"""Separate estimation: one two-dimensional code per parameter.

The precision of parameter ``i`` after a reparametrization ``w~ = A^{-T} w``
(new generators ``G~_i = sum_k A_ik G_k``) is set by the distance

    m_i = min ||G~_i - X||,  X in S + span{G~_j : j != i},

with ``F_i = 4 T^2 m_i^2``. By norm duality ``m_i = 1 / N*(b_i)`` where ``b_i``
is column ``i`` of ``B = A^{-1}`` and

    N*(b) = max b.c  s.t.  -I <= sum_k c_k G_k + s <= I,  s in S.

The search therefore moves one column of ``B`` at a time and solves a single
small SDP per trial point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .codes import CodeSpace, Protocol, verify_qec
from .lindblad import LindbladSpan, SensingModel, build_lindblad_span, check_hnls
from .operators import common_blocks, orthonormalize_hermitian_set, spread
from .sdp import FixedConstraintSdp, LmiBlock, SdpProblem, embed_hermitian_lmi, solve_sdp

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = 64
DEFAULT_SEED = 0
MAX_CONDITION = 1e10


class SepError(ValueError):
    """A parameter cannot be estimated separately (or the search cannot start)."""


def _span_ops(span) -> list[np.ndarray]:
    if isinstance(span, LindbladSpan):
        return list(span.basis)
    ops = [np.asarray(s, dtype=complex) for s in span]
    if not ops:
        raise ValueError("span must contain at least the identity")
    d = ops[0].shape[0]
    # the Lindblad span always contains the identity
    basis, _ = orthonormalize_hermitian_set([np.eye(d, dtype=complex)] + ops)
    return basis


class _TwoSidedNorm:
    """LMIs ``alpha I + sum_k x_k beta_k I  +/-  (H0 + sum_k x_k H_k) >= 0`` in common blocks.

    ``x`` is the variable vector. One LMI pair per block of the common block
    decomposition; identical scalar blocks are kept once.
    """

    def __init__(self, alpha: float, h0: np.ndarray | None, beta: np.ndarray, h_ops: Sequence[np.ndarray]):
        d = h_ops[0].shape[0]
        h0 = np.zeros((d, d), dtype=complex) if h0 is None else np.asarray(h0, dtype=complex)
        self.blocks: list[LmiBlock] = []
        n = len(h_ops)
        seen = set()
        for v in common_blocks([h0] + list(h_ops)):
            k = v.shape[1]
            r0 = v.conj().T @ h0 @ v
            rs = [v.conj().T @ h @ v for h in h_ops]
            if k == 1:
                row = np.array([r0[0, 0].real] + [r[0, 0].real for r in rs])
                key = tuple(np.round(row, 12))
                if key in seen:
                    continue
                seen.add(key)
                for sign in (1.0, -1.0):
                    coeffs = sp.csc_matrix((beta + sign * row[1:]).reshape(1, n))
                    self.blocks.append(LmiBlock(np.array([[alpha + sign * row[0]]]), coeffs))
                continue
            eye = np.eye(k)
            for sign in (1.0, -1.0):
                f0 = alpha * eye + sign * r0
                fs = [beta[j] * eye + sign * rs[j] for j in range(n)]
                if np.isrealobj(v):
                    self.blocks.append(LmiBlock.from_dense(f0.real, [f.real for f in fs]))
                else:
                    self.blocks.append(embed_hermitian_lmi(f0, fs))


def distance_to_span(generator: np.ndarray, basis: Sequence[np.ndarray], tol: float = 1e-8) -> float:
    """``min ||G - sum_j a_j B_j||`` over real ``a`` (operator norm), by SDP."""
    g = np.asarray(generator, dtype=complex)
    basis = list(basis)
    n = len(basis)
    # variables (t, a): t I +/- (G - sum a_j B_j) >= 0
    h_ops = [np.zeros_like(g)] + [-b for b in basis]
    beta = np.zeros(n + 1)
    beta[0] = 1.0
    lmi = _TwoSidedNorm(0.0, g, beta, h_ops)
    c = np.zeros(n + 1)
    c[0] = 1.0
    sol = solve_sdp(SdpProblem(c, lmi.blocks), gap_tol=tol, feas_tol=tol)
    if not sol.ok:
        raise RuntimeError(f"distance SDP failed: {sol.status} {sol.message}")
    return float(sol.objective_value)


def single_param_fisher(generator, span, other_generators: Sequence[np.ndarray] = (), time: float = 1.0,
                        tol: float = 1e-8) -> float:
    """``F = 4 T^2 m^2`` with ``m`` the distance from ``generator`` to ``span + other_generators``.

    Raises :class:`SepError` when the generator lies in the enlarged span.
    """
    g = np.asarray(generator, dtype=complex)
    basis, _ = orthonormalize_hermitian_set(_span_ops(span) + [np.asarray(o, dtype=complex) for o in other_generators])
    m = distance_to_span(g, basis, tol)
    if m <= max(tol, 1e-9 * np.linalg.norm(g, 2)):
        raise SepError("generator lies in the enlarged span; the parameter cannot be sensed separately")
    return 4 * time ** 2 * m * m


def sep_cost(fishers, w_diag) -> tuple[np.ndarray, float]:
    """Optimal weights ``p_i ~ sqrt(W_ii / F_i)`` and cost ``(sum_i sqrt(W_ii / F_i))^2``."""
    f = np.asarray(fishers, dtype=float)
    w = np.asarray(w_diag, dtype=float)
    if f.shape != w.shape:
        raise ValueError("fishers and weights differ in length")
    if np.any(f <= 0):
        raise ValueError("Fisher informations must be positive")
    r = np.sqrt(w / f)
    return r / r.sum(), float(r.sum() ** 2)


class DualNorm:
    """``N*(b) = max b.c`` over ``||sum_k c_k G_k + s|| <= 1``, ``s`` in the span."""

    def __init__(self, generators: Sequence[np.ndarray], span, tol: float = 1e-8):
        gens = [np.asarray(g, dtype=complex) for g in generators]
        self.span_ops = _span_ops(span)
        self.p = len(gens)
        h_ops = gens + self.span_ops
        lmi = _TwoSidedNorm(1.0, None, np.zeros(len(h_ops)), h_ops)
        self.block_sizes = [b.size for b in lmi.blocks]
        self._sdp = FixedConstraintSdp(lmi.blocks, gap_tol=tol, feas_tol=tol)

    def __call__(self, b: np.ndarray) -> float:
        c = np.zeros(self._sdp.template.n_vars)
        c[:self.p] = -np.asarray(b, dtype=float)
        sol = self._sdp.solve(c)
        if not sol.ok:
            raise RuntimeError(f"dual norm SDP failed: {sol.status} {sol.message}")
        return -sol.objective_value

    @property
    def n_solves(self) -> int:
        return self._sdp.n_solves


@dataclass
class SepSolution:
    """Best-found separate protocol; ``transform`` has unit rows."""

    transform: np.ndarray
    fishers: np.ndarray
    weights: np.ndarray
    cost: float
    identity_cost: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def transformed_generators_coefficients(self) -> np.ndarray:
        return self.transform


def _normalize_columns(b: np.ndarray) -> np.ndarray:
    return b / np.linalg.norm(b, axis=0)


def _random_rotation(rng: np.random.Generator, p: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(p, p)))
    return q * np.sign(np.diag(r))


class _Objective:
    """``T^2 cost(B) = (sum_i ||W^{1/2} a_i|| N*(b_i))^2 / 4`` with ``A = B^{-1}``."""

    def __init__(self, dual: DualNorm, cost_matrix: np.ndarray, time: float):
        self.dual = dual
        self.w = np.asarray(cost_matrix, dtype=float)
        self.time = time

    def value(self, b: np.ndarray, norms: np.ndarray) -> float:
        if np.linalg.cond(b) > MAX_CONDITION:
            return np.inf
        a = np.linalg.inv(b)
        w_tilde = np.einsum("ik,kl,il->i", a, self.w, a)
        return float(np.sum(np.sqrt(w_tilde) * norms) ** 2 / (4 * self.time ** 2))


def _descend(obj: _Objective, b: np.ndarray, rng: np.random.Generator, step: float, min_step: float,
             max_sweeps: int = 10_000) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Column-wise compass search with step halving; directions re-drawn every sweep."""
    p = b.shape[0]
    b = _normalize_columns(b)
    norms = np.array([obj.dual(b[:, i]) for i in range(p)])
    best = obj.value(b, norms)
    sweeps = 0
    while step >= min_step and sweeps < max_sweeps:
        sweeps += 1
        frame = _random_rotation(rng, p)
        improved = False
        for i in range(p):
            for k in range(p):
                for sign in (1.0, -1.0):
                    col = b[:, i] + sign * step * frame[:, k]
                    col /= np.linalg.norm(col)
                    trial = b.copy()
                    trial[:, i] = col
                    if np.linalg.cond(trial) > MAX_CONDITION:
                        continue
                    trial_norms = norms.copy()
                    trial_norms[i] = obj.dual(col)
                    val = obj.value(trial, trial_norms)
                    if val >= best - 1e-15 * max(1.0, best):
                        continue
                    b, norms, best, improved = trial, trial_norms, val, True
                    # keep going while the same move pays off
                    while True:
                        col = b[:, i] + sign * step * frame[:, k]
                        col /= np.linalg.norm(col)
                        trial = b.copy()
                        trial[:, i] = col
                        if np.linalg.cond(trial) > MAX_CONDITION:
                            break
                        trial_norms = norms.copy()
                        trial_norms[i] = obj.dual(col)
                        val = obj.value(trial, trial_norms)
                        if val >= best - 1e-15 * max(1.0, best):
                            break
                        b, norms, best = trial, trial_norms, val
                    break
        if not improved:
            step /= 2
    return b, norms, best, sweeps


def optimize_sep_transform(model: SensingModel, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                           tol: float = 1e-8, initial_step: float = 0.5, screen_step: float = 2.0 ** -4,
                           min_step: float = 1e-5) -> SepSolution:
    """Best-found minimum over transforms of the separate cost, with seeded restarts.

    Restart ``r`` starts from a random ``B`` drawn from the ``r``-th child of
    ``SeedSequence(seed)`` and descends until the step drops below
    ``screen_step``. A restart whose screened cost beats every earlier one is
    refined down to ``min_step``. That rule only looks at earlier restarts, so
    adding restarts never worsens the result. ``A = I`` is always evaluated.
    Ties are broken by restart index (``-1`` for the identity).
    """
    verdict = check_hnls(model)
    if not verdict.achievable:
        raise SepError("HNLS does not hold; no separate protocol reaches Heisenberg scaling")
    p = model.n_params
    dual = DualNorm(model.generators, verdict.span, tol)
    obj = _Objective(dual, model.cost_matrix, model.time)

    eye = np.eye(p)
    id_norms = np.array([dual(eye[:, i]) for i in range(p)])
    id_cost = obj.value(eye, id_norms)
    candidates = [(id_cost, -1, eye, id_norms)]
    sweeps_total = 0
    record = np.inf
    refined = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(child)
        b, norms, val, sweeps = _descend(obj, rng.normal(size=(p, p)), rng, initial_step, screen_step)
        sweeps_total += sweeps
        if val < record:
            record = val
            refined.append(r)
            b, norms, val, sweeps = _descend(obj, b, rng, screen_step / 2, min_step)
            sweeps_total += sweeps
        candidates.append((val, r, b, norms))
        log.debug("sep restart %d: cost %.10g", r, val)
    candidates.sort(key=lambda t: (t[0], t[1]))
    best_val, best_r, b, norms = candidates[0]

    a = np.linalg.inv(b)
    a = a / np.linalg.norm(a, axis=1)[:, None]
    w_tilde = np.diag(a @ obj.w @ a.T)
    # recompute with the primal distance problem for each new generator
    new_gens = [sum(a[i, k] * model.generators[k] for k in range(p)) for i in range(p)]
    fishers = np.array([
        single_param_fisher(new_gens[i], verdict.span, [new_gens[j] for j in range(p) if j != i], model.time, tol)
        for i in range(p)
    ])
    weights, cost = sep_cost(fishers, w_tilde)
    diagnostics = {
        "restarts": restarts,
        "seed": seed,
        "best_restart": best_r,
        "refined_restarts": refined,
        "search_cost": best_val,
        "dual_norm_solves": dual.n_solves,
        "sweeps": sweeps_total,
        "block_sizes": dual.block_sizes,
    }
    return SepSolution(a, fishers, weights, cost, id_cost, diagnostics)


@dataclass
class BoundReport:
    """Lower bounds on separate and joint costs (``None`` when ``W != I``)."""

    sep_lower_bound: float | None
    sep_lower_bound_certified: float | None
    jnt_lower_bound: float | None
    qfi_trace_bound: float | None
    spreads: np.ndarray
    max_spread: float
    max_spread_direction: np.ndarray
    certified_max_spread: float


def _unit_spread(gens: Sequence[np.ndarray], a: np.ndarray) -> float:
    return spread(sum(a[k] * gens[k] for k in range(len(gens))))


def max_spread_search(gens: Sequence[np.ndarray], restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                      initial_step: float = 0.5, min_step: float = 1e-8) -> tuple[float, np.ndarray]:
    """Best-found ``max spread(sum_i a_i G_i)`` over unit ``a``; coordinate search from seeded starts."""
    p = len(gens)
    starts = [np.eye(p)[i] for i in range(p)]
    for child in np.random.SeedSequence(seed).spawn(restarts):
        starts.append(np.random.default_rng(child).normal(size=p))
    best, best_a = -np.inf, None
    for a in starts:
        a = a / np.linalg.norm(a)
        val = _unit_spread(gens, a)
        step = initial_step
        while step >= min_step:
            improved = False
            for k in range(p):
                for sign in (1.0, -1.0):
                    trial = a.copy()
                    trial[k] += sign * step
                    trial /= np.linalg.norm(trial)
                    v = _unit_spread(gens, trial)
                    if v > val + 1e-15:
                        a, val, improved = trial, v, True
            if not improved:
                step /= 2
        if val > best + 1e-12:
            best, best_a = val, a
    return float(best), best_a


def bounds(model: SensingModel, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED) -> BoundReport:
    """Spread and QFI based lower bounds; the W = I bounds are skipped for other W."""
    p = model.n_params
    t2 = model.time ** 2
    gens = model.generators
    spreads = np.array([spread(g) for g in gens])
    s_max, direction = max_spread_search(gens, restarts, seed)
    # spread(X) <= sqrt(2) ||X - Tr(X)/d||_HS, so sqrt(2 lam_max) of the traceless Gram bounds every unit combination
    d = model.dim
    traceless = [g - np.trace(g) / d * np.eye(d) for g in gens]
    gram = np.array([[np.trace(x @ y).real for y in traceless] for x in traceless])
    certified = float(np.sqrt(2 * max(np.linalg.eigvalsh(gram)[-1], 0.0)))
    identity = np.allclose(model.cost_matrix, np.eye(p), atol=1e-12)
    if not identity:
        return BoundReport(None, None, None, None, spreads, s_max, direction, certified)
    total = sum(g @ g for g in gens)
    lam = float(np.linalg.eigvalsh(total)[-1])
    return BoundReport(
        sep_lower_bound=p * p / (t2 * s_max ** 2),
        sep_lower_bound_certified=p * p / (t2 * certified ** 2),
        jnt_lower_bound=float(np.min(p / (t2 * spreads ** 2))),
        qfi_trace_bound=p * p / (4 * t2 * lam),
        spreads=spreads,
        max_spread=s_max,
        max_spread_direction=direction,
        certified_max_spread=certified,
    )


@dataclass
class SepFromJntReport:
    """Two-state codes ``{c^i_0, c^i_1}`` built from the joint x-vectors, one per parameter."""

    codes: list[CodeSpace]
    x_norms: np.ndarray
    off_diagonal: np.ndarray
    expected_off_diagonal: np.ndarray
    diagonal_mismatch: float
    qec_residuals: np.ndarray
    fishers: np.ndarray
    uniform_cost: float
    optimal_cost: float
    joint_cost: float
    tol: float

    @property
    def off_diagonal_residual(self) -> float:
        return float(np.abs(self.off_diagonal - self.expected_off_diagonal).max())

    @property
    def passed(self) -> bool:
        return max(self.off_diagonal_residual, self.diagonal_mismatch, self.qec_residuals.max()) <= self.tol


def sep_from_jnt(protocol: Protocol, model: SensingModel, tol: float = 1e-7) -> SepFromJntReport:
    """Separate protocol with cost ``P`` times the joint one (for diagonal ``W``).

    ``c0 = (psi|0> + i x^|1>)/sqrt2`` and ``c1 = (i x^|0> + psi|1>)/sqrt2`` with
    ``x^ = x_i/|x_i|``. Then ``<c0|G_j|c1> = Im<x^|G_j|psi> = delta_ij / (2T|x_i|)``
    and the diagonal elements coincide, so the code is error correcting for the
    span enlarged by the other generators. Each parameter gets ``F_i = 1/|x_i|^2``;
    using it with probability ``1/P`` costs ``sum_i P W_ii |x_i|^2``.
    """
    gens = [np.asarray(g, dtype=complex) for g in model.generators]
    p = len(gens)
    t = model.time
    span = list(build_lindblad_span(model.dim, model.strong_lindblads).basis)
    psi = protocol.input_state
    xs = protocol.x_vectors
    norms = np.sqrt(np.einsum("ij,ij->i", xs.conj(), xs).real)
    off = np.zeros((p, p))
    mismatch = 0.0
    residuals = np.zeros(p)
    codes = []
    for i in range(p):
        xhat = xs[i] / norms[i]
        c0 = np.stack([psi, 1j * xhat], axis=1).ravel() / np.sqrt(2)
        c1 = np.stack([1j * xhat, psi], axis=1).ravel() / np.sqrt(2)
        code = CodeSpace.from_states([c0, c1], model.dim)
        for j, g in enumerate(gens):
            m = code.matrix_elements(g)
            off[i, j] = m[0, 1].real
            mismatch = max(mismatch, abs(m[0, 0] - m[1, 1]), abs(m[0, 1].imag))
        others = [gens[j] for j in range(p) if j != i]
        residuals[i] = verify_qec(code, span + others, tol).max_residual
        codes.append(code)
    fishers = 1 / norms ** 2
    w_diag = np.diag(model.cost_matrix)
    _, optimal = sep_cost(fishers, w_diag)
    return SepFromJntReport(
        codes=codes,
        x_norms=norms,
        off_diagonal=off,
        expected_off_diagonal=np.diag(1 / (2 * t * norms)),
        diagonal_mismatch=float(mismatch),
        qec_residuals=residuals,
        fishers=fishers,
        uniform_cost=float(p * np.sum(w_diag * norms ** 2)),
        optimal_cost=optimal,
        joint_cost=float(np.trace(model.cost_matrix @ (xs.conj() @ xs.T).real)),
        tol=tol,
    )
