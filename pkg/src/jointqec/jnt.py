"""Optimal joint error-corrected protocol as a semidefinite program.

The code is encoded in a PSD matrix ``Q`` on reference (dimension ``P+1``)
times system (dimension ``d``), reference factor first::

    Q = 1 (x) 1/d + sum_i (G^eff_i)^T (x) G_i + sum_i nu_i 1 (x) S_i + sum_i B_i (x) R_i

with ``{1/sqrt(d), G_i, S_i, R_i}`` an orthonormal Hermitian basis in which
the ``G_i`` are orthonormalized generators orthogonal to the Lindblad span,
the ``S_i`` span the rest of it and the ``R_i`` complete the basis. The
precision of the optimal estimator for that code is read from
``Gamma_ij = Im[G^eff_j]_{i0}`` through two Schur-complement blocks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lindblad import HnlsVerdict, LindbladSpan, SensingModel, check_hnls
from .operators import gell_mann_basis, gram_matrix, hs_inner, orthonormalize_hermitian_set
from .sdp import NUMERICAL_FAILURE, LmiBlock, SdpProblem, SdpSolution, embed_hermitian_lmi, solve_sdp

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-9
# largest PSD violation, in units of the tolerance, that the Q repair will absorb
REPAIR_LIMIT = 100

# minimize Tr(K^2) through [[Y, K], [K, I]] >= 0, or the largest eigenvalue of K^2 times P
TRACE = "trace"
MAX_EIGENVALUE = "max-eigenvalue"


class HnlsViolation(ValueError):
    """Heisenberg scaling is not achievable for the requested parameters."""


class SolverFailure(RuntimeError):
    def __init__(self, message: str, solution: SdpSolution | None = None):
        super().__init__(message)
        self.solution = solution


@dataclass
class BasisPartition:
    dim: int
    identity: np.ndarray
    generators: list[np.ndarray]
    span_complements: list[np.ndarray]
    remainder: list[np.ndarray]

    @property
    def n_params(self) -> int:
        return len(self.generators)

    def all_elements(self) -> list[np.ndarray]:
        return [self.identity, *self.generators, *self.span_complements, *self.remainder]

    def counts(self) -> tuple[int, int, int, int]:
        return 1, len(self.generators), len(self.span_complements), len(self.remainder)


def build_basis_partition(span: LindbladSpan, generators: list[np.ndarray], tol: float = ORTHO_TOL) -> BasisPartition:
    """Complete ``{1/sqrt(d), G_i, S_i}`` to an orthonormal Hermitian basis with Gell-Mann matrices."""
    d = span.dim
    gram = gram_matrix(generators)
    if np.abs(gram - np.eye(len(generators))).max(initial=0.0) > tol:
        raise ValueError("generators are not orthonormal")
    overlap = max((abs(hs_inner(b, g)) for b in span.basis for g in generators), default=0.0)
    if overlap > tol:
        raise ValueError(f"generators overlap the Lindblad span ({overlap:.2e})")
    identity = span.basis[0]
    complements = list(span.without_identity())
    partial = [identity, *generators, *complements]
    basis, _ = orthonormalize_hermitian_set(partial + gell_mann_basis(d), tol)
    n = len(partial)
    # Gram-Schmidt leaves an orthonormal prefix unchanged up to rounding
    drift = max(np.abs(a - b).max() for a, b in zip(basis[:n], partial))
    if len(basis) != d * d or drift > 1e-8:
        raise ValueError("failed to complete the operator basis")
    return BasisPartition(d, identity, list(generators), complements, basis[n:])


def _hermitian_param_entries(n: int):
    """Entries of ``H^T`` for each real parameter of a Hermitian ``n x n`` matrix ``H``.

    Parameter order: diagonal, then for each ``k < l`` the real and the
    imaginary part of ``H_kl``. Returns arrays ``(param, row, col, value)``.
    """
    params, rows, cols, vals = [], [], [], []
    p = 0
    for k in range(n):
        params.append(p); rows.append(k); cols.append(k); vals.append(1.0)
        p += 1
    for k in range(n):
        for l in range(k + 1, n):
            params += [p, p]; rows += [k, l]; cols += [l, k]; vals += [1.0, 1.0]
            p += 1
            # H_kl = i b, H_lk = -i b; transposed: (l,k) -> i b, (k,l) -> -i b
            params += [p, p]; rows += [l, k]; cols += [k, l]; vals += [1j, -1j]
            p += 1
    return p, np.array(params), np.array(rows), np.array(cols), np.array(vals, dtype=complex)


def _hermitian_from_params(x: np.ndarray, n: int) -> np.ndarray:
    h = np.zeros((n, n), dtype=complex)
    h[np.arange(n), np.arange(n)] = x[:n]
    p = n
    for k in range(n):
        for l in range(k + 1, n):
            h[k, l] = x[p] + 1j * x[p + 1]
            h[l, k] = x[p] - 1j * x[p + 1]
            p += 2
    return h


def _imag_param_index(n: int, k: int, l: int) -> int:
    """Parameter index of ``Im H_kl`` (``k < l``) in the ordering above."""
    p = n
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) == (k, l):
                return p + 1
            p += 2
    raise IndexError((k, l))


def _kron_columns(entries, op: np.ndarray, offset: int, n_ref: int, n_total: int) -> sp.csc_matrix:
    """Columns ``vec(E_p (x) op)`` for every reference parameter ``p``, shifted by ``offset``."""
    n_par, pidx, kr, kc, kv = entries
    d = op.shape[0]
    s, t = np.nonzero(np.abs(op) > 0)
    ov = op[s, t]
    m = n_ref * d
    rows = (kr[:, None] * d + s[None, :]) * m + (kc[:, None] * d + t[None, :])
    data = kv[:, None] * ov[None, :]
    cols = np.broadcast_to(pidx[:, None] + offset, rows.shape)
    return sp.csc_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(m * m, n_total))


def _sym_pairs(p: int):
    return [(i, j) for i in range(p) for j in range(i, p)]


@dataclass
class JntLayout:
    """Offsets of each group of real decision variables."""

    n_ref: int
    n_herm: int
    n_params: int
    n_span: int
    n_remainder: int
    objective: str

    @property
    def geff(self) -> int:
        return 0

    @property
    def nu(self) -> int:
        return self.n_params * self.n_herm

    @property
    def b(self) -> int:
        return self.nu + self.n_span

    @property
    def k(self) -> int:
        return self.b + self.n_remainder * self.n_herm

    @property
    def y(self) -> int:
        return self.k + self.n_params * (self.n_params + 1) // 2

    @property
    def n_vars(self) -> int:
        tail = self.n_params * (self.n_params + 1) // 2 if self.objective == TRACE else 1
        return self.y + tail


def _symmetric_block_columns(p: int, offset: int, n_total: int, row0: int, col0: int, size: int):
    """Columns placing symmetric ``p x p`` variables at block position ``(row0, col0)`` of a ``size`` matrix."""
    rows, cols = [], []
    for v, (i, j) in enumerate(_sym_pairs(p)):
        rows.append((row0 + i) * size + col0 + j); cols.append(offset + v)
        if i != j:
            rows.append((row0 + j) * size + col0 + i); cols.append(offset + v)
    return sp.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(size * size, n_total))


def _sym_to_matrix(x: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros((p, p))
    for v, (i, j) in enumerate(_sym_pairs(p)):
        out[i, j] = out[j, i] = x[v]
    return out


def inverse_sqrt_psd(w: np.ndarray) -> np.ndarray:
    ev, vec = np.linalg.eigh(w)
    return (vec / np.sqrt(ev)) @ vec.T


def _gamma_map(layout: JntLayout, v: np.ndarray) -> sp.csr_matrix:
    """Linear map from the decision vector to ``M = Gamma W'^{-1/2}`` (row-major ``P x P``)."""
    p = layout.n_params
    n = layout.n_ref
    rows, cols, vals = [], [], []
    for i in range(p):
        for k in range(p):
            # Gamma_ik = Im[G^eff_k]_{i+1,0} = -Im[G^eff_k]_{0,i+1}
            var = layout.geff + k * layout.n_herm + _imag_param_index(n, 0, i + 1)
            for j in range(p):
                if v[k, j] != 0:
                    rows.append(i * p + j); cols.append(var); vals.append(-v[k, j])
    return sp.csr_matrix((vals, (rows, cols)), shape=(p * p, layout.n_vars))


def assemble_jnt_sdp(partition: BasisPartition, cost_matrix: np.ndarray, objective: str = TRACE):
    """Build the SDP; returns ``(problem, layout)``.

    ``cost_matrix`` must already be expressed in the frame of the
    orthonormal generators held by ``partition``.
    """
    if objective not in (TRACE, MAX_EIGENVALUE):
        raise ValueError(f"unknown objective {objective!r}")
    p = partition.n_params
    d = partition.dim
    n_ref = p + 1
    entries = _hermitian_param_entries(n_ref)
    layout = JntLayout(n_ref, entries[0], p, len(partition.span_complements), len(partition.remainder), objective)
    nv = layout.n_vars

    # (a) the code matrix Q on reference (x) system
    m = n_ref * d
    cols = []
    for i, g in enumerate(partition.generators):
        cols.append(_kron_columns(entries, g, layout.geff + i * layout.n_herm, n_ref, nv))
    ident_entries = (1, np.zeros(n_ref, dtype=int), np.arange(n_ref), np.arange(n_ref), np.ones(n_ref, dtype=complex))
    for i, s_op in enumerate(partition.span_complements):
        cols.append(_kron_columns(ident_entries, s_op, layout.nu + i, n_ref, nv))
    for i, r_op in enumerate(partition.remainder):
        cols.append(_kron_columns(entries, r_op, layout.b + i * layout.n_herm, n_ref, nv))
    q_coeffs = sum(cols[1:], cols[0]) if cols else sp.csc_matrix((m * m, nv), dtype=complex)
    q0 = np.eye(m, dtype=complex) / d
    q_block = embed_hermitian_lmi(q0, q_coeffs)

    # (b) K^2 bounded by Y (trace objective) or by w I
    size = 2 * p
    f0 = np.zeros((size, size))
    f0[p:, p:] = np.eye(p)
    kb = _symmetric_block_columns(p, layout.k, nv, 0, p, size) + _symmetric_block_columns(p, layout.k, nv, p, 0, size)
    if objective == TRACE:
        yb = _symmetric_block_columns(p, layout.y, nv, 0, 0, size)
    else:
        rows = [i * size + i for i in range(p)]
        yb = sp.csc_matrix((np.ones(p), (rows, [layout.y] * p)), shape=(size * size, nv))
    b_block = LmiBlock(f0, (kb + yb).tocsc())

    # (c) [[K, I], [I, M]] with M = Gamma W'^{-1/2} held symmetric by equalities
    v = inverse_sqrt_psd(cost_matrix)
    mmap = _gamma_map(layout, v)
    perm = np.array([j * p + i for i in range(p) for j in range(p)])
    msym = (mmap + mmap[perm, :]) / 2
    c0 = np.zeros((size, size))
    c0[:p, p:] = np.eye(p)
    c0[p:, :p] = np.eye(p)
    place = np.array([(p + i) * size + p + j for i in range(p) for j in range(p)])
    mcols = sp.csr_matrix((msym.data, msym.indices, msym.indptr), shape=msym.shape).tocoo()
    mcols = sp.csc_matrix((mcols.data, (place[mcols.row], mcols.col)), shape=(size * size, nv))
    c_block = LmiBlock(c0, (_symmetric_block_columns(p, layout.k, nv, 0, 0, size) + mcols).tocsc())

    upper = [(i, j) for i in range(p) for j in range(i + 1, p)]
    if upper:
        eq = sp.vstack([mmap[i * p + j] - mmap[j * p + i] for i, j in upper]).tocsr()
        rhs = np.zeros(len(upper))
    else:
        eq, rhs = None, None

    c = np.zeros(nv)
    if objective == TRACE:
        for vi, (i, j) in enumerate(_sym_pairs(p)):
            if i == j:
                c[layout.y + vi] = 1.0
    else:
        c[layout.y] = 1.0
    problem = SdpProblem(c, [q_block, b_block, c_block], eq, rhs)
    return problem, layout


@dataclass
class JntSolution:
    """Optimal joint protocol. Matrices live in the frame of the orthonormalized generators.

    ``transform`` maps projected generators to that frame (``G' = A G_perp``)
    and ``frame_cost_matrix`` is ``A W A^T``.
    """

    w: float
    cost: float
    effective_generators: list[np.ndarray]
    multipliers: np.ndarray
    b_matrices: list[np.ndarray]
    gamma: np.ndarray
    k_matrix: np.ndarray
    q_matrix: np.ndarray
    partition: BasisPartition
    transform: np.ndarray
    frame_cost_matrix: np.ndarray
    time: float
    objective: str = TRACE
    sdp: SdpSolution | None = None
    verdict: HnlsVerdict | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.effective_generators)


def reconstruct_q(partition: BasisPartition, geff, nu, bmats) -> np.ndarray:
    d = partition.dim
    n_ref = partition.n_params + 1
    q = np.kron(np.eye(n_ref), np.eye(d)) / d
    for g_eff, g in zip(geff, partition.generators):
        q = q + np.kron(g_eff.T, g)
    for v, s_op in zip(nu, partition.span_complements):
        q = q + v * np.kron(np.eye(n_ref), s_op)
    # the SDP parametrizes the transposed reference factor, as for G^eff
    for b, r_op in zip(bmats, partition.remainder):
        q = q + np.kron(b.T, r_op)
    return (q + q.conj().T) / 2


def solve_jnt(
    model: SensingModel,
    tol: float = 1e-8,
    solver: str = "auto",
    objective: str = TRACE,
    max_iter: int | None = None,
) -> JntSolution:
    verdict = check_hnls(model)
    if not verdict.achievable:
        raise HnlsViolation(
            f"projected generators have rank {verdict.projected_rank} < {model.n_params} "
            f"(smallest singular value {verdict.smallest_singular_value:.3e})"
        )
    a = verdict.transform
    frame_w = a @ model.cost_matrix @ a.T
    frame_w = (frame_w + frame_w.T) / 2
    partition = build_basis_partition(verdict.span, verdict.orthonormal_generators())
    problem, layout = assemble_jnt_sdp(partition, frame_w, objective)
    log.info("jnt sdp: %d variables, Q block %d", problem.n_vars, problem.blocks[0].size)
    sol = solve_sdp(problem, gap_tol=tol, feas_tol=tol, max_iter=max_iter, solver=solver)
    if _repairable(sol, tol):
        log.warning("jnt sdp: accepting near-feasible point (%s) and repairing Q", sol.message)
    elif not sol.ok:
        raise SolverFailure(
            f"SDP solver ({sol.solver}) returned {sol.status}: {sol.message}; "
            f"gap={sol.duality_gap:.2e} violation={sol.max_constraint_violation:.2e}",
            sol,
        )
    return _unpack(model, verdict, partition, layout, frame_w, sol)


def _repairable(sol: SdpSolution, tol: float) -> bool:
    """Converged within the gap but slightly outside the PSD cone; ``_unpack`` restores feasibility."""
    return (
        sol.status == NUMERICAL_FAILURE
        and sol.message.startswith("solver converged")
        and sol.duality_gap <= tol
        and sol.max_constraint_violation <= REPAIR_LIMIT * tol
        and bool(np.all(np.isfinite(sol.x)))
    )


def _unpack(model, verdict, partition, layout, frame_w, sol) -> JntSolution:
    x = sol.x
    p, n_ref, nh = layout.n_params, layout.n_ref, layout.n_herm
    geff = [_hermitian_from_params(x[layout.geff + i * nh: layout.geff + (i + 1) * nh], n_ref) for i in range(p)]
    nu = x[layout.nu: layout.nu + layout.n_span].copy()
    bmats = [_hermitian_from_params(x[layout.b + i * nh: layout.b + (i + 1) * nh], n_ref)
             for i in range(layout.n_remainder)]
    k = _sym_to_matrix(x[layout.k: layout.y], p)

    gamma = np.array([[geff[j][i + 1, 0].imag for j in range(p)] for i in range(p)])
    v = inverse_sqrt_psd(frame_w)
    # polar gauge: rotate reference rows so that Gamma W'^{-1/2} is PSD
    u, _ = scipy.linalg.polar(gamma @ v)
    rot = scipy.linalg.block_diag(1.0, u.T)
    geff = [rot @ g @ rot.T for g in geff]
    bmats = [rot @ b @ rot.T for b in bmats]
    gamma = u.T @ gamma
    q = reconstruct_q(partition, geff, nu, bmats)

    # mix toward 1 (x) 1/d until Q is exactly PSD; the trace and QEC constraints keep their form
    q_min = float(np.linalg.eigvalsh(q)[0])
    shrink = 1.0
    if q_min < 0:
        shrink = (1 / partition.dim) / (1 / partition.dim - q_min)
        geff = [shrink * g for g in geff]
        nu = shrink * nu
        bmats = [shrink * b for b in bmats]
        gamma = shrink * gamma
        q = reconstruct_q(partition, geff, nu, bmats)

    objective_value = sol.objective_value
    if layout.objective == TRACE:
        w = objective_value / p
    else:
        w = objective_value
    sdp_cost = p * w / (4 * model.time ** 2)
    m = gamma @ v
    m = (m + m.T) / 2
    sigma = np.linalg.inv(m.T @ m)
    exact = float(np.trace(sigma)) / (4 * model.time ** 2)
    cost = sdp_cost
    if shrink < 1:
        # K and w are re-derived from the repaired Gamma so every block holds exactly
        k = np.linalg.inv(m)
        cost = exact if layout.objective == TRACE else p * float(np.linalg.eigvalsh(sigma)[-1]) / (4 * model.time ** 2)
        w = 4 * model.time ** 2 * cost / p
    n_ref_d = n_ref * partition.dim
    trace_s = np.einsum("ksls->kl", q.reshape(n_ref, partition.dim, n_ref, partition.dim))
    diagnostics = {
        "q_min_eigenvalue": float(np.linalg.eigvalsh(q)[0]),
        "q_min_eigenvalue_raw": q_min,
        "repair_shrink": shrink,
        "sdp_cost": sdp_cost,
        "q_trace_residual": float(np.abs(trace_s - np.eye(n_ref)).max()),
        "gamma_cost": exact,
        "q_size": n_ref_d,
        "n_vars": layout.n_vars,
        "polar_rotation_deviation": float(np.abs(u - np.eye(p)).max()),
    }
    return JntSolution(
        w=w,
        cost=cost,
        effective_generators=geff,
        multipliers=nu,
        b_matrices=bmats,
        gamma=gamma,
        k_matrix=k,
        q_matrix=q,
        partition=partition,
        transform=verdict.transform,
        frame_cost_matrix=frame_w,
        time=model.time,
        objective=layout.objective,
        sdp=sol,
        verdict=verdict,
        diagnostics=diagnostics,
    )
