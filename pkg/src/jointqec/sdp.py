"""Semidefinite programs with linear matrix inequality constraints.

Problems are stated as::

    minimize    c^T x
    subject to  F0_b + sum_i x_i F_ib  >= 0     for every block b
                A_eq x = b_eq

Blocks are real symmetric. Complex Hermitian constraints go through
:func:`embed_hermitian_lmi` first. The numerical work is delegated to
Clarabel (interior point) for small cones and SCS (operator splitting) for
large ones; this module only translates to their conic form and checks
the returned certificates independently.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
# Clarabel factors a dense (m(m+1)/2)^2 block per PSD cone; beyond this size SCS is used
CLARABEL_MAX_BLOCK = 64

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"


def _transpose_permutation(m: int) -> np.ndarray:
    idx = np.arange(m * m)
    return (idx % m) * m + idx // m


@dataclass
class LmiBlock:
    """``F0 + sum_i x_i F_i >= 0``; column ``i`` of ``coeffs`` is ``F_i`` flattened row-major."""

    f0: np.ndarray
    coeffs: sp.csc_matrix

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=float)
        m = self.f0.shape[0]
        if self.f0.shape != (m, m):
            raise ValueError("F0 must be square")
        self.coeffs = sp.csc_matrix(self.coeffs, dtype=float)
        if self.coeffs.shape[0] != m * m:
            raise ValueError(f"coefficient rows {self.coeffs.shape[0]} != {m}^2")
        scale = max(1.0, np.abs(self.f0).max(initial=0.0))
        if np.abs(self.f0 - self.f0.T).max(initial=0.0) > SYMMETRY_TOL * scale:
            raise ValueError("F0 is not symmetric")
        if self.coeffs.nnz:
            perm = _transpose_permutation(m)
            diff = self.coeffs - self.coeffs[perm, :]
            cscale = max(1.0, np.abs(self.coeffs.data).max())
            if diff.nnz and np.abs(diff.data).max() > SYMMETRY_TOL * cscale:
                raise ValueError("coefficient matrices are not symmetric")

    @classmethod
    def from_dense(cls, f0, coeff_matrices: Sequence[np.ndarray]) -> "LmiBlock":
        f0 = np.asarray(f0, dtype=float)
        m = f0.shape[0]
        if len(coeff_matrices) == 0:
            return cls(f0, sp.csc_matrix((m * m, 0)))
        cols = np.column_stack([np.asarray(f, dtype=float).ravel() for f in coeff_matrices])
        return cls(f0, sp.csc_matrix(cols))

    @property
    def size(self) -> int:
        return self.f0.shape[0]

    @property
    def n_vars(self) -> int:
        return self.coeffs.shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        m = self.size
        s = self.f0 + (self.coeffs @ x).reshape(m, m)
        return (s + s.T) / 2


@dataclass
class SdpProblem:
    c: np.ndarray
    blocks: list[LmiBlock]
    eq_matrix: sp.csr_matrix | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        for k, b in enumerate(self.blocks):
            if b.n_vars != n:
                raise ValueError(f"block {k} has {b.n_vars} coefficient matrices, expected {n}")
        if self.eq_matrix is None:
            self.eq_matrix = sp.csr_matrix((0, n))
            self.eq_rhs = np.zeros(0)
        self.eq_matrix = sp.csr_matrix(self.eq_matrix, dtype=float)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        if self.eq_matrix.shape != (self.eq_rhs.size, n):
            raise ValueError("equality constraint shapes are inconsistent")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    dual_objective: float
    duality_gap: float
    max_constraint_violation: float
    solver: str = ""
    iterations: int = 0
    solve_time: float = 0.0
    dual_blocks: list[np.ndarray] = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _svec_index(m: int, solver: str) -> tuple[np.ndarray, np.ndarray]:
    """Flat (row-major) indices and scale factors of the packed triangle."""
    rows, cols = [], []
    for j in range(m):
        if solver == "clarabel":
            # upper triangle, column by column
            rng = range(0, j + 1)
        else:
            # lower triangle, column by column
            rng = range(j, m)
        for i in rng:
            rows.append(i)
            cols.append(j)
    rows = np.array(rows)
    cols = np.array(cols)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows * m + cols, scale


def _smat(v: np.ndarray, m: int, solver: str) -> np.ndarray:
    flat, scale = _svec_index(m, solver)
    out = np.zeros(m * m)
    out[flat] = v / scale
    z = out.reshape(m, m)
    return z + z.T - np.diag(np.diag(z))


def _conic_form(problem: SdpProblem, solver: str):
    """Stack rows as zero cone, nonnegative cone (1x1 blocks), PSD cones."""
    a_rows = [problem.eq_matrix]
    b_rows = [problem.eq_rhs]
    scalar = [k for k, b in enumerate(problem.blocks) if b.size == 1]
    psd = [k for k, b in enumerate(problem.blocks) if b.size > 1]
    for k in scalar:
        blk = problem.blocks[k]
        a_rows.append(-sp.csr_matrix(blk.coeffs))
        b_rows.append(blk.f0.ravel())
    for k in psd:
        blk = problem.blocks[k]
        flat, scale = _svec_index(blk.size, solver)
        a_rows.append(-sp.diags(scale) @ sp.csr_matrix(blk.coeffs)[flat, :])
        b_rows.append(scale * blk.f0.ravel()[flat])
    a = sp.vstack(a_rows, format="csc")
    b = np.concatenate(b_rows)
    return a, b, scalar, psd


def _trivial(problem: SdpProblem, feas_tol: float) -> SdpSolution:
    viol = 0.0
    for blk in problem.blocks:
        lam = np.linalg.eigvalsh(blk.f0)[0]
        viol = max(viol, max(0.0, -lam) / (1 + np.linalg.norm(blk.f0, 2)))
    if problem.eq_rhs.size:
        viol = max(viol, np.abs(problem.eq_rhs).max() / (1 + np.abs(problem.eq_rhs).max()))
    status = OPTIMAL if viol <= feas_tol else INFEASIBLE
    return SdpSolution(status, np.zeros(0), 0.0, 0.0, 0.0, viol, solver="none")


def constraint_violation(problem: SdpProblem, x: np.ndarray) -> float:
    """Largest normalized violation over all LMI blocks and equalities."""
    viol = 0.0
    for blk in problem.blocks:
        s = blk.evaluate(x)
        lam = np.linalg.eigvalsh(s)[0] if blk.size > 1 else s[0, 0]
        viol = max(viol, max(0.0, -lam) / (1 + np.linalg.norm(blk.f0, 2)))
    if problem.eq_rhs.size:
        res = problem.eq_matrix @ x - problem.eq_rhs
        viol = max(viol, np.abs(res).max() / (1 + np.abs(problem.eq_rhs).max()))
    return float(viol)


def choose_solver(problem: SdpProblem) -> str:
    largest = max((b.size for b in problem.blocks), default=0)
    return "clarabel" if largest <= CLARABEL_MAX_BLOCK else "scs"


def solve_sdp(
    problem: SdpProblem,
    gap_tol: float = 1e-8,
    feas_tol: float = 1e-8,
    max_iter: int | None = None,
    solver: str = "auto",
) -> SdpSolution:
    """Solve ``problem`` and verify the result against the requested tolerances.

    ``duality_gap`` is ``|p - d| / (1 + |p| + |d|)``; ``max_constraint_violation``
    normalizes the most negative eigenvalue of each block by ``1 + ||F0||``.
    A solution is reported ``optimal`` only if both are within tolerance.
    """
    if problem.n_vars == 0:
        return _trivial(problem, feas_tol)
    if solver == "auto":
        first = _solve_with(problem, gap_tol, feas_tol, max_iter, choose_solver(problem))
        if first.status != NUMERICAL_FAILURE or first.solver == "scs":
            return first
        # interior point can stall just above tight tolerances; splitting usually gets there
        log.info("clarabel: %s; retrying with scs", first.message)
        second = _solve_with(problem, gap_tol, feas_tol, max_iter, "scs")
        second.message = f"clarabel fallback ({first.message}); {second.message}"
        return second
    return _solve_with(problem, gap_tol, feas_tol, max_iter, solver)


def _solve_with(problem, gap_tol, feas_tol, max_iter, solver) -> SdpSolution:
    if solver == "clarabel":
        raw = _run_clarabel(problem, gap_tol, feas_tol, max_iter)
    elif solver == "scs":
        raw = _run_scs(problem, gap_tol, feas_tol, max_iter)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    status, x, z, iters, elapsed, message, scalar, psd = raw
    if status in (INFEASIBLE, UNBOUNDED):
        return SdpSolution(status, x, np.nan, np.nan, np.nan, np.nan, solver, iters, elapsed, message=message)

    a, b, _, _ = _conic_form(problem, solver)
    primal = float(problem.c @ x)
    dual = float(-b @ z)
    gap = abs(primal - dual) / (1 + abs(primal) + abs(dual))
    viol = constraint_violation(problem, x)

    dual_blocks: list[np.ndarray] = [np.zeros((0, 0))] * len(problem.blocks)
    offset = problem.eq_rhs.size
    for k in scalar:
        dual_blocks[k] = np.array([[z[offset]]])
        offset += 1
    for k in psd:
        m = problem.blocks[k].size
        t = m * (m + 1) // 2
        dual_blocks[k] = _smat(z[offset:offset + t], m, solver)
        offset += t

    if status == OPTIMAL and (gap > gap_tol or viol > feas_tol):
        message = f"solver converged but gap={gap:.2e}, violation={viol:.2e} exceed tolerances"
        status = NUMERICAL_FAILURE
    log.debug("sdp %s: status=%s obj=%.10g gap=%.1e viol=%.1e iters=%d time=%.2fs",
              solver, status, primal, gap, viol, iters, elapsed)
    return SdpSolution(status, x, primal, dual, gap, viol, solver, iters, elapsed, dual_blocks, message)


def _run_clarabel(problem, gap_tol, feas_tol, max_iter):
    import clarabel

    a, b, scalar, psd = _conic_form(problem, "clarabel")
    n = problem.n_vars
    cones = []
    if problem.eq_rhs.size:
        cones.append(clarabel.ZeroConeT(problem.eq_rhs.size))
    if scalar:
        cones.append(clarabel.NonnegativeConeT(len(scalar)))
    cones.extend(clarabel.PSDTriangleConeT(problem.blocks[k].size) for k in psd)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = gap_tol / 10
    settings.tol_gap_rel = gap_tol / 10
    settings.tol_feas = feas_tol / 10
    settings.max_threads = 1
    if max_iter is not None:
        settings.max_iter = max_iter
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), problem.c, a, b, cones, settings)
    sol = solver.solve()
    name = str(sol.status).split(".")[-1]
    mapping = {
        "Solved": OPTIMAL,
        "AlmostSolved": OPTIMAL,
        "PrimalInfeasible": INFEASIBLE,
        "AlmostPrimalInfeasible": INFEASIBLE,
        "DualInfeasible": UNBOUNDED,
        "AlmostDualInfeasible": UNBOUNDED,
    }
    status = mapping.get(name, NUMERICAL_FAILURE)
    return (status, np.array(sol.x), np.array(sol.z), sol.iterations, sol.solve_time,
            name, scalar, psd)


def _run_scs(problem, gap_tol, feas_tol, max_iter):
    import scs

    a, b, scalar, psd = _conic_form(problem, "scs")
    cone = {}
    if problem.eq_rhs.size:
        cone["z"] = int(problem.eq_rhs.size)
    if scalar:
        cone["l"] = len(scalar)
    if psd:
        cone["s"] = [problem.blocks[k].size for k in psd]
    eps = min(gap_tol, feas_tol) / 10
    solver = scs.SCS(
        {"A": a, "b": b, "c": problem.c},
        cone,
        eps_abs=eps,
        eps_rel=eps,
        max_iters=max_iter or 200_000,
        verbose=False,
        acceleration_lookback=10,
    )
    sol = solver.solve()
    info = sol["info"]
    name = info["status"]
    if name.startswith("solved"):
        status = OPTIMAL
    elif name.startswith("infeasible"):
        status = INFEASIBLE
    elif name.startswith("unbounded"):
        status = UNBOUNDED
    else:
        status = NUMERICAL_FAILURE
    elapsed = (info.get("solve_time", 0.0) + info.get("setup_time", 0.0)) / 1000
    return (status, np.array(sol["x"]), np.array(sol["y"]), info["iter"], elapsed, name,
            scalar, psd)


class FixedConstraintSdp:
    """Many solves sharing one constraint set; only the objective changes.

    The conic form is built once. Each interior point solve is checked with
    the same gap and violation test as :func:`solve_sdp`; failures are retried
    through :func:`solve_sdp` with its solver fallback.
    """

    def __init__(self, blocks: list[LmiBlock], eq_matrix=None, eq_rhs=None,
                 gap_tol: float = 1e-8, feas_tol: float = 1e-8):
        import clarabel

        n = blocks[0].n_vars
        self.template = SdpProblem(np.zeros(n), blocks, eq_matrix, eq_rhs)
        self.gap_tol = gap_tol
        self.feas_tol = feas_tol
        self._a, self._b, scalar, psd = _conic_form(self.template, "clarabel")
        cones = []
        if self.template.eq_rhs.size:
            cones.append(clarabel.ZeroConeT(self.template.eq_rhs.size))
        if scalar:
            cones.append(clarabel.NonnegativeConeT(len(scalar)))
        cones.extend(clarabel.PSDTriangleConeT(blocks[k].size) for k in psd)
        self._cones = cones
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = gap_tol / 10
        settings.tol_gap_rel = gap_tol / 10
        settings.tol_feas = feas_tol / 10
        settings.max_threads = 1
        self._settings = settings
        self._p = sp.csc_matrix((n, n))
        self._scales = [1 + np.linalg.norm(b.f0, 2) for b in blocks]
        self.n_solves = 0
        self.n_fallbacks = 0

    def _violation(self, x: np.ndarray) -> float:
        viol = 0.0
        for blk, scale in zip(self.template.blocks, self._scales):
            s = blk.evaluate(x)
            lam = s[0, 0] if blk.size == 1 else np.linalg.eigvalsh(s)[0]
            viol = max(viol, max(0.0, -lam) / scale)
        if self.template.eq_rhs.size:
            res = self.template.eq_matrix @ x - self.template.eq_rhs
            viol = max(viol, np.abs(res).max() / (1 + np.abs(self.template.eq_rhs).max()))
        return float(viol)

    def solve(self, c: np.ndarray) -> SdpSolution:
        import clarabel

        c = np.asarray(c, dtype=float).ravel()
        self.n_solves += 1
        sol = clarabel.DefaultSolver(self._p, c, self._a, self._b, self._cones, self._settings).solve()
        name = str(sol.status).split(".")[-1]
        if name in ("Solved", "AlmostSolved"):
            x = np.array(sol.x)
            primal = float(c @ x)
            dual = float(-self._b @ np.array(sol.z))
            gap = abs(primal - dual) / (1 + abs(primal) + abs(dual))
            if gap <= self.gap_tol:
                viol = self._violation(x)
                if viol <= self.feas_tol:
                    return SdpSolution(OPTIMAL, x, primal, dual, gap, viol, "clarabel",
                                       sol.iterations, sol.solve_time, message=name)
        self.n_fallbacks += 1
        problem = SdpProblem(c, self.template.blocks, self.template.eq_matrix, self.template.eq_rhs)
        return solve_sdp(problem, self.gap_tol, self.feas_tol, solver="scs")


def embed_hermitian(h: np.ndarray) -> np.ndarray:
    """``[[Re H, -Im H], [Im H, Re H]]``; PSD exactly when ``H`` is."""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _embed_columns(coeffs: sp.spmatrix, m: int) -> sp.csc_matrix:
    coo = sp.coo_matrix(coeffs)
    i, j = np.divmod(coo.row, m)
    re, im = coo.data.real, coo.data.imag
    m2 = 2 * m
    rows = np.concatenate([i * m2 + j, i * m2 + j + m, (i + m) * m2 + j, (i + m) * m2 + j + m])
    cols = np.tile(coo.col, 4)
    data = np.concatenate([re, -im, im, re])
    keep = data != 0
    return sp.csc_matrix((data[keep], (rows[keep], cols[keep])), shape=(m2 * m2, coeffs.shape[1]))


def embed_hermitian_lmi(h0: np.ndarray, coeffs) -> LmiBlock:
    """Real symmetric LMI equivalent to the Hermitian one ``H0 + sum_i x_i H_i >= 0``.

    ``coeffs`` is either a list of Hermitian matrices or a sparse complex matrix
    whose column ``i`` is ``H_i`` flattened row-major.
    """
    h0 = np.asarray(h0, dtype=complex)
    m = h0.shape[0]
    if h0.shape != (m, m):
        raise ValueError("H0 must be square")
    if isinstance(coeffs, (list, tuple)):
        if len(coeffs) == 0:
            coeffs = sp.csc_matrix((m * m, 0), dtype=complex)
        else:
            coeffs = sp.csc_matrix(np.column_stack([np.asarray(c, dtype=complex).ravel() for c in coeffs]))
    coeffs = sp.csc_matrix(coeffs, dtype=complex)
    scale = max(1.0, np.abs(h0).max(initial=0.0))
    if np.abs(h0 - h0.conj().T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("H0 is not Hermitian")
    if coeffs.nnz:
        perm = _transpose_permutation(m)
        diff = coeffs - coeffs[perm, :].conj()
        if diff.nnz and np.abs(diff.data).max() > SYMMETRY_TOL * max(1.0, np.abs(coeffs.data).max()):
            raise ValueError("coefficient matrices are not Hermitian")
    return LmiBlock(embed_hermitian(h0), _embed_columns(coeffs, m))
