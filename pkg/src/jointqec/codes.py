"""Explicit codes, measurements and estimators from a code matrix.

Code states are stored as rows of a ``(n_states, d * a)`` array on
system (x) ancilla, system index slow. Everything is evaluated at the
working point ``omega = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lindblad import LindbladSpan
from .operators import BipartiteLayout

QEC_TOL = 1e-6
MAX_CONDITION = 1e12


class CodeError(ValueError):
    pass


@dataclass
class CodeSpace:
    layout: BipartiteLayout
    states: np.ndarray
    qec_residuals: dict | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=complex))
        if self.states.shape[1] != self.layout.dim:
            raise ValueError(f"state length {self.states.shape[1]} does not match layout dim {self.layout.dim}")

    @classmethod
    def from_states(cls, states, dim_system: int, **kw) -> "CodeSpace":
        states = np.atleast_2d(np.asarray(states, dtype=complex))
        n = states.shape[1]
        if n % dim_system:
            raise ValueError(f"state length {n} is not a multiple of {dim_system}")
        return cls(BipartiteLayout(dim_system, n // dim_system), states, **kw)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def input_state(self) -> np.ndarray:
        return self.states[0]

    def tensor(self) -> np.ndarray:
        """States reshaped to ``(n_states, d, a)``."""
        return self.states.reshape(self.n_states, self.layout.dim_system, self.layout.dim_ancilla)

    def gram(self) -> np.ndarray:
        return self.states.conj() @ self.states.T

    def orthonormality_residual(self) -> float:
        return float(np.abs(self.gram() - np.eye(self.n_states)).max())

    def matrix_elements(self, op: np.ndarray) -> np.ndarray:
        """``<c_k| op (x) 1 |c_l>`` for a system operator ``op``."""
        c = self.tensor()
        return np.einsum("ksa,st,lta->kl", c.conj(), op, c, optimize=True)


def purify_code(
    q: np.ndarray,
    dim_system: int,
    rank_tol: float = 1e-9,
    trace_tol: float = 1e-6,
    negative_tol: float = 1e-6,
    orthonormalize: bool = True,
) -> CodeSpace:
    """Code states ``c_k = (<k|_R (x) 1)|Q>`` from a purification of ``Q``.

    ``Q`` lives on reference (x) system, reference first. Eigenvectors with
    eigenvalue above ``rank_tol * lambda_max`` are kept, in descending order,
    and label the ancilla. With ``orthonormalize`` the states are passed through
    a symmetric (Loewdin) orthonormalization to remove solver-level noise.
    """
    q = np.asarray(q, dtype=complex)
    m = q.shape[0]
    if q.shape != (m, m) or m % dim_system:
        raise CodeError(f"Q of shape {q.shape} is incompatible with system dimension {dim_system}")
    n_ref = m // dim_system
    q = (q + q.conj().T) / 2
    ref = np.einsum("ksls->kl", q.reshape(n_ref, dim_system, n_ref, dim_system))
    trace_residual = float(np.abs(ref - np.eye(n_ref)).max())
    if trace_residual > trace_tol:
        raise CodeError(f"partial trace of Q deviates from the identity by {trace_residual:.2e}")
    ev, vec = np.linalg.eigh(q)
    if ev[0] < -negative_tol * max(1.0, ev[-1]):
        raise CodeError(f"Q has a negative eigenvalue {ev[0]:.2e}")
    # descending, stable tie-break by original index
    order = np.argsort(-ev, kind="stable")
    ev, vec = ev[order], vec[:, order]
    keep = ev > rank_tol * ev[0]
    ev, vec = ev[keep], vec[:, keep]
    rank = ev.size
    # |Q> = sum_m sqrt(lam_m) |v_m>|m>; index (k, s) of v_m is k * d + s
    amps = vec * np.sqrt(ev)[None, :]
    states = amps.reshape(n_ref, dim_system * rank)
    code = CodeSpace(BipartiteLayout(dim_system, rank), states)
    code.metadata["raw_orthonormality_residual"] = code.orthonormality_residual()
    code.metadata["eigenvalues"] = ev
    if orthonormalize:
        gram = code.gram()
        w, u = np.linalg.eigh(gram)
        inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
        code.states = inv_sqrt.T @ code.states
    return code


@dataclass
class QecReport:
    residuals: list[float]
    proportionality: list[complex]
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_qec(code: CodeSpace, span: LindbladSpan | Sequence[np.ndarray], tol: float = QEC_TOL) -> QecReport:
    """Knill-Laflamme check: ``<c_k|S (x) 1|c_l>`` proportional to the identity for every ``S``."""
    ops = span.basis if isinstance(span, LindbladSpan) else list(span)
    n = code.n_states
    residuals, lams = [], []
    for s_op in ops:
        m = code.matrix_elements(s_op)
        lam = np.trace(m) / n
        residuals.append(float(np.linalg.norm(m - lam * np.eye(n), 2)))
        lams.append(complex(lam))
    report = QecReport(residuals, lams, tol)
    code.qec_residuals = {"residuals": residuals, "max": report.max_residual}
    return report


def effective_generators(code: CodeSpace, generators: Sequence[np.ndarray]) -> list[np.ndarray]:
    """``[G^eff_i]_kl = <c_k| G_i (x) 1 |c_l>``."""
    d = code.layout.dim_system
    out = []
    for g in generators:
        g = np.asarray(g)
        if g.shape != (d, d):
            raise ValueError(f"generator of shape {g.shape} does not act on dimension {d}")
        m = code.matrix_elements(g)
        out.append((m + m.conj().T) / 2)
    return out


@dataclass
class ProtocolCost:
    d_matrix: np.ndarray
    gamma: np.ndarray
    cost: float

    def __iter__(self):
        return iter((self.d_matrix, self.gamma, self.cost))


def protocol_cost(code: CodeSpace, generators, cost_matrix, time: float) -> ProtocolCost:
    """Cost of the optimal estimator for a fixed code, ``Tr(W (D^T D)^{-1})``."""
    p = len(generators)
    if code.n_states != p + 1:
        raise CodeError(f"code has {code.n_states} states, expected P+1 = {p + 1}")
    geff = effective_generators(code, generators)
    gamma = np.array([[geff[j][i, 0].imag for j in range(p)] for i in range(1, p + 1)])
    d_mat = 2 * time * gamma
    sv = np.linalg.svd(d_mat, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > MAX_CONDITION:
        raise CodeError("code does not sense all parameters (D is singular)")
    w = np.asarray(cost_matrix, dtype=float)
    cost = float(np.trace(w @ np.linalg.inv(d_mat.T @ d_mat)))
    return ProtocolCost(d_mat, gamma, cost)


def _householder_to_uniform(n: int) -> np.ndarray:
    """Real reflection with ``H e_0 = (1, ..., 1) / sqrt(n)``."""
    v = np.zeros(n)
    v[0] = 1.0
    v -= 1 / np.sqrt(n)
    vv = v @ v
    if vv == 0:
        return np.eye(n)
    return np.eye(n) - 2 * np.outer(v, v) / vv


@dataclass
class Protocol:
    """Projective measurement ``E_l = |b_l><b_l|`` (``l = 1..P+1``) and ``E_0 = 1 - sum``.

    ``estimators[l, i]`` is the estimate of ``omega_i`` on outcome ``l``;
    row 0 belongs to ``E_0`` and is zero.
    """

    code: CodeSpace
    x_vectors: np.ndarray
    basis: np.ndarray
    estimators: np.ndarray
    chi: np.ndarray

    @property
    def input_state(self) -> np.ndarray:
        return self.code.input_state

    @property
    def n_outcomes(self) -> int:
        return self.basis.shape[0] + 1

    def projectors(self) -> list[np.ndarray]:
        """Dense projectors ``E_0 .. E_{P+1}``; memory grows as ``dim^2`` per outcome."""
        es = [np.outer(b, b.conj()) for b in self.basis]
        e0 = np.eye(self.code.layout.dim, dtype=complex) - sum(es)
        return [e0, *es]

    def probabilities(self) -> np.ndarray:
        overlaps = np.abs(self.basis.conj() @ self.input_state) ** 2
        return np.concatenate([[1.0 - overlaps.sum()], overlaps])

    def measurement_residuals(self) -> dict:
        """Completeness and orthogonality residuals computed in the span of the ``b_l``.

        ``E_l E_m - delta_lm E_l`` for ``l, m >= 1`` has norm ``|<b_l|b_m>|``
        (``|<b|b>^2 - <b|b>|`` on the diagonal); the ``E_0`` terms reduce to the
        same Gram matrix, so nothing of size ``dim^2`` is formed.
        """
        b = self.basis
        g = b.conj() @ b.T
        n = g.shape[0]
        off = np.abs(g - np.diag(np.diag(g)))
        diag = np.abs(np.abs(np.diag(g)) ** 2 - np.diag(g).real)
        pair = max(off.max(initial=0.0), diag.max(initial=0.0))
        # E_0 E_l = (1 - B B^dag) b_l <b_l|
        e0_cross = max(
            np.linalg.norm(b[l] - g[:, l] @ b) * np.linalg.norm(b[l]) for l in range(n)
        )
        # E_0^2 - E_0 = Pi^2 - Pi with Pi = B B^dag; its spectrum is that of (G - I) G
        e0_idem = float(np.abs(np.linalg.eigvals((g - np.eye(n)) @ g)).max())
        return {
            "orthogonality": float(max(pair, e0_cross)),
            "idempotence": e0_idem,
            # E_0 is defined as the complement, completeness holds exactly
            "completeness": 0.0,
        }


def derive_measurement(code: CodeSpace, d_matrix: np.ndarray, cost_matrix=None, overlap_tol: float = 1e-10) -> Protocol:
    """Optimal measurement and locally unbiased estimator for a fixed code.

    ``cost_matrix`` does not enter the construction; it is accepted for
    symmetry with :func:`covariance_check`.
    """
    p = d_matrix.shape[0]
    chi = np.linalg.inv(d_matrix).T
    c = code.states
    x = chi.T @ c[1:p + 1]
    # real Gram-Schmidt of the x-vectors: chi = Qr R
    qr, r = np.linalg.qr(chi)
    u = np.vstack([c[0], qr.T @ c[1:p + 1]])
    h = _householder_to_uniform(p + 1)
    b = h @ u
    overlaps = b.conj() @ c[0]
    if np.abs(overlaps).min() < overlap_tol:
        raise CodeError("measurement vector with vanishing overlap on the input state")
    est = (b.conj() @ x.T) / overlaps[:, None]
    estimators = np.vstack([np.zeros((1, p)), est.real])
    return Protocol(code, x, b, estimators, chi)


@dataclass
class CovarianceReport:
    sigma: np.ndarray
    cost: float
    gram_sigma: np.ndarray
    bias: np.ndarray
    derivative: np.ndarray
    reconstruction_residual: float

    @property
    def bias_residual(self) -> float:
        return float(np.abs(self.bias).max())

    @property
    def derivative_residual(self) -> float:
        return float(np.abs(self.derivative - np.eye(self.derivative.shape[0])).max())

    @property
    def unbiased(self) -> bool:
        return max(self.bias_residual, self.derivative_residual) <= 1e-7


def covariance_check(protocol: Protocol, generators, cost_matrix, time: float) -> CovarianceReport:
    """Covariance of the estimator, ``Tr(W Sigma)`` and both local unbiasedness conditions."""
    probs = protocol.probabilities()
    est = protocol.estimators
    sigma = (est * probs[:, None]).T @ est
    c0 = protocol.input_state
    bias = probs @ est
    d = protocol.code.layout.dim_system
    a = protocol.code.layout.dim_ancilla
    psi = c0.reshape(d, a)
    # d Tr(rho E_l) / d omega_i = 2 Re(<c0|b_l><b_l| dpsi_i>), dpsi_i = -i T (G_i (x) 1) c0
    overlaps = protocol.basis.conj() @ c0
    deriv = np.zeros((len(generators), len(generators)))
    for i, g in enumerate(generators):
        dpsi = (-1j * time * (np.asarray(g) @ psi)).ravel()
        dprob = 2 * np.real(overlaps.conj() * (protocol.basis.conj() @ dpsi))
        # E_0 carries estimate zero and drops out
        deriv[:, i] = dprob @ est[1:]
    xs = protocol.x_vectors
    gram_sigma = (xs.conj() @ xs.T).real
    recon = (est[1:] * overlaps[:, None]).T @ protocol.basis
    w = np.asarray(cost_matrix, dtype=float)
    return CovarianceReport(
        sigma=sigma,
        cost=float(np.trace(w @ sigma)),
        gram_sigma=gram_sigma,
        bias=bias,
        derivative=deriv,
        reconstruction_residual=float(np.abs(recon - xs).max()),
    )


@dataclass
class QfiReport:
    fisher: np.ndarray
    compatibility: float


def qfi_and_compatibility(state, generators, time: float = 1.0) -> QfiReport:
    """Pure-state QFI matrix and the largest ``|<psi|[G_i, G_j]|psi>|``.

    For a :class:`CodeSpace` the generators act through their projections on
    the code (the effective generators) and the state is ``c_0``. A plain
    vector whose length is a multiple of ``d`` is treated as system (x) ancilla.
    """
    p = len(generators)
    if isinstance(state, CodeSpace):
        geff = effective_generators(state, generators)
        # in the code basis c_0 = e_0 and G^eff_i c_0 is column 0
        vecs = np.array([g[:, 0] for g in geff])
        means = np.array([g[0, 0] for g in geff])
        prods = vecs.conj() @ vecs.T
    else:
        psi = np.asarray(state, dtype=complex).ravel()
        d = np.asarray(generators[0]).shape[0]
        if psi.size % d:
            raise ValueError(f"state length {psi.size} is not a multiple of {d}")
        mat = psi.reshape(d, psi.size // d)
        vecs = np.array([(np.asarray(g) @ mat).ravel() for g in generators])
        means = vecs @ psi.conj()
        prods = vecs.conj() @ vecs.T
    fisher = 4 * time ** 2 * np.real(prods - np.outer(means.conj(), means))
    comm = 2 * np.abs(prods.imag) if p else np.zeros((0, 0))
    return QfiReport(fisher, float(comm.max(initial=0.0)))
