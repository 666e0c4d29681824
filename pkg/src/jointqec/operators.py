"""Dense Hermitian operator algebra.

Operators are plain ``numpy`` arrays. :func:`as_hermitian` is the single
entry point that validates and symmetrizes a matrix; everything downstream
assumes its output.

Tensor products follow a fixed system-major convention: for a bipartite
space with dimensions ``(d, a)`` the composite index of ``|s>|m>`` is
``s * a + m``. This matches ``np.kron(A_system, B_ancilla)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def as_hermitian(matrix, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Validate ``matrix`` as Hermitian and return its symmetrized copy.

    Raises ``ValueError`` when the matrix is not square, has non-finite
    entries, or when ``||M - M^dag|| > rtol * ||M||`` (Frobenius norms).
    """
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(m)
    asym = np.linalg.norm(m - m.conj().T)
    if asym > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"matrix is not Hermitian (relative asymmetry {asym / scale:.3e})")
    return (m + m.conj().T) / 2


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt product ``Tr(A B)`` of two Hermitian operators."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # Tr(AB) = sum_jk A_jk conj(B_jk) for Hermitian B
    return float(np.real(np.vdot(b, a)))


def hs_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def split_hermitian(op) -> tuple[np.ndarray, np.ndarray]:
    """Return ``((L + L^dag)/2, i (L - L^dag)/2)``; both parts are Hermitian."""
    m = np.array(op, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    h = (m + m.conj().T) / 2
    ah = 1j * (m - m.conj().T) / 2
    # exact Hermiticity, not just up to rounding
    return (h + h.conj().T) / 2, (ah + ah.conj().T) / 2


def to_real_vector(a: np.ndarray) -> np.ndarray:
    """Real coordinates in which ``hs_inner`` becomes the Euclidean dot product."""
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def from_real_vector(v: np.ndarray, dim: int) -> np.ndarray:
    n = dim * dim
    return (v[:n] + 1j * v[n:]).reshape(dim, dim)


def orthonormalize_hermitian_set(
    ops: Sequence[np.ndarray], tol: float = 1e-9
) -> tuple[list[np.ndarray], int]:
    """Modified Gram-Schmidt over the real vector space of Hermitian matrices.

    Inputs are processed in order. A vector whose norm after projection is
    at most ``tol`` times the largest input norm is dropped. Each surviving
    vector is re-orthogonalized once more to keep the output orthonormal to
    machine precision.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ops = list(ops)
    if not ops:
        return [], 0
    dim = ops[0].shape[0]
    if any(o.shape != (dim, dim) for o in ops):
        raise ValueError("all operators must share one dimension")
    largest = max(hs_norm(o) for o in ops)
    if largest == 0:
        return [], 0
    basis: list[np.ndarray] = []
    for op in ops:
        v = np.array(op, dtype=complex)
        for _ in range(2):
            for b in basis:
                v = v - hs_inner(b, v) * b
        norm = hs_norm(v)
        if norm <= tol * largest:
            continue
        v = v / norm
        basis.append((v + v.conj().T) / 2)
    return basis, len(basis)


def gram_matrix(ops: Sequence[np.ndarray]) -> np.ndarray:
    vecs = np.array([to_real_vector(o) for o in ops])
    return vecs @ vecs.T


@dataclass(frozen=True)
class BipartiteLayout:
    """Dimensions of ``H_system (x) H_ancilla`` with system-major indexing."""

    dim_system: int
    dim_ancilla: int

    def __post_init__(self):
        if self.dim_system < 1 or self.dim_ancilla < 1:
            raise ValueError("dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.dim_system * self.dim_ancilla

    def index(self, system: int, ancilla: int) -> int:
        return system * self.dim_ancilla + ancilla


def partial_trace(m: np.ndarray, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Partial trace of an operator on a two-factor space.

    ``keep=0`` traces out the second factor, ``keep=1`` the first one.
    """
    d0, d1 = dims
    if m.shape != (d0 * d1, d0 * d1):
        raise ValueError(f"matrix of shape {m.shape} does not match dims {dims}")
    t = m.reshape(d0, d1, d0, d1)
    if keep == 0:
        return np.einsum("iaja->ij", t)
    if keep == 1:
        return np.einsum("aiaj->ij", t)
    raise ValueError("keep must be 0 or 1")


def partial_trace_ancilla(m: np.ndarray, layout: BipartiteLayout, over: str = "ancilla") -> np.ndarray:
    """Trace out ``over`` ('ancilla' or 'system') from an operator on ``layout``."""
    dims = (layout.dim_system, layout.dim_ancilla)
    if over == "ancilla":
        return partial_trace(m, dims, keep=0)
    if over == "system":
        return partial_trace(m, dims, keep=1)
    raise ValueError("over must be 'ancilla' or 'system'")


def spectral(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    return np.linalg.eigh(a)


def operator_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(a))))


def spread(a: np.ndarray) -> float:
    """Largest minus smallest eigenvalue."""
    w = np.linalg.eigvalsh(a)
    return float(w[-1] - w[0])


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(out, o)
    return out


def embed_local(op: np.ndarray, site: int, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """``1 (x) ... (x) op (x) ... (x) 1`` with ``op`` on ``site`` (0-based)."""
    eye = np.eye(local_dim, dtype=complex)
    return kron(*[op if k == site else eye for k in range(n_sites)])


def spin_z(d: int) -> np.ndarray:
    """``J_z`` for spin ``j = (d-1)/2`` in the basis ordered ``m = j, j-1, ..., -j``."""
    j = (d - 1) / 2
    return np.diag(j - np.arange(d)).astype(complex)


def gell_mann_basis(d: int) -> list[np.ndarray]:
    """Traceless generalized Gell-Mann matrices, Hilbert-Schmidt normalized.

    Order: real off-diagonal by ``(k, l)`` with ``k < l``, then imaginary
    off-diagonal in the same order, then the ``d - 1`` diagonal ones.
    """
    out = []
    for k in range(d):
        for l in range(k + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[k, l] = m[l, k] = 1 / np.sqrt(2)
            out.append(m)
    for k in range(d):
        for l in range(k + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[k, l] = -1j / np.sqrt(2)
            m[l, k] = 1j / np.sqrt(2)
            out.append(m)
    for k in range(1, d):
        diag = np.zeros(d)
        diag[:k] = 1.0
        diag[k] = -k
        out.append(np.diag(diag / np.sqrt(k * (k + 1))).astype(complex))
    return out


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def common_blocks(ops: Sequence[np.ndarray], tol: float = 1e-9, seed: int = 0) -> list[np.ndarray]:
    """Isometries ``V_b`` with ``ops`` simultaneously block diagonal in ``[V_1 ... V_n]``.

    The blocks are the eigenspaces of a random Hermitian element of the
    commutant of ``ops``. Real isometries are returned when every operator is
    real. The columns of all blocks together form a unitary.
    """
    ops = [np.asarray(o) for o in ops]
    d = ops[0].shape[0]
    real = all(np.abs(o.imag).max(initial=0.0) <= tol for o in ops)
    eye = np.eye(d)
    if real:
        rows = [np.kron(eye, o.real) - np.kron(o.real.T, eye) for o in ops]
    else:
        rows = [np.kron(eye, o) - np.kron(o.T, eye) for o in ops]
    stacked = np.vstack(rows)
    _, sv, vh = np.linalg.svd(stacked)
    scale = max(1.0, sv[0] if sv.size else 1.0)
    null = vh[np.sum(sv > tol * scale):].conj()
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=null.shape[0])
    # vec is column-major: I (x) X acts as X Y for vec(Y) = Y.T.ravel()
    y = (weights @ null).reshape(d, d).T
    y = (y + y.conj().T) / 2
    w, v = np.linalg.eigh(y.real if real else y)
    gap = tol * max(1.0, np.abs(w).max())
    blocks, start = [], 0
    for k in range(1, d + 1):
        if k == d or w[k] - w[k - 1] > max(gap, 1e-7 * (w[-1] - w[0])):
            blocks.append(v[:, start:k])
            start = k
    return blocks
