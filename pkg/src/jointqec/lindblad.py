"""Lindblad span, projections onto its complement, and the HNLS test."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .operators import (
    as_hermitian,
    hs_inner,
    hs_norm,
    operator_norm,
    orthonormalize_hermitian_set,
    split_hermitian,
    to_real_vector,
)

RANK_RTOL = 1e-9


@dataclass
class SensingModel:
    """Generators ``G_i``, strong/weak Lindblad operators, cost matrix and time."""

    dim: int
    generators: list[np.ndarray]
    strong_lindblads: list[np.ndarray] = field(default_factory=list)
    weak_lindblads: list[np.ndarray] = field(default_factory=list)
    cost_matrix: np.ndarray | None = None
    time: float = 1.0
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ValueError("dim must be positive")
        self.dim = d
        if not self.generators:
            raise ValueError("at least one generator is required")
        self.generators = [as_hermitian(g) for g in self.generators]
        self.strong_lindblads = [np.array(l, dtype=complex) for l in self.strong_lindblads]
        self.weak_lindblads = [np.array(l, dtype=complex) for l in self.weak_lindblads]
        for label, ops in (
            ("generators", self.generators),
            ("strong_lindblads", self.strong_lindblads),
            ("weak_lindblads", self.weak_lindblads),
        ):
            for k, op in enumerate(ops):
                if op.shape != (d, d):
                    raise ValueError(f"{label}[{k}] has shape {op.shape}, expected {(d, d)}")
                if not np.all(np.isfinite(op)):
                    raise ValueError(f"{label}[{k}] has non-finite entries")
        p = len(self.generators)
        if self.cost_matrix is None:
            self.cost_matrix = np.eye(p)
        w = np.array(self.cost_matrix, dtype=float)
        if w.shape != (p, p):
            raise ValueError(f"cost matrix has shape {w.shape}, expected {(p, p)}")
        if not np.allclose(w, w.T, rtol=0, atol=1e-12 * max(1.0, np.abs(w).max())):
            raise ValueError("cost matrix must be symmetric")
        w = (w + w.T) / 2
        ev = np.linalg.eigvalsh(w)
        if ev[0] <= 1e-12 * ev[-1] or ev[-1] <= 0:
            raise ValueError("cost matrix must be positive definite")
        self.cost_matrix = w
        if not self.time > 0:
            raise ValueError("total time must be positive")
        self.time = float(self.time)

    @property
    def n_params(self) -> int:
        return len(self.generators)


@dataclass(frozen=True)
class LindbladSpan:
    """Orthonormal Hermitian basis of the Lindblad span; ``basis[0]`` is ``I/sqrt(d)``."""

    dim: int
    basis: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        return len(self.basis)

    def without_identity(self) -> tuple[np.ndarray, ...]:
        return self.basis[1:]

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        return np.array([hs_inner(b, op) for b in self.basis])


@dataclass
class HnlsVerdict:
    achievable: bool
    projected_generators: list[np.ndarray]
    projected_rank: int
    smallest_singular_value: float
    singular_values: np.ndarray
    transform: np.ndarray | None = None
    span: LindbladSpan | None = None

    def orthonormal_generators(self) -> list[np.ndarray]:
        """``A G_perp``; only defined when the condition holds."""
        if self.transform is None:
            raise ValueError("HNLS does not hold; no orthonormalizing transform")
        a = self.transform
        gp = self.projected_generators
        return [sum(a[i, j] * gp[j] for j in range(len(gp))) for i in range(len(gp))]


def lindblad_span_generators(dim: int, lindblads: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Raw spanning set: identity, split parts of every ``L_k`` and of every ``L_k^dag L_j``."""
    ops = [np.eye(dim, dtype=complex)]
    for l in lindblads:
        ops.extend(split_hermitian(l))
    for lk in lindblads:
        for lj in lindblads:
            ops.extend(split_hermitian(lk.conj().T @ lj))
    return ops


def build_lindblad_span(dim: int, lindblads: Sequence[np.ndarray], tol: float = 1e-9) -> LindbladSpan:
    lindblads = [np.array(l, dtype=complex) for l in lindblads]
    for k, l in enumerate(lindblads):
        if l.shape != (dim, dim):
            raise ValueError(f"Lindblad operator {k} has shape {l.shape}, expected {(dim, dim)}")
    basis, _ = orthonormalize_hermitian_set(lindblad_span_generators(dim, lindblads), tol)
    return LindbladSpan(dim, tuple(basis))


def project_out(g: np.ndarray, span: LindbladSpan) -> np.ndarray:
    """Orthogonal projection of ``g`` onto the complement of ``span``."""
    out = np.array(g, dtype=complex)
    # twice for a result orthogonal to the span at machine precision
    for _ in range(2):
        for b in span.basis:
            out = out - hs_inner(b, out) * b
    return (out + out.conj().T) / 2


def check_hnls(model: SensingModel, rtol: float = RANK_RTOL) -> HnlsVerdict:
    """Decide whether the projected generators are linearly independent."""
    span = build_lindblad_span(model.dim, model.strong_lindblads)
    projected = [project_out(g, span) for g in model.generators]
    coeffs = np.array([to_real_vector(g) for g in projected])
    sv = np.linalg.svd(coeffs, compute_uv=False)
    p = len(projected)
    # relative to the largest singular value, floored by the input scale so that
    # projections that are all round-off do not count as independent
    scale = max((hs_norm(g) for g in model.generators), default=0.0)
    threshold = rtol * max(sv[0] if sv.size else 0.0, scale)
    rank = int(np.sum(sv > threshold)) if threshold > 0 else 0
    smallest = float(sv[p - 1]) if p <= sv.size else 0.0
    achievable = rank == p
    transform = None
    if achievable:
        # Cholesky of the Gram matrix reproduces Gram-Schmidt in input order
        gram = coeffs @ coeffs.T
        chol = np.linalg.cholesky(gram)
        transform = np.linalg.inv(chol)
    return HnlsVerdict(
        achievable=achievable,
        projected_generators=projected,
        projected_rank=rank,
        smallest_singular_value=smallest,
        singular_values=sv,
        transform=transform,
        span=span,
    )


def weak_noise_rate(weak_lindblads: Sequence[np.ndarray]) -> float:
    """Operator norm of ``sum_m J_m^dag J_m``; zero for no weak noise."""
    if len(weak_lindblads) == 0:
        return 0.0
    total = sum(np.asarray(j).conj().T @ np.asarray(j) for j in weak_lindblads)
    return operator_norm((total + total.conj().T) / 2)
