import numpy as np
import pytest

from jointqec.jnt import (
    MAX_EIGENVALUE, TRACE, HnlsViolation, assemble_jnt_sdp, build_basis_partition, reconstruct_q, solve_jnt,
)
from jointqec.lindblad import SensingModel, check_hnls
from jointqec.models import maximal_advantage, single_qubit, su_d_jz, su_d_noiseless, two_qubit_anticorrelated
from jointqec.operators import SIGMA_Z, gram_matrix, partial_trace_ancilla, BipartiteLayout


def _partition(model):
    v = check_hnls(model)
    return build_basis_partition(v.span, v.orthonormal_generators())


def _ref_trace(q, op, n_ref, d):
    """``Tr_S[Q (1 (x) op)]`` on the reference factor."""
    return partial_trace_ancilla(q @ np.kron(np.eye(n_ref), op), BipartiteLayout(n_ref, d), over="ancilla")


@pytest.mark.parametrize("model, counts", [
    (single_qubit(), (1, 2, 1, 0)),
    (su_d_jz(3), (1, 6, 2, 0)),
    (su_d_noiseless(2), (1, 3, 0, 0)),
    (two_qubit_anticorrelated(), (1, 3, 2, 10)),
])
def test_partition_counts_and_orthonormality(model, counts):
    part = _partition(model)
    assert part.counts() == counts
    assert sum(counts) == model.dim ** 2
    assert np.allclose(gram_matrix(part.all_elements()), np.eye(model.dim ** 2), atol=1e-10)


def test_partition_rejects_overlap():
    v = check_hnls(single_qubit())
    with pytest.raises(ValueError):
        build_basis_partition(v.span, [SIGMA_Z / np.sqrt(2)])


def test_sdp_sizes():
    problem, _ = assemble_jnt_sdp(_partition(single_qubit()), np.eye(2), MAX_EIGENVALUE)
    # 2*9 (G^eff) + 1 (nu) + 3 (K) + 1 (w)
    assert problem.n_vars == 23
    assert [b.size for b in problem.blocks] == [12, 4, 4]
    problem, _ = assemble_jnt_sdp(_partition(single_qubit()), np.eye(2), TRACE)
    assert problem.n_vars == 25
    problem, _ = assemble_jnt_sdp(_partition(two_qubit_anticorrelated()), np.eye(3))
    assert problem.blocks[0].size == 2 * 16


def test_single_qubit_costs():
    assert solve_jnt(single_qubit()).cost == pytest.approx(1.0, abs=1e-6)
    w = np.diag([4.0, 1.0])
    assert solve_jnt(single_qubit(cost_matrix=w)).cost == pytest.approx(2.25, abs=1e-6)


def test_max_eigenvalue_objective_is_looser():
    # min w with w I >= K^2 bounds P * lambda_max(K^2), which equals the trace only when K^2 is flat
    assert solve_jnt(single_qubit(), objective=MAX_EIGENVALUE).cost == pytest.approx(1.0, abs=1e-6)
    w = np.diag([4.0, 1.0])
    loose = solve_jnt(single_qubit(cost_matrix=w), objective=MAX_EIGENVALUE).cost
    assert loose == pytest.approx(2.5, abs=1e-6)
    assert loose >= solve_jnt(single_qubit(cost_matrix=w)).cost


def test_maximal_advantage_cost():
    for p in (2, 3):
        assert solve_jnt(maximal_advantage(p)).cost == pytest.approx(p / 2, abs=1e-6)


def test_time_scaling():
    c1 = solve_jnt(single_qubit(cost_matrix=np.diag([2.0, 1.0]))).cost
    c2 = solve_jnt(single_qubit(cost_matrix=np.diag([2.0, 1.0]), time=2.0)).cost
    assert c1 / c2 == pytest.approx(4, rel=1e-7)


def test_weight_covariance():
    w = np.array([[2.0, 0.3], [0.3, 1.0]])
    base = solve_jnt(single_qubit(cost_matrix=w)).cost
    assert solve_jnt(single_qubit(cost_matrix=3.5 * w)).cost == pytest.approx(3.5 * base, rel=1e-6)


def test_hnls_violation_raises():
    with pytest.raises(HnlsViolation):
        solve_jnt(SensingModel(2, [SIGMA_Z], [SIGMA_Z]))


@pytest.mark.parametrize("model", [single_qubit(), maximal_advantage(3), su_d_noiseless(2), two_qubit_anticorrelated()])
def test_solution_invariants(model):
    sol = solve_jnt(model)
    part = sol.partition
    p, d = model.n_params, model.dim
    n_ref = p + 1
    assert sol.diagnostics["q_min_eigenvalue"] >= -1e-7
    assert sol.diagnostics["q_trace_residual"] <= 1e-7
    assert sol.cost == pytest.approx(p * sol.w / (4 * model.time ** 2))
    for i, g_eff in enumerate(sol.effective_generators):
        assert np.allclose(g_eff, g_eff.conj().T, atol=1e-12)
        assert np.allclose(sol.gamma[:, i], g_eff[1:, 0].imag)
    for g, g_eff in zip(part.generators, sol.effective_generators):
        assert np.allclose(_ref_trace(sol.q_matrix, g, n_ref, d), g_eff.T, atol=1e-6)
    for s in part.span_complements:
        m = _ref_trace(sol.q_matrix, s, n_ref, d)
        assert np.allclose(m, np.trace(m) / n_ref * np.eye(n_ref), atol=1e-6)
    # gauge: Gamma W'^{-1/2} is positive semidefinite
    vals, vecs = np.linalg.eigh(sol.frame_cost_matrix)
    m = sol.gamma @ (vecs / np.sqrt(vals)) @ vecs.T
    assert np.allclose(m, m.T, atol=1e-6)
    assert np.linalg.eigvalsh((m + m.T) / 2).min() >= -1e-6
    assert sol.diagnostics["gamma_cost"] == pytest.approx(sol.cost, rel=1e-5)


def test_reconstruct_q_identity_part():
    part = _partition(single_qubit())
    zero = [np.zeros((3, 3))] * 2
    q = reconstruct_q(part, zero, np.zeros(1), [])
    assert np.allclose(q, np.eye(6) / 2)


def test_su_d_jz_small():
    sol = solve_jnt(su_d_jz(3), tol=1e-7)
    # bounds of the benchmark: QFI chain below, separate line above
    assert 36 / (4 * 8 / 3) - 1e-6 <= sol.cost <= 18
