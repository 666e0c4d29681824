import numpy as np
import pytest

from jointqec.analytic import (
    PHI_PLUS, dfs_code, max_advantage_code, max_entangled_state, two_qubit_code, two_qubit_code_cost, two_qubit_cos_phi,
)
from jointqec.codes import (
    CodeError, CodeSpace, covariance_check, derive_measurement, effective_generators, protocol_cost, purify_code,
    qfi_and_compatibility, verify_qec,
)
from jointqec.lindblad import build_lindblad_span
from jointqec.models import maximal_advantage, single_qubit, su_d_noiseless, two_qubit_anticorrelated
from jointqec.operators import SIGMA_X, SIGMA_Z, gell_mann_basis
from jointqec.protocol import synthesize_protocol

I2 = np.eye(2)


def _two_qubit_span():
    m = two_qubit_anticorrelated()
    return m, build_lindblad_span(4, m.strong_lindblads)


def test_purify_block_identity():
    p, d = 2, 2
    q = np.kron(np.eye(p + 1), np.eye(d) / d)
    code = purify_code(q, d)
    assert code.orthonormality_residual() <= 1e-12
    assert code.layout.dim_ancilla <= (p + 1) * d
    for c in code.tensor():
        # each state is maximally entangled: reduced system state I/d
        assert np.allclose(c @ c.conj().T, np.eye(d) / d)


def test_purify_rejects_trace_violation():
    v = np.zeros(6)
    v[0] = 1
    with pytest.raises(CodeError):
        purify_code(np.outer(v, v), 2)


def test_purify_rejects_negative():
    q = np.kron(np.eye(2), np.eye(2) / 2) + np.kron(np.eye(2), SIGMA_Z)
    with pytest.raises(CodeError):
        purify_code(q, 2)


def test_verify_qec_examples():
    model, span = _two_qubit_span()
    assert verify_qec(two_qubit_code(), span).passed
    assert verify_qec(dfs_code(), span).passed
    bad = CodeSpace.from_states([[1, 0, 0, 0], [0, 0, 0, 1]], 2)
    assert not verify_qec(bad, build_lindblad_span(2, [SIGMA_Z])).passed


def test_effective_generators_raw_code():
    model = maximal_advantage(3)
    geff = effective_generators(max_advantage_code(3, phased=False), model.generators)
    for i, g in enumerate(geff, start=1):
        expected = np.zeros((4, 4))
        expected[0, i] = expected[i, 0] = 1 / np.sqrt(2)
        assert np.allclose(g, expected)
        assert np.allclose(g, g.conj().T, atol=1e-10)


def test_protocol_cost_examples():
    for p in (2, 3, 5):
        model = maximal_advantage(p)
        assert protocol_cost(max_advantage_code(p), model.generators, np.eye(p), 1.0).cost == pytest.approx(p / 2)
    with pytest.raises(CodeError, match="does not sense all parameters"):
        protocol_cost(max_advantage_code(3, phased=False), maximal_advantage(3).generators, np.eye(3), 1.0)


def test_two_qubit_analytic_code():
    model, span = _two_qubit_span()
    c = two_qubit_cos_phi()
    assert c == pytest.approx(0.3905, abs=1e-4)
    code = two_qubit_code()
    assert code.orthonormality_residual() <= 1e-12
    cost = protocol_cost(code, model.generators, np.eye(3), 1.0).cost
    assert cost == pytest.approx(two_qubit_code_cost(c), rel=1e-10)
    assert 4 * cost == pytest.approx(5.31, rel=1e-3)
    # the angle minimizes the closed form
    assert two_qubit_code_cost(c) < min(two_qubit_code_cost(c - 1e-3), two_qubit_code_cost(c + 1e-3))


def test_dfs_code_senses_z():
    model, _ = _two_qubit_span()
    gz = model.generators[2]
    assert protocol_cost(dfs_code(), [gz], np.eye(1), 1.0).cost == pytest.approx(0.25)


def test_measurement_and_covariance_on_two_qubit_code():
    model, _ = _two_qubit_span()
    code = two_qubit_code()
    pc = protocol_cost(code, model.generators, np.eye(3), 1.0)
    prot = derive_measurement(code, pc.d_matrix, np.eye(3))
    res = prot.measurement_residuals()
    assert res["orthogonality"] <= 1e-8 and res["idempotence"] <= 1e-8 and res["completeness"] <= 1e-8
    assert prot.n_outcomes == 5
    cov = covariance_check(prot, model.generators, np.eye(3), 1.0)
    assert np.allclose(cov.sigma, np.linalg.inv(pc.d_matrix.T @ pc.d_matrix), atol=1e-7)
    assert np.allclose(cov.sigma, cov.gram_sigma, atol=1e-7)
    assert cov.cost == pytest.approx(pc.cost, rel=1e-7)
    assert cov.unbiased and cov.reconstruction_residual <= 1e-8
    # x-vectors are orthogonal to the input and have a real Gram matrix
    xs = prot.x_vectors
    assert np.abs(xs.conj() @ prot.input_state).max() <= 1e-8
    assert np.abs((xs.conj() @ xs.T).imag).max() <= 1e-8


def test_projectors_dense_check():
    model = single_qubit()
    jp = synthesize_protocol(model)
    es = jp.protocol.projectors()
    assert np.allclose(sum(es), np.eye(es[0].shape[0]), atol=1e-8)
    for k, e in enumerate(es):
        assert np.allclose(e @ e, e, atol=1e-8)
        for f in es[k + 1:]:
            assert np.abs(e @ f).max() <= 1e-8
    assert np.linalg.eigvalsh(es[0]).min() >= -1e-8


def test_single_parameter_measurement_has_three_outcomes():
    code = CodeSpace.from_states([(np.array([1, 0, 0, 1]) / np.sqrt(2)), 1j * np.array([0, 1, 1, 0]) / np.sqrt(2)], 2)
    pc = protocol_cost(code, [SIGMA_X], np.eye(1), 1.0)
    prot = derive_measurement(code, pc.d_matrix)
    assert prot.n_outcomes == 3
    assert covariance_check(prot, [SIGMA_X], np.eye(1), 1.0).unbiased


def test_qfi_max_entangled():
    for d in (2, 3, 4):
        gens = gell_mann_basis(d)
        rep = qfi_and_compatibility(max_entangled_state(d), gens, 1.0)
        assert np.allclose(rep.fisher, 4 / d * np.eye(d * d - 1), atol=1e-9)
        assert rep.compatibility <= 1e-10


def test_qfi_single_parameter():
    # optimal superposition of extreme eigenvectors: F = spread^2 T^2
    psi = np.array([1, 1]) / np.sqrt(2)
    rep = qfi_and_compatibility(psi, [SIGMA_Z], 2.0)
    assert rep.fisher[0, 0] == pytest.approx(4.0 * 4)


@pytest.mark.parametrize("model", [single_qubit(), maximal_advantage(3), su_d_noiseless(2), two_qubit_anticorrelated()])
def test_end_to_end_agreement(model):
    jp = synthesize_protocol(model)
    assert jp.qec.passed
    assert jp.code_cost == pytest.approx(jp.cost, rel=1e-5)
    assert jp.covariance.cost == pytest.approx(jp.cost, rel=1e-5)
    # Cramer-Rao: Tr(W Sigma) >= Tr(W F^-1)
    f = qfi_and_compatibility(jp.code.input_state, model.generators, model.time).fisher
    assert jp.covariance.cost >= np.trace(model.cost_matrix @ np.linalg.inv(f)) - 1e-6


def test_purified_code_matches_effective_generators():
    jp = synthesize_protocol(two_qubit_anticorrelated())
    sol = jp.solution
    geff = effective_generators(jp.code, sol.partition.generators)
    for a, b in zip(geff, sol.effective_generators):
        assert np.allclose(a, b, atol=1e-6)


def test_sdp_code_equivalent_to_analytic():
    # unitary invariants: the Gram matrix of the projected generator actions on c_0
    model = two_qubit_anticorrelated()
    jp = synthesize_protocol(model)

    def invariants(code):
        pc = protocol_cost(code, model.generators, np.eye(3), 1.0)
        return np.linalg.svd(pc.d_matrix, compute_uv=False), pc.cost

    sv_a, cost_a = invariants(two_qubit_code())
    sv_b, cost_b = invariants(jp.code)
    assert cost_a == pytest.approx(cost_b, rel=1e-5)
    assert np.allclose(np.sort(sv_a), np.sort(sv_b), atol=1e-4)
