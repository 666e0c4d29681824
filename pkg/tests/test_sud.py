import math

import numpy as np
import pytest

from jointqec.sud import AppendixDError, appendix_d_code, appendix_d_cost, pair_coefficients, verify_appendix_d


@pytest.fixture(scope="module")
def report_j1():
    return verify_appendix_d(appendix_d_code(1))


def test_j1_pair_fisher(report_j1):
    f = report_j1.real_fisher
    assert np.allclose(np.diag(f), 2 / 9, atol=1e-9)
    assert np.allclose(f - np.diag(np.diag(f)), 0, atol=1e-9)
    assert np.allclose(report_j1.imag_fisher, f, atol=1e-9)
    assert report_j1.compatibility <= 1e-10


def test_j1_costs(report_j1):
    assert report_j1.real_cost == pytest.approx(13.5, abs=1e-6)
    assert report_j1.imag_cost == pytest.approx(13.5, abs=1e-6)
    assert report_j1.combined_cost == pytest.approx(54.0, abs=1e-6)


def test_j1_error_correction(report_j1):
    assert report_j1.max_qec_residual <= 1e-8
    assert report_j1.orthonormality_residual <= 1e-12
    assert report_j1.coefficient_residual <= 1e-12
    assert report_j1.condition_residual <= 1e-12


@pytest.mark.parametrize("j", [1, 2, 3])
def test_coefficients_normalized(j):
    code = appendix_d_code(j)
    for c in code.coefficients:
        assert c.norm_residual <= 1e-12
        assert min(c.q, c.r, c.s) >= 0


@pytest.mark.parametrize("j", [2, 3])
def test_real_cost_formula(j):
    code = appendix_d_code(j)
    rep = verify_appendix_d(code)
    assert rep.real_cost == pytest.approx(code.predicted_real_cost, rel=1e-9)
    assert np.allclose(np.diag(rep.real_fisher), code.predicted_pair_fisher, atol=1e-9)
    assert rep.max_qec_residual <= 1e-8
    # diagonal generators: F >= 1/(2j+1)
    assert np.all(rep.diag_fishers >= 1 / code.d - 1e-9)


def test_invalid_spin():
    with pytest.raises(AppendixDError):
        appendix_d_code(1.5)
    with pytest.raises(AppendixDError):
        appendix_d_code(0)


def test_negative_coefficient_detected():
    with pytest.raises(AppendixDError):
        pair_coefficients(1, 1, 0, p2=0.99)


def test_cost_for_even_dimension_is_nan():
    assert math.isnan(appendix_d_cost(4))
    assert appendix_d_cost(3) == pytest.approx(54.0, abs=1e-6)
