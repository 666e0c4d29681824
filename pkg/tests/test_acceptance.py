"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for the lines alone; under
pytest they are also collected into the terminal summary.
"""
from __future__ import annotations

import sys
import time

import numpy as np

from jointqec.analytic import max_entangled_state, two_qubit_code, two_qubit_cos_phi
from jointqec.bench import run_benchmark
from jointqec.codes import protocol_cost, qfi_and_compatibility, verify_qec
from jointqec.jnt import solve_jnt
from jointqec.lindblad import SensingModel, build_lindblad_span, check_hnls
from jointqec.models import (
    hadamard_field, load_model, maximal_advantage, single_qubit, su_d_jz, su_d_noiseless, two_qubit_anticorrelated,
)
from jointqec.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, gell_mann_basis
from jointqec.protocol import synthesize_protocol
from jointqec.sep import bounds, optimize_sep_transform
from jointqec.sud import appendix_d_code, verify_appendix_d

RESULTS: list[str] = []


def _report(n: int, checks: dict, elapsed: float, budget: float) -> None:
    checks = dict(checks)
    checks[f"runtime {elapsed:.1f}s < {budget:g}s"] = elapsed < budget
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s)"
    if failed:
        line += " failed: " + "; ".join(failed)
    RESULTS.append(line)
    print(line)
    assert ok, line


def _near(value, target, tol) -> bool:
    return value is not None and abs(value - target) <= tol


def test_criterion_1_single_qubit():
    t0 = time.perf_counter()
    c_eye = solve_jnt(single_qubit()).cost
    c_w = solve_jnt(single_qubit(cost_matrix=np.diag([4.0, 1.0]))).cost
    _report(1, {
        f"W=I cost {c_eye:.6f} = 1": _near(c_eye, 1.0, 1e-4),
        f"W=diag(4,1) cost {c_w:.6f} = 2.25": _near(c_w, 2.25, 1e-4),
    }, time.perf_counter() - t0, 5)


def test_criterion_2_two_qubit():
    t0 = time.perf_counter()
    model = two_qubit_anticorrelated()
    jp = synthesize_protocol(model)
    span = build_lindblad_span(4, model.strong_lindblads)
    qec = verify_qec(jp.code, span, 1e-6)
    analytic = protocol_cost(two_qubit_code(two_qubit_cos_phi()), model.generators, model.cost_matrix, 1.0).cost
    sep = optimize_sep_transform(model).cost
    _report(2, {
        f"jnt cost {jp.cost:.6f} = 1.3275 (1%)": abs(jp.cost / 1.3275 - 1) <= 0.01,
        f"QEC residual {qec.max_residual:.1e} <= 1e-6": qec.passed,
        f"analytic code cost {analytic:.6f} vs SDP (1%)": abs(analytic / jp.cost - 1) <= 0.01,
        f"sep cost {sep:.6f} = 2.25": _near(sep, 2.25, 1e-3),
    }, time.perf_counter() - t0, 60)


def test_criterion_3_maximal_advantage():
    t0 = time.perf_counter()
    checks = {}
    for p in (2, 3, 5):
        model = maximal_advantage(p)
        jnt = solve_jnt(model).cost
        b = bounds(model)
        checks[f"P={p} jnt {jnt:.6f} = {p / 2}"] = _near(jnt, p / 2, 1e-3)
        checks[f"P={p} sepLowerBound {b.sep_lower_bound:.8f} = {p * p / 2}"] = _near(b.sep_lower_bound, p * p / 2, 1e-6)
        checks[f"P={p} jnt >= sep/P"] = jnt >= b.sep_lower_bound / p - 1e-6
    _report(3, checks, time.perf_counter() - t0, 60)


def test_criterion_4_hadamard():
    t0 = time.perf_counter()
    checks = {}
    budget_ok = True
    for p in (2, 4):
        ts = time.perf_counter()
        model = hadamard_field(p=p)
        sep = optimize_sep_transform(model).cost
        jnt = solve_jnt(model).cost
        checks[f"P={p} sep {sep:.6f} = {p / 4}"] = _near(sep, p / 4, 1e-3)
        checks[f"P={p} jnt {jnt:.6f} = {p / 4}"] = _near(jnt, p / 4, 1e-3)
        if p == 4:
            budget_ok = time.perf_counter() - ts < 120
    checks["P=4 within 120s"] = budget_ok
    _report(4, checks, time.perf_counter() - t0, 240)


def test_criterion_5_su_d_noiseless():
    t0 = time.perf_counter()
    checks = {}
    for d in (2, 3, 4):
        rep = qfi_and_compatibility(max_entangled_state(d), gell_mann_basis(d), 1.0)
        err = float(np.abs(rep.fisher - 4 / d * np.eye(d * d - 1)).max())
        checks[f"d={d} F=(4/d)I err {err:.1e}"] = err <= 1e-9
        checks[f"d={d} compatibility {rep.compatibility:.1e}"] = rep.compatibility <= 1e-10
    jnt = solve_jnt(su_d_noiseless(2)).cost
    checks[f"d=2 jnt {jnt:.6f} = 1.5"] = _near(jnt, 1.5, 1e-3)
    _report(5, checks, time.perf_counter() - t0, 60)


def test_criterion_6_appendix_d():
    t0 = time.perf_counter()
    code = appendix_d_code(1)
    rep = verify_appendix_d(code)
    pair = np.diag(rep.real_fisher)
    _report(6, {
        f"pair QFI {pair.min():.10f}..{pair.max():.10f} = 2/9": bool(np.all(np.abs(pair - 2 / 9) <= 1e-9)),
        f"real-family cost {rep.real_cost:.8f} = 13.5": _near(rep.real_cost, 13.5, 1e-6),
        f"QEC residual {rep.max_qec_residual:.1e} <= 1e-8": rep.max_qec_residual <= 1e-8,
        f"coefficient residual {rep.coefficient_residual:.1e} <= 1e-12": rep.coefficient_residual <= 1e-12,
    }, time.perf_counter() - t0, 60)


def test_criterion_7_su_d_trend(tmp_path):
    t0 = time.perf_counter()
    res = run_benchmark(range(3, 6), tmp_path / "sud")
    checks = {}
    for r in res.rows:
        checks[f"d={r.d} ordering ({r.qfi_trace_bound:.4g} <= {r.jnt_cost:.6g} <= "
               f"min({r.sep_line:.4g}, {r.appendix_d_cost:.4g}))"] = r.ordering_ok
        checks[f"d={r.d} solved ({r.status})"] = r.status == "ok"
    checks[f"log-log slope {res.slope:.3f} in [1.3, 1.7]"] = 1.3 <= res.slope <= 1.7
    _report(7, checks, time.perf_counter() - t0, 900)


SELF_CONSISTENCY_MODELS = [
    ("single_qubit", lambda: single_qubit()),
    ("single_qubit W=diag(4,1)", lambda: single_qubit(cost_matrix=np.diag([4.0, 1.0]))),
    ("two_qubit", lambda: two_qubit_anticorrelated()),
    ("maximal_advantage P=2", lambda: maximal_advantage(2)),
    ("maximal_advantage P=3", lambda: maximal_advantage(3)),
    ("maximal_advantage P=5", lambda: maximal_advantage(5)),
    ("hadamard P=2", lambda: hadamard_field(p=2)),
    ("hadamard P=4", lambda: hadamard_field(p=4)),
    ("su_d_noiseless d=2", lambda: su_d_noiseless(2)),
    ("su_d_jz d=3", lambda: su_d_jz(3)),
    ("qubit_weighted", lambda: load_model(__file__.rsplit("/tests/", 1)[0] + "/models/qubit_weighted.json")),
]


def test_criterion_8_self_consistency():
    t0 = time.perf_counter()
    checks = {}
    for name, make in SELF_CONSISTENCY_MODELS:
        model = make()
        jp = synthesize_protocol(model)
        pc = protocol_cost(jp.code, model.generators, model.cost_matrix, model.time)
        cov = jp.covariance
        sigma_err = float(np.abs(cov.sigma - np.linalg.inv(pc.d_matrix.T @ pc.d_matrix)).max())
        rel = abs(cov.cost / jp.cost - 1)
        res = jp.protocol.measurement_residuals()
        meas = max(res.values())
        checks[f"{name}: Sigma=(D^T D)^-1 err {sigma_err:.1e}"] = sigma_err <= 1e-7
        checks[f"{name}: Tr(W Sigma) vs SDP rel {rel:.1e}"] = rel <= 1e-5
        checks[f"{name}: measurement residual {meas:.1e}"] = meas <= 1e-8
        checks[f"{name}: unbiasedness {cov.bias_residual:.1e}/{cov.derivative_residual:.1e}"] = cov.unbiased
    _report(8, checks, time.perf_counter() - t0, 300)


def test_criterion_9_hnls():
    t0 = time.perf_counter()
    cases = [
        ("{sx, sy} with L=sz", SensingModel(2, [SIGMA_X, SIGMA_Y], [SIGMA_Z]), True),
        ("{sx, sx+sz} with L=sz", SensingModel(2, [SIGMA_X, SIGMA_X + SIGMA_Z], [SIGMA_Z]), False),
        ("{sz} with L=sz", SensingModel(2, [SIGMA_Z], [SIGMA_Z]), False),
    ]
    rng = np.random.default_rng(0)
    checks = {}
    for name, model, expected in cases:
        verdict = check_hnls(model).achievable
        checks[f"{name} -> {expected}"] = verdict == expected
        p = model.n_params
        invariant = True
        for _ in range(20):
            m = rng.normal(size=(p, p))
            while abs(np.linalg.det(m)) < 1e-3:
                m = rng.normal(size=(p, p))
            gens = [sum(m[i, k] * model.generators[k] for k in range(p)) for i in range(p)]
            invariant &= check_hnls(SensingModel(2, gens, model.strong_lindblads)).achievable == expected
        checks[f"{name} invariant under 20 reparametrizations"] = invariant
    _report(9, checks, time.perf_counter() - t0, 60)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failures = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
