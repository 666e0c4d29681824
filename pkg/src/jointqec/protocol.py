"""From a solved joint SDP to an explicit, checked estimation protocol."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import (
    QEC_TOL,
    CodeSpace,
    CovarianceReport,
    Protocol,
    QecReport,
    covariance_check,
    derive_measurement,
    protocol_cost,
    purify_code,
    verify_qec,
)
from .jnt import JntSolution, solve_jnt
from .lindblad import SensingModel


@dataclass
class JointProtocol:
    model: SensingModel
    solution: JntSolution
    code: CodeSpace
    qec: QecReport
    code_cost: float
    protocol: Protocol
    covariance: CovarianceReport

    @property
    def cost(self) -> float:
        return self.solution.cost


def synthesize_protocol(model: SensingModel, solution: JntSolution | None = None, tol: float = 1e-8,
                        qec_tol: float = QEC_TOL) -> JointProtocol:
    """Code, measurement and estimator for the optimal joint protocol of ``model``.

    Generators enter in the model's own frame: the span components dropped
    when orthonormalizing act as multiples of the identity on a valid code.
    """
    if solution is None:
        solution = solve_jnt(model, tol=tol)
    code = purify_code(solution.q_matrix, model.dim)
    qec = verify_qec(code, solution.verdict.span, qec_tol)
    pc = protocol_cost(code, model.generators, model.cost_matrix, model.time)
    protocol = derive_measurement(code, pc.d_matrix, model.cost_matrix)
    cov = covariance_check(protocol, model.generators, model.cost_matrix, model.time)
    return JointProtocol(model, solution, code, qec, pc.cost, protocol, cov)
