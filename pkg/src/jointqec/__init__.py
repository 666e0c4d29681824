"""Error-corrected joint estimation of several Hamiltonian parameters."""
__version__ = "0.1.0"

from .codes import CodeError, CodeSpace, covariance_check, derive_measurement, protocol_cost, purify_code, verify_qec
from .jnt import HnlsViolation, JntSolution, SolverFailure, solve_jnt
from .lindblad import SensingModel, build_lindblad_span, check_hnls
from .models import builtin_model, load_code, load_model, resolve_model, save_code, save_model
from .protocol import JointProtocol, synthesize_protocol
from .sep import SepError, bounds, optimize_sep_transform, sep_from_jnt

__all__ = [
    "CodeError", "CodeSpace", "HnlsViolation", "JntSolution", "JointProtocol", "SensingModel", "SepError",
    "SolverFailure", "bounds", "build_lindblad_span", "builtin_model", "check_hnls", "covariance_check",
    "derive_measurement", "load_code", "load_model", "optimize_sep_transform", "protocol_cost", "purify_code",
    "resolve_model", "save_code", "save_model", "sep_from_jnt", "solve_jnt", "synthesize_protocol", "verify_qec",
]
