"""
无穷时域 LQ 最优控制数值库
超越最优性的构造、检验、存在性证书与不存在性诊断
"""

from .errors import (OvertakeError, SignalDomainError, DivergentTailError, UnsupportedTailError,
                     NotSquareIntegrableError, DegenerateSignalError, StateOverflowError,
                     DegenerateSpectrumError, RiccatiError, StabilizerRequiredError,
                     SingularGramianError, RangeConditionError, HypothesisViolationError,
                     NotApplicableError, ContractionViolatedError, NumericalInconsistencyError,
                     ScenarioError)
from .signals import Atom, Signal, signal_from_dict, signal_inner
from .core import LqProblem, HypothesisReport, validate_problem, decay_constants, matrix_exp
from .decomp import (ControllableSubspace, DecomposedProblem, StandardFormReduction,
                     controllable_subspace, stabilizer, decompose, check_compatibility,
                     reduce_to_standard_form)
from .riccati import (RiccatiSolution, EtaSolution, OptimalSynthesis, solve_are, solve_eta,
                      synthesize_optimal, value_function)
from .sim import Trajectory, AbelResult, propagate, integrate_state, cost_JT, cesaro_mean, abel_mean
from .overtake import (ComparisonTrace, VariationalKernels, variational_kernels, corollary_bound,
                       variational_gap, comparison_trace, horizon_schedule)
from .fredholm import (BoxControlSet, FredholmSetup, FredholmSolution, ExistenceCertificate,
                       build_setup, solve_fredholm, certify_existence)
from .diagnose import (PolarDecomposition, GrowthReport, FlagCertificate, Witness,
                       polar_decompose, growth_report, steering_gramian, gramian_threshold,
                       witness_eta_control, witness_theta_tracking, witness_weak_direction, refute)

__version__ = "1.0.0"

__all__ = [
    'OvertakeError', 'SignalDomainError', 'DivergentTailError', 'UnsupportedTailError',
    'NotSquareIntegrableError', 'DegenerateSignalError', 'StateOverflowError',
    'DegenerateSpectrumError', 'RiccatiError', 'StabilizerRequiredError', 'SingularGramianError',
    'RangeConditionError', 'HypothesisViolationError', 'NotApplicableError',
    'ContractionViolatedError', 'NumericalInconsistencyError', 'ScenarioError',
    'Atom', 'Signal', 'signal_from_dict', 'signal_inner',
    'LqProblem', 'HypothesisReport', 'validate_problem', 'decay_constants', 'matrix_exp',
    'ControllableSubspace', 'DecomposedProblem', 'StandardFormReduction', 'controllable_subspace',
    'stabilizer', 'decompose', 'check_compatibility', 'reduce_to_standard_form',
    'RiccatiSolution', 'EtaSolution', 'OptimalSynthesis', 'solve_are', 'solve_eta',
    'synthesize_optimal', 'value_function',
    'Trajectory', 'AbelResult', 'propagate', 'integrate_state', 'cost_JT', 'cesaro_mean', 'abel_mean',
    'ComparisonTrace', 'VariationalKernels', 'variational_kernels', 'corollary_bound',
    'variational_gap', 'comparison_trace', 'horizon_schedule',
    'BoxControlSet', 'FredholmSetup', 'FredholmSolution', 'ExistenceCertificate', 'build_setup',
    'solve_fredholm', 'certify_existence',
    'PolarDecomposition', 'GrowthReport', 'FlagCertificate', 'Witness', 'polar_decompose',
    'growth_report', 'steering_gramian', 'gramian_threshold', 'witness_eta_control',
    'witness_theta_tracking', 'witness_weak_direction', 'refute',
]
