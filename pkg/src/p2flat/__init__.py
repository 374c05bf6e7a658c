"""Flatness by pure prolongation for driftless control systems.

Decide whether a driftless system becomes static-feedback linearizable
after prolonging selected inputs, compute the minimal prolongation
order and controllability indices, emit flat-output PDE data, and
verify candidate flat outputs and parametrizations.
"""

from .expr import (
    Chart,
    Expr,
    Scalar,
    ExprError,
    ExprSyntaxError,
    UndeclaredSymbolError,
    ExprDomainError,
    EvaluationError,
    DivisionByZeroError,
    parse_expr,
    simplify,
    differentiate,
    evaluate,
    to_text,
)
from .geometry import (
    VectorField,
    Distribution,
    SampleSet,
    RankReport,
    InvolutivityReport,
    CaseTag,
    SingularityDetected,
    DegenerateChartRegionError,
    AmbiguousStructureError,
    lie_bracket,
    ad_power,
    pointwise_rank,
    is_involutive,
    involutive_closure,
    spans_member,
    largest_involutive_input_sub,
)
from .system import ControlSystem
from .result import ClassificationResult, Verdict
from .prolong import (
    ProlongationOrder,
    ProlongedSystem,
    TowerLevel,
    P2Report,
    build_prolonged,
    tower_level,
    check_p2_conditions,
    search_minimal_prolongation,
)
from .classify import (
    check_static_feedback_linearizable,
    check_mr_flatness,
    classify_two_input,
    classify_3_inputs_6_states,
    classify_3_inputs_5_states,
    classify_m_inputs,
)
from .flatout import (
    OneForm,
    BrunovskyIndices,
    FlatOutputCandidate,
    ParametrizationSpec,
    TrajectoryConfig,
    NotProlongationFlatError,
    DegenerateCandidateError,
    differential,
    annihilator_basis,
    first_integrals,
    brunovsky_indices,
    lie_derivative,
    verify_flat_outputs,
    verify_parametrization,
)

__version__ = "1.0.0"
