"""Weak simulation of quantum circuits by classical sampling.

Expectation values of circuits whose input is a tractable state and whose
back-propagated observable is a sparse operator are estimated by Monte-Carlo
means of amplitude ratios, to additive accuracy epsilon with confidence
1 - delta.
"""

__version__ = "0.1.0"

from .core import (
    BitString,
    BudgetExceeded,
    Estimate,
    OutOfClass,
    PreconditionError,
    RandomStream,
    RangeViolation,
    SchemaError,
    VerificationFailed,
    WeaksimError,
    estimate_mean,
    required_samples,
)
from .ct_states import (
    BasisPreservedState,
    MpsState,
    PhaseState,
    ProductState,
    QftProductState,
    StabilizerState,
)
from .matchgate import MatchgateCircuit, MatchgateState, conjugate_z1
from .ecs_ops import PauliSum, PauliSumOp, basis_preserving_op, compose, conjugate, local_gate_op
from .estimators import (
    ErrorBudget,
    estimate_local_observable,
    estimate_matrix_element,
    estimate_overlap,
    estimate_partial_projected,
)
from .simulators import (
    simulate_cnot_expx,
    simulate_composed,
    simulate_dj_class,
    simulate_sparse_circuit,
    simulate_conjugated,
)
from .boolean_fourier import (
    BooleanOracle,
    FourierTable,
    km_heavy_coefficients,
    resolve_oracle,
    simulate_five_round,
    wg_operator,
)
