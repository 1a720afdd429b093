"""Equal-time and non-equal-time Poisson brackets along Hamiltonian flows."""

from .brackets import Observable, bracket_grid, equal_time_bracket, nonequal_time_bracket
from .dynamics import (
    IntegrationError, IntegratorOpts, PhaseState, SymplecticWarning, SystemSpec, TangentMap,
    flow, linear_flow, propagate, symplectic_form, tangent_map,
)
from .expr import (
    DomainError, Expr, ParseError, TimeTag, VarId, differentiate, evaluate, gradient_hessian, parse,
    to_string,
)
from .lattice import (
    FieldState, LatticeSpec, build_lattice_system, lattice_equal_time_bracket, lattice_nonequal_bracket,
)
from .quantum import (
    CommutatorResult, LinearOperator, commutator, correspondence_check, heisenberg_operator,
    matrix_commutator_check,
)
from .symbolic import DeltaExpr, delta, parse_tagged, symbolic_bracket, symbolic_partial
from .validation import OracleReport, run_suite

__version__ = "0.1.0"
