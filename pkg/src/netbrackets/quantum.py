"""
Heisenberg-picture operators of linear systems (hbar = 1).

A linear operator ``c_x . x_hat + c_p . p_hat + c_1`` is stored by its
coefficients. For a quadratic Hamiltonian the Heisenberg operators are
exactly such combinations, with coefficients read off the rows of the
classical flow map at reference time 0, and the commutator of two of them
is a multiple of the identity fixed by ``[x_k, p_l] = i delta_kl``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .brackets import Observable, nonequal_time_bracket
from .dynamics import IntegratorOpts, PhaseState, SystemSpec, _affine_exponential
from .expr import Expr, VarId, gradient_exprs, hessian_exprs, is_constant, max_index, parse, evaluate

__all__ = [
    "LinearOperator", "CommutatorResult", "CorrespondenceReport", "CorrespondenceError",
    "heisenberg_operator", "evolve_linear", "commutator", "correspondence_check",
    "matrix_commutator_check", "ladder_matrices",
]


class CorrespondenceError(ValueError):
    """A precondition for the exact classical-quantum equality failed."""


@dataclass
class LinearOperator:
    c_x: np.ndarray
    c_p: np.ndarray
    c_1: complex = 0.0

    def __post_init__(self):
        self.c_x = np.atleast_1d(np.asarray(self.c_x, dtype=complex))
        self.c_p = np.atleast_1d(np.asarray(self.c_p, dtype=complex))
        self.c_1 = complex(self.c_1)
        if self.c_x.shape != self.c_p.shape:
            raise ValueError("c_x and c_p must have the same length")
        if not (np.all(np.isfinite(self.c_x)) and np.all(np.isfinite(self.c_p)) and np.isfinite(self.c_1)):
            raise ValueError("operator coefficients must be finite")

    @property
    def n_dof(self) -> int:
        return self.c_x.size

    @classmethod
    def generator(cls, v: VarId, n_dof: int) -> "LinearOperator":
        c = np.zeros(2 * n_dof, dtype=complex)
        c[(v.index - 1) + (n_dof if v.kind == "p" else 0)] = 1.0
        return cls(c[:n_dof], c[n_dof:])

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.c_x + other.c_x, self.c_p + other.c_p, self.c_1 + other.c_1)

    def __rmul__(self, scalar: complex) -> "LinearOperator":
        return LinearOperator(scalar * self.c_x, scalar * self.c_p, scalar * self.c_1)

    def __sub__(self, other: "LinearOperator") -> "LinearOperator":
        return self + (-1) * other


@dataclass
class CommutatorResult:
    scalar: complex
    is_scalar: bool = True


def commutator(a: LinearOperator, b: LinearOperator) -> CommutatorResult:
    """``[a, b] = i * sum_k (a_xk b_pk - a_pk b_xk)`` times the identity."""
    if a.n_dof != b.n_dof:
        raise ValueError(f"dimension mismatch: {a.n_dof} vs {b.n_dof} degrees of freedom")
    return CommutatorResult(1j * complex(np.sum(a.c_x * b.c_p - a.c_p * b.c_x)), True)


def _require_quadratic(sys: SystemSpec):
    if sys.kind != "quadratic":
        raise CorrespondenceError("system is not quadratic: its Hessian is not constant, so the "
                                  "Heisenberg operators are not linear in x, p")


def heisenberg_operator(sys: SystemSpec, generator: Union[VarId, str], t: float) -> LinearOperator:
    """Heisenberg operator of a canonical generator at time ``t`` (Schroedinger picture at 0)."""
    _require_quadratic(sys)
    if isinstance(generator, str):
        v = parse(generator, sys.n_dof)
        generator = VarId(v.kind, v.index)
    n = sys.n_dof
    M, c = _affine_exponential(sys, float(t))
    row = (generator.index - 1) + (n if generator.kind == "p" else 0)
    return LinearOperator(M[row, :n], M[row, n:], c[row])


def _linear_coefficients(e: Expr, n: int, label: str) -> tuple[np.ndarray, float]:
    hess = hessian_exprs(e, n)
    if not all(is_constant(h) and evaluate(h, np.zeros(2 * n)) == 0 for row in hess for h in row):
        raise CorrespondenceError(f"observable {label} is not linear in x, p; the correspondence "
                                  "need not be an equality because of operator ordering")
    grad = gradient_exprs(e, n)
    zero = np.zeros(2 * n)
    coeffs = np.array([evaluate(g, zero) for g in grad])
    return coeffs, evaluate(e, zero)


def evolve_linear(sys: SystemSpec, A: Union[Expr, str], t: float) -> LinearOperator:
    """``A(x_hat(t), p_hat(t))`` for an observable ``A`` linear in ``x, p``."""
    _require_quadratic(sys)
    n = sys.n_dof
    A = parse(A, n) if isinstance(A, str) else A
    coeffs, offset = _linear_coefficients(A, n, str(A))
    M, c = _affine_exponential(sys, float(t))
    return LinearOperator(coeffs @ M[:, :n], coeffs @ M[:, n:], coeffs @ c + offset)


@dataclass
class CorrespondenceReport:
    classical: float
    quantum: complex
    defect: float


def correspondence_check(sys: SystemSpec, A: Union[Expr, str], B: Union[Expr, str], t: float, t_prime: float,
                         z0: PhaseState = None, opts: IntegratorOpts = None) -> CorrespondenceReport:
    """Compare ``{A(t), B(t')}_0`` with ``-i [A_hat(t), B_hat(t')]``."""
    _require_quadratic(sys)
    n = sys.n_dof
    A = parse(A, n) if isinstance(A, str) else A
    B = parse(B, n) if isinstance(B, str) else B
    if max(max_index(A), max_index(B)) > n:
        raise CorrespondenceError("observable references variables beyond the system size")
    a_op = evolve_linear(sys, A, t)
    b_op = evolve_linear(sys, B, t_prime)
    if z0 is None:
        z0 = PhaseState(np.zeros(n), np.zeros(n), 0.0)
    if z0.time != 0.0:
        raise CorrespondenceError("the quantum side is fixed at reference time 0; z0.time must be 0")
    classical = nonequal_time_bracket(Observable(A, t), Observable(B, t_prime), sys, z0, 0.0, opts)
    quantum = -1j * commutator(a_op, b_op).scalar
    return CorrespondenceReport(classical, quantum, abs(classical - quantum))


def ladder_matrices(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated ``x_hat``, ``p_hat`` on Fock levels ``0..n_max`` (unit mass and frequency)."""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2.0)
    p = 1j * (ad - a) / np.sqrt(2.0)
    return x, p


@dataclass
class MatrixCommutatorReport:
    block_defect: float
    n_max: int
    block_size: int


def matrix_commutator_check(t: float, t_prime: float, n_max: int = 32) -> MatrixCommutatorReport:
    """Check ``[x_hat(t), p_hat(t')]`` for the unit oscillator on a truncated Fock space.

    Truncation spoils the canonical commutator in the top levels, so only the
    leading ``n_max - 2`` levels are compared against
    ``i (cos t cos t' + sin t sin t')`` times the identity.
    """
    if n_max < 8:
        raise ValueError("n_max must be at least 8")
    x, p = ladder_matrices(n_max)
    xt = x * np.cos(t) + p * np.sin(t)
    pt = -x * np.sin(t_prime) + p * np.cos(t_prime)
    comm = xt @ pt - pt @ xt
    k = n_max - 2
    expected = 1j * (np.cos(t) * np.cos(t_prime) + np.sin(t) * np.sin(t_prime)) * np.eye(k)
    return MatrixCommutatorReport(float(np.max(np.abs(comm[:k, :k] - expected))), n_max, k)
