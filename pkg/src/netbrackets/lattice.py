"""
Scalar field on a periodic 1-D lattice (Klein-Gordon dynamics).

Sites ``i = 1..L`` carry a field value ``phi_i`` and a momentum density
``pi_i``. The Hamiltonian is

    H = sum_i dx * [ pi_i^2/2 + ((phi_{i+1} - phi_i)/dx)^2/2 + m^2 phi_i^2/2 ]

and the canonical pairs are ``(phi_i, p_i = dx * pi_i)``, so that
``{phi_i, pi_j} = delta_ij / dx``, the lattice form of ``delta(x - x')``.

Field observables are written with ``x_i`` standing for ``phi_i`` and
``p_i`` standing for ``pi_i`` (the density, not the canonical momentum).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .brackets import Observable, nonequal_time_bracket, observable_gradient
from .dynamics import IntegratorOpts, PhaseState, SystemSpec
from .expr import ZERO, Const, Expr, Var, add, const, div, mul, parse, power, sub, substitute

__all__ = [
    "LatticeSpec", "FieldState", "ZeroModeWarning",
    "build_lattice_system", "lattice_zero_modes", "coupling_matrix", "field_hessian",
    "lattice_equal_time_bracket", "lattice_nonequal_bracket", "to_canonical",
    "canonical_observable",
]


class ZeroModeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    dx: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if self.mass < 0:
            raise ValueError("mass must be >= 0")


@dataclass
class FieldState:
    phi: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        self.time = float(self.time)
        if self.phi.shape != self.pi.shape:
            raise ValueError("phi and pi must have the same length")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.pi))):
            raise ValueError("field entries must be finite")

    @property
    def x(self):
        return self.phi

    @property
    def p(self):
        return self.pi


def _num(v: float) -> Const:
    v = float(v)
    return const(int(v)) if v.is_integer() else const(v)


def coupling_matrix(spec: LatticeSpec) -> np.ndarray:
    """Periodic nearest-neighbour Laplacian ``K = 2I - S - S^T`` (zero for ``L = 1``)."""
    L = spec.L
    if L == 1:
        return np.zeros((1, 1))
    shift = np.roll(np.eye(L), 1, axis=1)
    return 2 * np.eye(L) - shift - shift.T


def lattice_zero_modes(spec: LatticeSpec, tol: float = 1e-12) -> int:
    """Number of zero-frequency normal modes of ``m^2 I + K / dx^2``."""
    omega2 = np.linalg.eigvalsh(spec.mass ** 2 * np.eye(spec.L) + coupling_matrix(spec) / spec.dx ** 2)
    return int(np.sum(np.abs(omega2) <= tol))


def field_hessian(spec: LatticeSpec) -> np.ndarray:
    """Hessian of H in the field variables ``(phi, pi)``: ``[[dx (m^2 I + K/dx^2), 0], [0, dx I]]``."""
    L = spec.L
    top = spec.dx * (spec.mass ** 2 * np.eye(L) + coupling_matrix(spec) / spec.dx ** 2)
    return np.block([[top, np.zeros((L, L))], [np.zeros((L, L)), spec.dx * np.eye(L)]])


def build_lattice_system(spec: LatticeSpec) -> SystemSpec:
    """Quadratic :class:`SystemSpec` over canonical pairs ``(phi_i, dx * pi_i)``.

    Emits :class:`ZeroModeWarning` when the massless lattice has a zero mode.
    """
    L, dx, m = spec.L, _num(spec.dx), _num(spec.mass)
    H: Expr = ZERO
    for i in range(1, L + 1):
        phi = Var("x", i)
        p = Var("p", i)
        # dx * pi^2 / 2 with pi = p / dx
        H = add(H, div(power(p, 2), mul(const(2), dx)))
        if L > 1:
            nxt = Var("x", i % L + 1)
            H = add(H, div(power(sub(nxt, phi), 2), mul(const(2), dx)))
        if spec.mass != 0:
            H = add(H, mul(div(mul(dx, power(m, 2)), const(2)), power(phi, 2)))
    n_zero = lattice_zero_modes(spec)
    if n_zero:
        warnings.warn(f"lattice has {n_zero} zero mode(s); they evolve as free particles",
                      ZeroModeWarning, stacklevel=2)
    return SystemSpec(L, H)


def _field_expr(e: Union[Expr, str], spec: LatticeSpec) -> Expr:
    return parse(e, spec.L) if isinstance(e, str) else e


def canonical_observable(e: Union[Expr, str], spec: LatticeSpec) -> Expr:
    """Rewrite a field observable over ``(phi, pi)`` in canonical variables (``pi_i -> p_i / dx``)."""
    e = _field_expr(e, spec)
    dx = _num(spec.dx)
    return substitute(e, lambda v: div(Var("p", v.index), dx) if v.kind == "p" and v.tag is None else v)


def to_canonical(state: FieldState, spec: LatticeSpec) -> PhaseState:
    return PhaseState(state.phi, spec.dx * state.pi, state.time)


def lattice_equal_time_bracket(spec: LatticeSpec, A: Union[Expr, str], B: Union[Expr, str],
                               state: FieldState) -> float:
    """``(1/dx) sum_j [dA/dphi_j dB/dpi_j - dA/dpi_j dB/dphi_j]`` at ``state``."""
    A = _field_expr(A, spec)
    B = _field_expr(B, spec)
    z = PhaseState(state.phi, state.pi, state.time)
    L = spec.L
    gA = observable_gradient(A, z)
    gB = observable_gradient(B, z)
    return float((gA[:L] @ gB[L:] - gA[L:] @ gB[:L]) / spec.dx)


def lattice_nonequal_bracket(spec: LatticeSpec, A: Observable, B: Observable, initial: FieldState,
                             tau: float, opts: IntegratorOpts = None, system: SystemSpec = None) -> float:
    """``{A(t), B(t')}_tau`` for field observables along the lattice flow.

    Momentum densities in ``A`` and ``B`` are rescaled to canonical momenta
    and the work is delegated to the ordinary non-equal-time bracket.
    """
    if system is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroModeWarning)
            system = build_lattice_system(spec)
    a = Observable(canonical_observable(A.expr, spec), A.time)
    b = Observable(canonical_observable(B.expr, spec), B.time)
    return nonequal_time_bracket(a, b, system, to_canonical(initial, spec), tau, opts)
