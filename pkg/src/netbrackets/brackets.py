"""
Equal-time and non-equal-time Poisson brackets (numeric).

For observables ``A`` at time ``t`` and ``B`` at time ``t'`` along the
trajectory through ``z0`` at reference time ``tau``, derivatives with respect
to the initial data follow from the chain rule through the tangent map::

    {A(t), B(t')}_tau = grad A(z(t))^T  M(t; tau)  J  M(t'; tau)^T  grad B(z(t'))

At ``t = t' = tau`` the tangent maps are the identity and this reduces to the
ordinary bracket.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dynamics import (
    IntegratorOpts, PhaseState, SystemSpec, propagate, symplectic_form,
)
from .expr import DomainError, Expr, compile_many, gradient_exprs, max_index, parse

__all__ = ["Observable", "equal_time_bracket", "nonequal_time_bracket", "bracket_grid", "observable_gradient"]


@dataclass(frozen=True)
class Observable:
    """A phase-space function evaluated at ``time`` along the general solution."""

    expr: Expr
    time: float

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))


def _as_expr(e: Union[Expr, str], n_dof: int) -> Expr:
    e = parse(e, n_dof) if isinstance(e, str) else e
    if max_index(e) > n_dof:
        raise ValueError(f"observable {e} references variables beyond n_dof={n_dof}")
    return e


def observable_gradient(e: Expr, state: PhaseState) -> np.ndarray:
    """Gradient of ``e`` at ``state``, ordered ``(x1..xN, p1..pN)``."""
    n = state.n_dof
    fn = compile_many(gradient_exprs(e, n))
    g = np.array(fn(state.x.tolist(), state.p.tolist()))
    if not np.all(np.isfinite(g)):
        raise DomainError("non-finite observable gradient")
    return g


def equal_time_bracket(A: Union[Expr, str], B: Union[Expr, str], z: PhaseState) -> float:
    """``sum_k dA/dx_k dB/dp_k - dA/dp_k dB/dx_k`` at ``z``."""
    n = z.n_dof
    gA = observable_gradient(_as_expr(A, n), z)
    gB = observable_gradient(_as_expr(B, n), z)
    return float(gA[:n] @ gB[n:] - gA[n:] @ gB[:n])


def _contract(gA: np.ndarray, MA: np.ndarray, gB: np.ndarray, MB: np.ndarray) -> float:
    J = symplectic_form(gA.size // 2)
    return float((gA @ MA) @ J @ (gB @ MB))


def nonequal_time_bracket(A: Observable, B: Observable, sys: SystemSpec, z0: PhaseState,
                          tau: float, opts: IntegratorOpts = None) -> float:
    """``{A(z(t)), B(z(t'))}_tau`` with derivatives taken with respect to ``z(tau)``."""
    a_expr = _as_expr(A.expr, sys.n_dof)
    b_expr = _as_expr(B.expr, sys.n_dof)
    states = propagate(sys, z0, tau, [A.time, B.time], opts)
    zA, MA = states[A.time]
    zB, MB = states[B.time]
    return _contract(observable_gradient(a_expr, zA), MA.matrix,
                     observable_gradient(b_expr, zB), MB.matrix)


def bracket_grid(A_expr: Union[Expr, str], B_expr: Union[Expr, str], sys: SystemSpec, z0: PhaseState,
                 tau: float, t_grid: Sequence[float], tprime_grid: Sequence[float],
                 opts: IntegratorOpts = None, *, return_maps: bool = False):
    """Table ``T[i, j] = {A(t_i), B(t'_j)}_tau``.

    One tangent map per distinct time is computed (in a single sweep) and
    reused across the table. With ``return_maps=True`` the dict of
    ``time -> (state, TangentMap)`` is returned as a second value.
    """
    a_expr = _as_expr(A_expr, sys.n_dof)
    b_expr = _as_expr(B_expr, sys.n_dof)
    t_grid = [float(t) for t in t_grid]
    tprime_grid = [float(t) for t in tprime_grid]
    if not t_grid or not tprime_grid:
        raise ValueError("time grids must be non-empty")
    if not np.all(np.isfinite(t_grid + tprime_grid)):
        raise ValueError("time grids must be finite")
    states = propagate(sys, z0, tau, t_grid + tprime_grid, opts)

    def rows(expr: Expr, grid: list[float]) -> np.ndarray:
        # d(obs(t)) / d z(tau) for every time in the grid
        out = []
        for t in grid:
            z, tm = states[t]
            out.append(observable_gradient(expr, z) @ tm.matrix)
        return np.array(out)

    J = symplectic_form(sys.n_dof)
    table = rows(a_expr, t_grid) @ J @ rows(b_expr, tprime_grid).T
    if return_maps:
        return table, states
    return table
