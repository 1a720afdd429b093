"""
Hamiltonian flows and their tangent maps.

The state is ordered ``z = (x1..xN, p1..pN)`` and Hamilton's equations read
``dz/dt = J grad H(z)`` with ``J = [[0, I], [-I, 0]]``. The tangent map
``M(t; tau) = d z(t) / d z(tau)`` obeys the variational equation
``dM/dt = J Hess H(z(t)) M`` and is integrated jointly with the state.

Quadratic Hamiltonians ``H = 1/2 z^T S z + b^T z + c`` are detected
symbolically (constant Hessian) and propagated exactly with a matrix
exponential.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import expm

from .expr import (
    DomainError, Expr, compile_many, gradient_exprs, hessian_exprs, is_constant, max_index,
    parse, variables,
)

__all__ = [
    "PhaseState", "TangentMap", "SystemSpec", "IntegratorOpts",
    "IntegrationError", "SymplecticWarning",
    "symplectic_form", "flow", "tangent_map", "linear_flow", "propagate",
]

METHODS = ("rk4", "implicit_midpoint")


class IntegrationError(ArithmeticError):
    """The trajectory left the finite reals; ``time`` is the last time reached."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (reached t={time!r})")
        self.time = time


class SymplecticWarning(RuntimeWarning):
    pass


def symplectic_form(n_dof: int) -> np.ndarray:
    eye = np.eye(n_dof)
    zero = np.zeros((n_dof, n_dof))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass
class PhaseState:
    x: np.ndarray
    p: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        self.time = float(self.time)
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise ValueError(f"x and p must be vectors of equal length, got {self.x.shape} and {self.p.shape}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase state entries must be finite")

    @property
    def n_dof(self) -> int:
        return self.x.size

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @classmethod
    def from_vector(cls, z: Sequence[float], time: float = 0.0) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:], time)

    def __repr__(self):
        return f"PhaseState(x={self.x.tolist()}, p={self.p.tolist()}, time={self.time!r})"


@dataclass
class TangentMap:
    """Derivative of the flow ``z(t)`` with respect to initial data ``z(base_time)``."""

    matrix: np.ndarray
    base_time: float
    target_time: float

    @property
    def n_dof(self) -> int:
        return self.matrix.shape[0] // 2

    def symplectic_defect(self) -> float:
        """``max |M^T J M - J|`` (infinity norm over entries)."""
        J = symplectic_form(self.n_dof)
        return float(np.max(np.abs(self.matrix.T @ J @ self.matrix - J)))

    def __matmul__(self, other: "TangentMap") -> "TangentMap":
        # self: sigma -> t, other: tau -> sigma
        if not math.isclose(self.base_time, other.target_time, rel_tol=0, abs_tol=1e-12):
            raise ValueError("tangent maps do not chain: base and target times differ")
        return TangentMap(self.matrix @ other.matrix, other.base_time, self.target_time)


@dataclass
class IntegratorOpts:
    method: str = "rk4"
    dt: float = 1e-3
    symplectic_tol: float = 1e-6
    # propagate quadratic systems with the matrix exponential instead of stepping
    exact_linear: bool = True

    def __post_init__(self):
        if self.method == "midpoint":
            self.method = "implicit_midpoint"
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator {self.method!r}; choose from {METHODS}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")


@dataclass
class SystemSpec:
    """An autonomous Hamiltonian system with ``n_dof`` degrees of freedom."""

    n_dof: int
    H: Union[Expr, str]
    kind: str = field(init=False)

    def __post_init__(self):
        if self.n_dof < 1:
            raise ValueError("n_dof must be >= 1")
        if isinstance(self.H, str):
            self.H = parse(self.H, self.n_dof)
        if max_index(self.H) > self.n_dof:
            raise ValueError(f"Hamiltonian references variables beyond n_dof={self.n_dof}")
        if any(v.tag is not None for v in variables(self.H)):
            raise ValueError("Hamiltonian may not contain time-tagged variables")
        self._grad = gradient_exprs(self.H, self.n_dof)
        self._hess = hessian_exprs(self.H, self.n_dof)
        flat_hess = tuple(h for row in self._hess for h in row)
        self._grad_fn = compile_many(self._grad)
        self._grad_hess_fn = compile_many(self._grad + flat_hess)
        self.kind = "quadratic" if all(is_constant(h) for h in flat_hess) else "general"
        self._affine = None

    def gradient(self, z: np.ndarray) -> np.ndarray:
        n = self.n_dof
        return np.array(self._grad_fn(z[:n].tolist(), z[n:].tolist()))

    def gradient_hessian(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_dof
        vals = np.array(self._grad_hess_fn(z[:n].tolist(), z[n:].tolist()))
        return vals[: 2 * n], vals[2 * n:].reshape(2 * n, 2 * n)

    def energy(self, state: Union[PhaseState, np.ndarray]) -> float:
        from .expr import evaluate
        return evaluate(self.H, state if isinstance(state, PhaseState) else PhaseState.from_vector(state))

    def affine_part(self) -> tuple[np.ndarray, np.ndarray]:
        """``(S, b)`` with ``H = 1/2 z^T S z + b^T z + const``; quadratic systems only."""
        if self.kind != "quadratic":
            raise ValueError("system is not quadratic (its Hessian is not constant)")
        if self._affine is None:
            b, S = self.gradient_hessian(np.zeros(2 * self.n_dof))
            self._affine = (S, b)
        return self._affine


# ---------------------------------------------------------------------------
# exact propagation for quadratic systems

def _affine_exponential(sys: SystemSpec, duration: float) -> tuple[np.ndarray, np.ndarray]:
    S, b = sys.affine_part()
    n2 = 2 * sys.n_dof
    J = symplectic_form(sys.n_dof)
    aug = np.zeros((n2 + 1, n2 + 1))
    aug[:n2, :n2] = J @ S
    aug[:n2, n2] = J @ b
    if duration == 0:
        return np.eye(n2), np.zeros(n2)
    E = expm(duration * aug)
    return E[:n2, :n2], E[:n2, n2]


def linear_flow(sys: SystemSpec, tau: float, t: float) -> TangentMap:
    """Exact tangent map ``exp((t - tau) J S)`` of a quadratic system."""
    if sys.kind != "quadratic":
        raise ValueError("linear_flow requires a quadratic Hamiltonian (constant Hessian)")
    M, _ = _affine_exponential(sys, t - tau)
    return TangentMap(M, float(tau), float(t))


# ---------------------------------------------------------------------------
# numerical integration

def _check_finite(y: np.ndarray, time: float):
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state", time)


def _rk4_segment(sys: SystemSpec, z: np.ndarray, M, t0: float, t1: float, dt: float):
    n = sys.n_dof
    steps = max(1, math.ceil(abs(t1 - t0) / dt - 1e-9))
    h = (t1 - t0) / steps

    if M is None:
        def f(y):
            g = sys.gradient(y)
            return np.concatenate([g[n:], -g[:n]])

        for k in range(steps):
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            _check_finite(z, t0 + (k + 1) * h)
        return z, None

    def F(y, Y):
        g, Hs = sys.gradient_hessian(y)
        HY = Hs @ Y
        return np.concatenate([g[n:], -g[:n]]), np.concatenate([HY[n:], -HY[:n]])

    for k in range(steps):
        a1, b1 = F(z, M)
        a2, b2 = F(z + 0.5 * h * a1, M + 0.5 * h * b1)
        a3, b3 = F(z + 0.5 * h * a2, M + 0.5 * h * b2)
        a4, b4 = F(z + h * a3, M + h * b3)
        z = z + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        M = M + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        _check_finite(z, t0 + (k + 1) * h)
        _check_finite(M, t0 + (k + 1) * h)
    return z, M


def _midpoint_segment(sys: SystemSpec, z: np.ndarray, M, t0: float, t1: float, dt: float):
    n = sys.n_dof
    J = symplectic_form(n)
    eye = np.eye(2 * n)
    steps = max(1, math.ceil(abs(t1 - t0) / dt - 1e-9))
    h = (t1 - t0) / steps
    for k in range(steps):
        z_new = z + h * (J @ sys.gradient(z))
        for _ in range(50):
            g, Hs = sys.gradient_hessian(0.5 * (z + z_new))
            resid = z_new - z - h * (J @ g)
            A = J @ Hs
            delta = np.linalg.solve(eye - 0.5 * h * A, resid)
            z_new = z_new - delta
            if np.max(np.abs(delta)) <= 1e-15 * (1.0 + np.max(np.abs(z_new))):
                break
        _check_finite(z_new, t0 + (k + 1) * h)
        if M is not None:
            g, Hs = sys.gradient_hessian(0.5 * (z + z_new))
            A = J @ Hs
            # exact derivative of the discrete midpoint map (a Cayley transform)
            M = np.linalg.solve(eye - 0.5 * h * A, (eye + 0.5 * h * A) @ M)
            _check_finite(M, t0 + (k + 1) * h)
        z = z_new
    return z, M


def _segment(sys, z, M, t0, t1, opts: IntegratorOpts):
    if t0 == t1:
        return z, M
    step = _rk4_segment if opts.method == "rk4" else _midpoint_segment
    try:
        with np.errstate(over="raise", invalid="raise"):
            return step(sys, z, M, t0, t1, opts.dt)
    except (DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        # locate the failure by bisection on the segment end point
        lo, hi = t0, t1
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            try:
                with np.errstate(over="raise", invalid="raise"):
                    step(sys, z, None, t0, mid, opts.dt)
                lo = mid
            except (DomainError, FloatingPointError, np.linalg.LinAlgError, IntegrationError):
                hi = mid
            if abs(hi - lo) <= opts.dt:
                break
        raise IntegrationError(f"integration failed: {exc}", lo) from exc


def _check_start(z0: PhaseState, tau: float, sys: SystemSpec):
    if z0.n_dof != sys.n_dof:
        raise ValueError(f"state has {z0.n_dof} degrees of freedom, system has {sys.n_dof}")
    if not math.isclose(z0.time, tau, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"initial state time {z0.time!r} differs from reference time {tau!r}")


def _warn_symplectic(tm: TangentMap, tol: float):
    defect = tm.symplectic_defect()
    if defect > tol:
        warnings.warn(
            f"tangent map {tm.base_time!r} -> {tm.target_time!r} violates symplecticity: "
            f"defect {defect:.3e} > {tol:.1e}", SymplecticWarning, stacklevel=3)


def propagate(sys: SystemSpec, z0: PhaseState, tau: float, times: Iterable[float],
              opts: IntegratorOpts = None, *, tangent: bool = True
              ) -> dict[float, tuple[PhaseState, Union[TangentMap, None]]]:
    """States (and tangent maps) at every requested time, in one sweep each way.

    Times after ``tau`` are reached by a single forward integration, times
    before it by a single backward one, so a grid of ``k`` times costs one
    trajectory instead of ``k``. Returns a dict keyed by time.
    """
    opts = opts or IntegratorOpts()
    _check_start(z0, tau, sys)
    times = sorted({float(t) for t in times})
    out: dict[float, tuple[PhaseState, Union[TangentMap, None]]] = {}
    n2 = 2 * sys.n_dof
    z_start = z0.vector

    if sys.kind == "quadratic" and opts.exact_linear:
        for t in times:
            M, c = _affine_exponential(sys, t - tau)
            tm = TangentMap(M, float(tau), t) if tangent else None
            out[t] = (PhaseState.from_vector(M @ z_start + c, t), tm)
        return out

    forward = [t for t in times if t >= tau]
    backward = [t for t in reversed(times) if t < tau]
    for sweep in (forward, backward):
        z, M = z_start.copy(), (np.eye(n2) if tangent else None)
        t_prev = float(tau)
        for t in sweep:
            z, M = _segment(sys, z, M, t_prev, t, opts)
            t_prev = t
            tm = TangentMap(M.copy(), float(tau), t) if tangent else None
            if tm is not None:
                _warn_symplectic(tm, opts.symplectic_tol)
            out[t] = (PhaseState.from_vector(z, t), tm)
    return out


def flow(sys: SystemSpec, z0: PhaseState, tau: float, t: float, opts: IntegratorOpts = None) -> PhaseState:
    """State at time ``t`` of the trajectory through ``z0`` at time ``tau``."""
    return propagate(sys, z0, tau, [t], opts, tangent=False)[float(t)][0]


def tangent_map(sys: SystemSpec, z0: PhaseState, tau: float, t: float, opts: IntegratorOpts = None) -> TangentMap:
    """``M(t; tau)`` along the trajectory through ``z0``; identity when ``t == tau``."""
    return propagate(sys, z0, tau, [t], opts)[float(t)][1]
