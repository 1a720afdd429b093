"""
Closed-form oracles and cross-check suites.

Oracles here are deliberately independent of the code paths they check:
the oscillator formulas are written out by hand, tangent maps are rebuilt
from finite differences of the flow, and lattice brackets are summed over
discrete Fourier modes.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .brackets import Observable, bracket_grid, equal_time_bracket, nonequal_time_bracket
from .dynamics import (
    IntegratorOpts, PhaseState, SystemSpec, TangentMap, flow, linear_flow, propagate,
    symplectic_form, tangent_map,
)
from .expr import Expr, compile_scalar, differentiate, evaluate, parse
from .lattice import (
    FieldState, LatticeSpec, ZeroModeWarning, build_lattice_system, lattice_equal_time_bracket,
    lattice_nonequal_bracket,
)
from .quantum import correspondence_check, heisenberg_operator, matrix_commutator_check

__all__ = [
    "OracleReport", "SUITES", "DEFAULT_SEED",
    "oscillator_flow_exact", "oscillator_bracket_exact", "amplitude_from_initial",
    "amplitude_trajectory", "finite_difference_tangent", "finite_difference_bracket_grid",
    "mode_sum_bracket", "random_polynomial", "reference_systems", "run_suite",
]

DEFAULT_SEED = 20240611
SUITES = ("oscillator", "properties", "quantum", "lattice", "all")

OSCILLATOR = "p^2/2 + x^2/2"
FREE_PARTICLE = "p^2/2"
PENDULUM = "p^2/2 + (1 - cos(x))"
QUARTIC = "p^2/2 + x^4/4"


@dataclass
class OracleReport:
    name: str
    max_abs_error: float
    tolerance: float
    passed: bool
    samples: int

    @classmethod
    def from_errors(cls, name: str, errors: Iterable[float], tolerance: float) -> "OracleReport":
        """A report that passes only when at least one sample was taken and all are in tolerance."""
        errors = [abs(float(e)) for e in errors]
        if not errors:
            return cls(name, math.inf, tolerance, False, 0)
        worst = max(errors)
        if math.isnan(worst) or any(math.isnan(e) for e in errors):
            worst = math.inf
        return cls(name, worst, tolerance, worst <= tolerance, len(errors))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<48} max_err={self.max_abs_error:.3e}  "
                f"tol={self.tolerance:.0e}  n={self.samples}")

    def as_dict(self) -> dict:
        return asdict(self)


def reference_systems() -> dict[str, SystemSpec]:
    """The autonomous single-degree-of-freedom systems used throughout the suites."""
    return {
        "oscillator": SystemSpec(1, OSCILLATOR),
        "free_particle": SystemSpec(1, FREE_PARTICLE),
        "pendulum": SystemSpec(1, PENDULUM),
        "quartic": SystemSpec(1, QUARTIC),
    }


# ---------------------------------------------------------------------------
# oscillator closed forms

def oscillator_flow_exact(z0: PhaseState, tau: float, t: float) -> PhaseState:
    if z0.n_dof != 1:
        raise ValueError("the closed-form oscillator has one degree of freedom")
    c, s = math.cos(t - tau), math.sin(t - tau)
    x0, p0 = float(z0.x[0]), float(z0.p[0])
    return PhaseState([x0 * c + p0 * s], [-x0 * s + p0 * c], t)


def oscillator_bracket_exact(t: float, t_prime: float, tau: float) -> float:
    return math.cos(t - tau) * math.cos(t_prime - tau) + math.sin(t - tau) * math.sin(t_prime - tau)


def amplitude_from_initial(x_tau: float, p_tau: float, tau: float) -> complex:
    """Complex amplitude ``a`` with ``x(t) = a e^{-it} + conj(a) e^{it}``."""
    return 0.5 * complex(x_tau, p_tau) * cmath.exp(1j * tau)


def amplitude_trajectory(a: complex, t: float) -> float:
    return (a * cmath.exp(-1j * t) + a.conjugate() * cmath.exp(1j * t)).real


# ---------------------------------------------------------------------------
# finite-difference oracles

def finite_difference_tangent(sys: SystemSpec, z0: PhaseState, tau: float, t: float, h: float = 1e-4,
                              opts: IntegratorOpts = None) -> TangentMap:
    """Tangent map from central differences of the flow over +-h perturbations of ``z0``."""
    if not h > 0:
        raise ValueError("h must be positive")
    base = z0.vector
    n2 = base.size
    M = np.empty((n2, n2))
    for k in range(n2):
        e = np.zeros(n2)
        e[k] = h
        plus = flow(sys, PhaseState.from_vector(base + e, tau), tau, t, opts).vector
        minus = flow(sys, PhaseState.from_vector(base - e, tau), tau, t, opts).vector
        M[:, k] = (plus - minus) / (2 * h)
    return TangentMap(M, float(tau), float(t))


def finite_difference_bracket_grid(A: Expr | str, B: Expr | str, sys: SystemSpec, z0: PhaseState,
                                   tau: float, t_grid: Sequence[float], tprime_grid: Sequence[float],
                                   h: float = 1e-4, opts: IntegratorOpts = None) -> np.ndarray:
    """Bracket table from finite-difference sensitivities of ``A(z(t))``, ``B(z(t'))`` to ``z(tau)``.

    Uses only the flow and scalar evaluation of the observables; no
    gradients or tangent maps are involved.
    """
    A = parse(A, sys.n_dof) if isinstance(A, str) else A
    B = parse(B, sys.n_dof) if isinstance(B, str) else B
    t_grid = [float(t) for t in t_grid]
    tprime_grid = [float(t) for t in tprime_grid]
    base = z0.vector
    n2 = base.size
    dA = np.empty((len(t_grid), n2))
    dB = np.empty((len(tprime_grid), n2))
    for k in range(n2):
        e = np.zeros(n2)
        e[k] = h
        vals = []
        for sign in (1, -1):
            start = PhaseState.from_vector(base + sign * e, tau)
            states = propagate(sys, start, tau, t_grid + tprime_grid, opts, tangent=False)
            vals.append((np.array([evaluate(A, states[t][0]) for t in t_grid]),
                         np.array([evaluate(B, states[t][0]) for t in tprime_grid])))
        dA[:, k] = (vals[0][0] - vals[1][0]) / (2 * h)
        dB[:, k] = (vals[0][1] - vals[1][1]) / (2 * h)
    return dA @ symplectic_form(sys.n_dof) @ dB.T


def mode_sum_bracket(spec: LatticeSpec, i: int, j: int, t: float, t_prime: float) -> float:
    """``{phi_i(t), pi_j(t')}`` summed over the lattice normal modes.

    ``(1/(L dx)) sum_k cos(2 pi k (i - j)/L) cos(w_k (t - t'))`` with
    ``w_k = sqrt(m^2 + (4/dx^2) sin^2(pi k / L))``.
    """
    L = spec.L
    total = 0.0
    for k in range(L):
        w = math.sqrt(spec.mass ** 2 + (4.0 / spec.dx ** 2) * math.sin(math.pi * k / L) ** 2)
        total += math.cos(2 * math.pi * k * (i - j) / L) * math.cos(w * (t - t_prime))
    return total / (L * spec.dx)


def random_polynomial(rng: np.random.Generator, n_dof: int = 1, max_degree: int = 3, n_terms: int = 3) -> str:
    """A random polynomial observable as text, e.g. ``"2*x1^2*p1 - 3*p1"``."""
    names = [f"x{i}" for i in range(1, n_dof + 1)] + [f"p{i}" for i in range(1, n_dof + 1)]
    terms = []
    for _ in range(n_terms):
        coeff = int(rng.integers(1, 5)) * (1 if rng.random() < 0.5 else -1)
        degree = int(rng.integers(1, max_degree + 1))
        factors = [names[int(rng.integers(len(names)))] for _ in range(degree)]
        terms.append(f"{coeff}*" + "*".join(factors))
    return " + ".join(terms).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# suites

def _oscillator_suite(seed: int) -> list[OracleReport]:
    osc = SystemSpec(1, OSCILLATOR)
    reports = []
    stepped = IntegratorOpts(dt=1e-3, exact_linear=False)
    z0 = PhaseState([1.0], [0.5], 0.0)
    ts = np.linspace(0.0, 10.0, 41)
    states = propagate(osc, z0, 0.0, ts, stepped, tangent=False)
    errs = [np.max(np.abs(states[t][0].vector - oscillator_flow_exact(z0, 0.0, t).vector)) for t in states]
    reports.append(OracleReport.from_errors("oscillator flow (rk4) vs closed form", errs, 1e-8))

    grid = np.linspace(0.0, 10.0, 21)
    errs = []
    for tau in (0.0, 1.0, 2.0):
        table = bracket_grid("x", "p", osc, PhaseState([0.3], [-0.2], tau), tau, grid, grid)
        exact = np.array([[oscillator_bracket_exact(t, tp, tau) for tp in grid] for t in grid])
        errs.extend(np.abs(table - exact).ravel())
    reports.append(OracleReport.from_errors("oscillator bracket grid 21x21, tau in {0,1,2}", errs, 1e-8))

    table = bracket_grid("x", "p", osc, PhaseState([0.3], [-0.2], 0.5), 0.5, grid, grid, stepped)
    exact = np.array([[oscillator_bracket_exact(t, tp, 0.5) for tp in grid] for t in grid])
    reports.append(OracleReport.from_errors("oscillator bracket grid via rk4", np.abs(table - exact).ravel(), 1e-8))

    errs = []
    rng = np.random.default_rng(seed)
    for _ in range(5):
        x_tau, p_tau, tau = rng.uniform(-2, 2, size=3)
        a = amplitude_from_initial(x_tau, p_tau, tau)
        start = PhaseState([x_tau], [p_tau], tau)
        for t in np.linspace(-5, 5, 11):
            errs.append(amplitude_trajectory(a, t) - oscillator_flow_exact(start, tau, t).x[0])
    reports.append(OracleReport.from_errors("amplitude parametrization reproduces x(t)", errs, 1e-12))
    return reports


def _properties_suite(seed: int) -> list[OracleReport]:
    rng = np.random.default_rng(seed)
    systems = reference_systems()
    opts = IntegratorOpts()
    reports = []

    # symbolic derivative vs central differences
    errs = []
    for text in [PENDULUM, QUARTIC, "sin(x)*p + exp(p/3)", "sqrt(1 + x^2)*p^3 - log(2 + p^2)"]:
        e = parse(text)
        f = compile_scalar(e)
        for v in ("x", "p"):
            d = compile_scalar(differentiate(e, v))
            for _ in range(100):
                x, p = rng.uniform(-2, 2, size=2)
                h = 1e-5
                if v == "x":
                    fd = (f([x + h], [p]) - f([x - h], [p])) / (2 * h)
                else:
                    fd = (f([x], [p + h]) - f([x], [p - h])) / (2 * h)
                sym = d([x], [p])
                errs.append(abs(sym - fd) / (1 + abs(sym)))
    reports.append(OracleReport.from_errors("derivative vs finite differences (relative)", errs, 1e-6))

    # tangent maps: symplecticity, composition, energy, FD oracle
    sym_errs, comp_errs, energy_errs, fd_errs, canon_errs = [], [], [], [], []
    for name, sys in systems.items():
        z0 = PhaseState([0.3], [0.1], 0.0)
        times = np.linspace(-10, 10, 21)
        states = propagate(sys, z0, 0.0, times, opts)
        e0 = sys.energy(z0)
        for t, (z, tm) in states.items():
            sym_errs.append(tm.symplectic_defect())
            energy_errs.append(sys.energy(z) - e0)
        for t in np.linspace(-3, 3, 7):
            canon = bracket_grid("x", "p", sys, z0, 0.0, [t], [t], opts)[0, 0]
            canon_errs.append(canon - 1.0)
        sigma, t = 1.5, 4.0
        z_sigma = flow(sys, z0, 0.0, sigma, opts)
        composed = tangent_map(sys, z_sigma, sigma, t, opts) @ tangent_map(sys, z0, 0.0, sigma, opts)
        direct = tangent_map(sys, z0, 0.0, t, opts)
        comp_errs.append(np.max(np.abs(composed.matrix - direct.matrix)))
        if name in ("pendulum", "quartic"):
            for t in (-2.0, 2.0):
                fd = finite_difference_tangent(sys, z0, 0.0, t, 1e-4, opts)
                fd_errs.append(np.max(np.abs(fd.matrix - tangent_map(sys, z0, 0.0, t, opts).matrix)))
    reports.append(OracleReport.from_errors("tangent maps symplectic, |t-tau| <= 10", sym_errs, 1e-6))
    reports.append(OracleReport.from_errors("energy conservation, |t-tau| <= 10", energy_errs, 1e-6))
    reports.append(OracleReport.from_errors("composition M(t;s) M(s;tau) = M(t;tau)", comp_errs, 1e-6))
    reports.append(OracleReport.from_errors("finite-difference tangent vs variational", fd_errs, 1e-5))
    reports.append(OracleReport.from_errors("{x_G(t), p_G(t)}_tau = 1", canon_errs, 1e-8))

    # antisymmetry, reduction, bilinearity, tau-independence on random polynomials
    anti, red, bil, tau_ind = [], [], [], []
    for name, sys in systems.items():
        z0 = PhaseState([0.4], [-0.3], 0.0)
        for _ in range(3):
            A, B, C = (parse(random_polynomial(rng)) for _ in range(3))
            t, tp = rng.uniform(-2, 2, size=2)
            ab = nonequal_time_bracket(Observable(A, t), Observable(B, tp), sys, z0, 0.0, opts)
            ba = nonequal_time_bracket(Observable(B, tp), Observable(A, t), sys, z0, 0.0, opts)
            anti.append(ab + ba)
            red.append(nonequal_time_bracket(Observable(A, 0.0), Observable(B, 0.0), sys, z0, 0.0, opts)
                       - equal_time_bracket(A, B, z0))
            alpha, beta = rng.uniform(-2, 2, size=2)
            comb = alpha * A + beta * C
            lhs = nonequal_time_bracket(Observable(comb, t), Observable(B, tp), sys, z0, 0.0, opts)
            ac = nonequal_time_bracket(Observable(C, t), Observable(B, tp), sys, z0, 0.0, opts)
            bil.append(lhs - (alpha * ab + beta * ac))
            sigma = float(rng.uniform(-1.5, 1.5))
            z_sigma = flow(sys, z0, 0.0, sigma, opts)
            moved = nonequal_time_bracket(Observable(A, t), Observable(B, tp), sys, z_sigma, sigma, opts)
            tau_ind.append(moved - ab)
    reports.append(OracleReport.from_errors("antisymmetry of non-equal-time bracket", anti, 1e-9))
    reports.append(OracleReport.from_errors("reduction to equal-time bracket at t=t'=tau", red, 1e-9))
    reports.append(OracleReport.from_errors("bilinearity", bil, 1e-9))
    reports.append(OracleReport.from_errors("tau-independence along a trajectory", tau_ind, 1e-6))

    jac = []
    for _ in range(20):
        A, B, C = (parse(random_polynomial(rng, 2), 2) for _ in range(3))
        z = PhaseState(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        pb = lambda f, g: _bracket_expr(f, g, 2)  # noqa: E731
        total = pb(A, pb(B, C)) + pb(B, pb(C, A)) + pb(C, pb(A, B))
        jac.append(evaluate(total, z))
    reports.append(OracleReport.from_errors("Jacobi identity (equal-time)", jac, 1e-8))
    return reports


def _bracket_expr(A: Expr, B: Expr, n: int) -> Expr:
    total = None
    for k in range(1, n + 1):
        term = (differentiate(A, f"x{k}") * differentiate(B, f"p{k}")
                - differentiate(A, f"p{k}") * differentiate(B, f"x{k}"))
        total = term if total is None else total + term
    return total


def _quantum_suite(seed: int) -> list[OracleReport]:
    osc = SystemSpec(1, OSCILLATOR)
    reports = []
    grid = np.linspace(0.0, 10.0, 10)
    defects, imag = [], []
    for t in grid:
        for tp in grid:
            for A, B in (("x", "p"), ("x", "x"), ("p", "p"), ("2*x - p", "x + 3*p")):
                rep = correspondence_check(osc, A, B, t, tp)
                defects.append(rep.defect)
                imag.append(rep.quantum.imag)
    reports.append(OracleReport.from_errors("classical bracket = -i [A(t), B(t')] (10x10)", defects, 1e-10))
    reports.append(OracleReport.from_errors("-i [A(t), B(t')] is real", imag, 1e-12))
    rows = []
    for t in np.linspace(-3, 3, 7):
        M = linear_flow(osc, 0.0, t).matrix
        for k, gen in enumerate(("x", "p")):
            op = heisenberg_operator(osc, gen, t)
            rows.append(np.max(np.abs(np.concatenate([op.c_x, op.c_p]) - M[k])))
    reports.append(OracleReport.from_errors("Heisenberg coefficients = rows of the flow map", rows, 1e-12))
    blocks = [matrix_commutator_check(t, tp, 32).block_defect for t, tp in ((0, 0), (1, 0.5), (2.5, -1.0))]
    reports.append(OracleReport.from_errors("truncated Fock commutator block, n_max=32", blocks, 1e-10))
    return reports


def _lattice_suite(seed: int) -> list[OracleReport]:
    reports = []
    eq = []
    rng = np.random.default_rng(seed)
    for L, dx in ((1, 1.0), (4, 0.5), (8, 0.25)):
        spec = LatticeSpec(L, dx, 1.0)
        state = FieldState(rng.normal(size=L), rng.normal(size=L))
        for i in range(1, L + 1):
            for j in range(1, L + 1):
                eq.append(lattice_equal_time_bracket(spec, f"x{i}", f"p{j}", state) - (i == j) / dx)
                eq.append(lattice_equal_time_bracket(spec, f"x{i}", f"x{j}", state))
                eq.append(lattice_equal_time_bracket(spec, f"p{i}", f"p{j}", state))
    reports.append(OracleReport.from_errors("lattice equal-time {phi_i, pi_j} = delta_ij/dx", eq, 1e-12))

    modes = []
    for L, dx, m in ((8, 1.0, 1.0), (16, 0.5, 0.7), (5, 1.0, 2.0)):
        spec = LatticeSpec(L, dx, m)
        system = build_lattice_system(spec)
        initial = FieldState(np.zeros(L), np.zeros(L))
        for t, tp in ((1.0, 0.5), (3.0, -2.0)):
            for j in range(1, L + 1):
                num = lattice_nonequal_bracket(spec, Observable(parse("x1", L), t), Observable(parse(f"p{j}", L), tp),
                                               initial, 0.0, system=system)
                modes.append(num - mode_sum_bracket(spec, 1, j, t, tp))
    reports.append(OracleReport.from_errors("lattice bracket vs normal-mode sum", modes, 1e-6))

    trans = []
    spec = LatticeSpec(6, 1.0, 0.8)
    system = build_lattice_system(spec)
    initial = FieldState(rng.normal(size=6), rng.normal(size=6))
    for shift in range(6):
        for sep in range(6):
            i, j = 1 + shift, 1 + (shift + sep) % 6
            ref = lattice_nonequal_bracket(spec, Observable(parse("x1", 6), 1.2),
                                           Observable(parse(f"p{1 + sep}", 6), 0.3), initial, 0.0, system=system)
            val = lattice_nonequal_bracket(spec, Observable(parse(f"x{i}", 6), 1.2),
                                           Observable(parse(f"p{j}", 6), 0.3), initial, 0.0, system=system)
            trans.append(val - ref)
    reports.append(OracleReport.from_errors("lattice translation invariance", trans, 1e-9))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroModeWarning)
        spec = LatticeSpec(4, 1.0, 0.0)
        system = build_lattice_system(spec)
    initial = FieldState(np.zeros(4), np.zeros(4))
    zero = [lattice_nonequal_bracket(spec, Observable(parse("x1", 4), 2.0), Observable(parse(f"p{j}", 4), 0.5),
                                     initial, 0.0, system=system) - mode_sum_bracket(spec, 1, j, 2.0, 0.5)
            for j in range(1, 5)]
    reports.append(OracleReport.from_errors("massless lattice (zero mode) vs mode sum", zero, 1e-6))
    return reports


_SUITE_FUNCS: dict[str, Callable[[int], list[OracleReport]]] = {
    "oscillator": _oscillator_suite,
    "properties": _properties_suite,
    "quantum": _quantum_suite,
    "lattice": _lattice_suite,
}


def run_suite(which: str = "all", seed: int = DEFAULT_SEED) -> list[OracleReport]:
    """Run one named suite (or ``"all"``) and return its reports.

    Failures are reported, never raised: an exception inside a suite becomes
    a failed report named after the suite.
    """
    if which not in SUITES:
        raise ValueError(f"unknown suite {which!r}; choose from {SUITES}")
    names = list(_SUITE_FUNCS) if which == "all" else [which]
    reports: list[OracleReport] = []
    for name in names:
        try:
            reports.extend(_SUITE_FUNCS[name](seed))
        except Exception as exc:  # reported, not thrown
            reports.append(OracleReport(f"{name}: {type(exc).__name__}: {exc}", math.inf, 0.0, False, 0))
    return reports
