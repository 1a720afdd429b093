"""Acceptance criteria 1-9, one test each.

Every test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is still reported with its measured error.
"""

import math
import time
from functools import lru_cache

import numpy as np

from netbrackets.brackets import Observable, bracket_grid, equal_time_bracket, nonequal_time_bracket
from netbrackets.dynamics import IntegratorOpts, PhaseState, SystemSpec, flow, propagate
from netbrackets.expr import parse
from netbrackets.lattice import (
    FieldState, LatticeSpec, build_lattice_system, lattice_equal_time_bracket, lattice_nonequal_bracket,
)
from netbrackets.quantum import correspondence_check, matrix_commutator_check
from netbrackets.symbolic import DeltaExpr, delta, symbolic_bracket
from netbrackets.validation import (
    FREE_PARTICLE, OSCILLATOR, PENDULUM, QUARTIC, finite_difference_bracket_grid, mode_sum_bracket,
    oscillator_bracket_exact, random_polynomial,
)

SEED = 20240611
SYSTEMS = {
    "oscillator": OSCILLATOR,
    "free particle": FREE_PARTICLE,
    "pendulum": PENDULUM,
    "quartic": QUARTIC,
}


def worst(errors):
    errors = list(errors)
    return max(errors) if errors else math.inf


# Each criterion returns (max error, tangent maps produced); cached so that
# criterion 7 can inspect the maps of 1-6 without recomputing them.

@lru_cache(maxsize=None)
def criterion_1():
    osc = SystemSpec(1, OSCILLATOR)
    grid = np.linspace(0, 10, 21)
    errors, maps = [], []
    start = time.perf_counter()
    for opts in (IntegratorOpts(), IntegratorOpts(exact_linear=False)):
        for tau in (0.0, 1.0, 2.0):
            z0 = PhaseState([0.3], [-0.2], tau)
            table, states = bracket_grid("x", "p", osc, z0, tau, grid, grid, opts, return_maps=True)
            exact = np.array([[oscillator_bracket_exact(t, tp, tau) for tp in grid] for t in grid])
            errors.append(np.max(np.abs(table - exact)))
            maps += [tm for _, tm in states.values()]
    return worst(errors), time.perf_counter() - start, maps


@lru_cache(maxsize=None)
def criterion_2():
    rng = np.random.default_rng(SEED)
    errors, maps, per_system = [], [], {}
    for name, H in SYSTEMS.items():
        sys = SystemSpec(1, H)
        tau = 0.5
        ts = rng.uniform(-10, 10, 50)
        z0 = PhaseState([0.7], [0.3], tau)
        table, states = bracket_grid("x", "p", sys, z0, tau, ts, ts, return_maps=True)
        err = np.max(np.abs(np.diag(table) - 1.0))
        per_system[name] = err
        errors.append(err)
        maps += [tm for _, tm in states.values()]
    return worst(errors), per_system, maps


@lru_cache(maxsize=None)
def criterion_3():
    rng = np.random.default_rng(SEED + 3)
    sys = SystemSpec(2, "(p1^2 + p2^2)/2 + (1 - cos(x1)) + x2^4/4 + x1*x2/5")
    errors, maps = [], []
    for _ in range(20):
        A = parse(random_polynomial(rng, 2), 2)
        B = parse(random_polynomial(rng, 2), 2)
        tau = float(rng.uniform(-3, 3))
        z0 = PhaseState(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), tau)
        v = nonequal_time_bracket(Observable(A, tau), Observable(B, tau), sys, z0, tau)
        errors.append(abs(v - equal_time_bracket(A, B, z0)))
        maps.append(propagate(sys, z0, tau, [tau])[tau][1])
    return worst(errors), maps


def criterion_4():
    checks = {
        "{x(t),p(t')}_tau": symbolic_bracket("x(t)", "p(t')", "tau") == delta("t", "t'") * delta("t", "tau"),
        "{x(t),x(t')}_tau": symbolic_bracket("x(t)", "x(t')", "tau") == DeltaExpr(),
        "{p(t),p(t')}_tau": symbolic_bracket("p(t)", "p(t')", "tau") == DeltaExpr(),
    }
    return checks


@lru_cache(maxsize=None)
def criterion_5():
    osc = SystemSpec(1, OSCILLATOR)
    grid = np.linspace(0, 10, 10)
    z0 = PhaseState([0.0], [0.0])
    corr = [correspondence_check(osc, "x", "p", t, tp, z0).defect for t in grid for tp in grid]
    block = matrix_commutator_check(1.0, 0.5, 32).block_defect
    _, states = bracket_grid("x", "p", osc, z0, 0.0, grid, grid, return_maps=True)
    return worst(corr), block, [tm for _, tm in states.values()]


@lru_cache(maxsize=None)
def criterion_6():
    grid = np.linspace(-3, 3, 5)
    errors, maps = {}, []
    for name in ("pendulum", "quartic"):
        sys = SystemSpec(1, SYSTEMS[name])
        z0 = PhaseState([0.9], [-0.2])
        for A, B in (("x", "p"), ("x", "x"), ("p^2", "sin(x)")):
            table, states = bracket_grid(A, B, sys, z0, 0.0, grid, grid, return_maps=True)
            oracle = finite_difference_bracket_grid(A, B, sys, z0, 0.0, grid, grid)
            errors[f"{name} {{{A},{B}}}"] = np.max(np.abs(table - oracle))
            maps += [tm for _, tm in states.values()]
    return worst(errors.values()), maps


def criterion_8():
    rng = np.random.default_rng(SEED + 8)
    equal = []
    for dx in (1.0, 0.5, 0.1):
        spec = LatticeSpec(6, dx, 1.0)
        state = FieldState(rng.normal(size=6), rng.normal(size=6))
        for i in range(1, 7):
            for j in range(1, 7):
                v = lattice_equal_time_bracket(spec, f"x{i}", f"p{j}", state)
                equal.append(abs(v - (1 / dx if i == j else 0.0)))
    spec = LatticeSpec(8, 1.0, 1.0)
    system = build_lattice_system(spec)
    initial = FieldState(np.zeros(8), np.zeros(8))
    modes = []
    for t, tp in [(1.0, 0.5), (4.0, -3.0), (0.0, 9.0), (7.3, 2.2)]:
        for j in range(1, 9):
            v = lattice_nonequal_bracket(spec, Observable(parse("x1", 8), t), Observable(parse(f"p{j}", 8), tp),
                                         initial, 0.0, system=system)
            modes.append(abs(v - mode_sum_bracket(spec, 0, j - 1, t, tp)))
    return worst(equal), worst(modes)


def criterion_9():
    grid = [-2.0, 0.0, 1.5, 3.0]
    errors = {}
    for name, H in SYSTEMS.items():
        sys = SystemSpec(1, H)
        z0 = PhaseState([0.6], [0.4])
        for A, B in (("x", "p"), ("x^2", "p + x")):
            base = bracket_grid(A, B, sys, z0, 0.0, grid, grid)
            err = 0.0
            for sigma in (-1.5, 1.0, 2.5):
                z_sigma = flow(sys, z0, 0.0, sigma)
                moved = bracket_grid(A, B, sys, z_sigma, sigma, grid, grid)
                err = max(err, np.max(np.abs(moved - base)))
            errors[f"{name} {{{A},{B}}}"] = err
    spec = LatticeSpec(4, 0.5, 1.0)
    system = build_lattice_system(spec)
    z0 = PhaseState([0.1, -0.2, 0.0, 0.3], [0.0, 0.1, 0.2, 0.0])
    A, B = Observable(parse("x1", 4), 1.0), Observable(parse("p2", 4), 2.5)
    base = lattice_nonequal_bracket(spec, A, B, FieldState(z0.x, z0.p / spec.dx), 0.0, system=system)
    z1 = flow(system, z0, 0.0, 1.7)
    moved = lattice_nonequal_bracket(spec, A, B, FieldState(z1.x, z1.p / spec.dx, 1.7), 1.7, system=system)
    errors["lattice L=4"] = abs(base - moved)
    return worst(errors.values())


# ---------------------------------------------------------------------------

def test_criterion_1_oscillator_grid(acceptance_record):
    err, elapsed, _ = criterion_1()
    ok = err <= 1e-8 and elapsed < 5.0
    acceptance_record(1, ok, f"oscillator 21x21 grid, tau in {{0,1,2}}: max_err={err:.2e} (tol 1e-8), "
                             f"runtime={elapsed:.2f}s (limit 5s)")
    assert ok


def test_criterion_2_canonical_invariance(acceptance_record):
    err, per_system, _ = criterion_2()
    ok = err <= 1e-8
    detail = ", ".join(f"{k}={v:.1e}" for k, v in per_system.items())
    acceptance_record(2, ok, f"{{x(t),p(t)}}=1 at 50 t per system: max_err={err:.2e} (tol 1e-8) [{detail}]")
    assert ok


def test_criterion_3_reduction(acceptance_record):
    err, _ = criterion_3()
    ok = err <= 1e-9
    acceptance_record(3, ok, f"reduction to equal time, 20 random polynomial pairs: max_err={err:.2e} (tol 1e-9)")
    assert ok


def test_criterion_4_symbolic_table(acceptance_record):
    checks = criterion_4()
    ok = all(checks.values())
    acceptance_record(4, ok, "symbolic table exact: " + ", ".join(f"{k} {'ok' if v else 'WRONG'}"
                                                                  for k, v in checks.items()))
    assert ok


def test_criterion_5_quantum_correspondence(acceptance_record):
    corr, block, _ = criterion_5()
    ok = corr <= 1e-10 and block <= 1e-10
    acceptance_record(5, ok, f"correspondence 10x10 grid: max_defect={corr:.2e} (tol 1e-10); "
                             f"n_max=32 block_defect={block:.2e} (tol 1e-10)")
    assert ok


def test_criterion_6_nonlinear_oracle(acceptance_record):
    err, _ = criterion_6()
    ok = err <= 1e-5
    acceptance_record(6, ok, f"pendulum and quartic 5x5 grid vs finite differences: max_err={err:.2e} (tol 1e-5)")
    assert ok


def test_criterion_7_symplecticity(acceptance_record):
    maps = criterion_1()[2] + criterion_2()[2] + criterion_3()[1] + criterion_5()[2] + criterion_6()[1]
    defect = worst(tm.symplectic_defect() for tm in maps)
    ok = defect <= 1e-6 and len(maps) > 0
    acceptance_record(7, ok, f"symplectic defect over {len(maps)} tangent maps from criteria 1-6: "
                             f"max={defect:.2e} (tol 1e-6)")
    assert ok


def test_criterion_8_lattice(acceptance_record):
    equal, modes = criterion_8()
    ok = equal <= 1e-12 and modes <= 1e-6
    acceptance_record(8, ok, f"lattice delta/dx: max_err={equal:.2e} (tol 1e-12); "
                             f"L=8 vs mode sum: max_err={modes:.2e} (tol 1e-6)")
    assert ok


def test_criterion_9_reference_time_independence(acceptance_record):
    err = criterion_9()
    ok = err <= 1e-6
    acceptance_record(9, ok, f"reference-time independence, all test systems: max_err={err:.2e} (tol 1e-6)")
    assert ok
