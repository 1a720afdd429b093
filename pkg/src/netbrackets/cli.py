"""
Command-line front end.

    netbrackets bracket --config osc.cfg --out table.csv
    netbrackets symbolic --A "x(t)" --B "p(t')" --tau tau
    netbrackets verify --suite all

Config files are INI-style: ``[section]`` headers followed by ``key = value``
lines. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import re
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .brackets import bracket_grid
from .dynamics import IntegrationError, IntegratorOpts, PhaseState, SystemSpec, propagate
from .expr import DomainError, ParseError, parse
from .lattice import (
    FieldState, LatticeSpec, ZeroModeWarning, build_lattice_system, canonical_observable, to_canonical,
)
from .quantum import CorrespondenceError, correspondence_check
from .symbolic import parse_tag, parse_tagged, symbolic_bracket
from .validation import DEFAULT_SEED, SUITES, run_suite

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
CORRESPONDENCE_TOL = 1e-10

ALLOWED_KEYS = {
    "system": {"n_dof", "hamiltonian"},
    "bracket": {"A", "B", "tau", "t_start", "t_stop", "t_count", "tprime_start", "tprime_stop", "tprime_count"},
    "initial": None,  # x1..xN, p1..pN, checked against n_dof
    "integrator": {"dt", "method"},
    "lattice": {"L", "dx", "mass"},
}
_INITIAL_KEY = re.compile(r"^([xp])(\d+)$")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n_dof: int = 1
    hamiltonian: Optional[str] = None
    A: str = "x1"
    B: str = "p1"
    tau: float = 0.0
    t_grid: tuple = (0.0, 0.0, 1)
    tprime_grid: tuple = (0.0, 0.0, 1)
    initial: dict = field(default_factory=dict)
    dt: float = 1e-3
    method: str = "rk4"
    lattice: Optional[LatticeSpec] = None

    def times(self) -> np.ndarray:
        return np.linspace(*self.t_grid[:2], self.t_grid[2])

    def tprimes(self) -> np.ndarray:
        return np.linspace(*self.tprime_grid[:2], self.tprime_grid[2])

    def opts(self) -> IntegratorOpts:
        return IntegratorOpts(method=self.method, dt=self.dt)

    def initial_vectors(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        x = np.zeros(n)
        p = np.zeros(n)
        for key, value in self.initial.items():
            kind, index = _INITIAL_KEY.match(key).groups()
            if int(index) > n:
                raise ConfigError(f"[initial] {key} exceeds the number of degrees of freedom ({n})")
            (x if kind == "x" else p)[int(index) - 1] = value
        return x, p


def _number(section: str, key: str, text: str, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a valid {kind.__name__}: {text!r}") from None
    if kind is float and not np.isfinite(value):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return value


def load_config(text: str) -> RunConfig:
    """Parse config text into a :class:`RunConfig`, failing fast on anything unknown."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in ALLOWED_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = ALLOWED_KEYS[section]
        for key in parser[section]:
            if allowed is None:
                if not _INITIAL_KEY.match(key):
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
            elif key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    if parser.has_section("system"):
        s = parser["system"]
        if "n_dof" in s:
            cfg.n_dof = _number("system", "n_dof", s["n_dof"], int)
            if cfg.n_dof < 1:
                raise ConfigError("[system] n_dof must be >= 1")
        cfg.hamiltonian = s.get("hamiltonian")
    if parser.has_section("bracket"):
        b = parser["bracket"]
        cfg.A = b.get("A", cfg.A)
        cfg.B = b.get("B", cfg.B)
        if "tau" in b:
            cfg.tau = _number("bracket", "tau", b["tau"])
        for prefix, attr in (("t", "t_grid"), ("tprime", "tprime_grid")):
            start = _number("bracket", f"{prefix}_start", b.get(f"{prefix}_start", "0"))
            stop = _number("bracket", f"{prefix}_stop", b.get(f"{prefix}_stop", str(start)))
            count = _number("bracket", f"{prefix}_count", b.get(f"{prefix}_count", "1"), int)
            if count < 1:
                raise ConfigError(f"[bracket] {prefix}_count must be >= 1, got {count}")
            setattr(cfg, attr, (start, stop, count))
    if parser.has_section("initial"):
        cfg.initial = {k: _number("initial", k, v) for k, v in parser["initial"].items()}
    if parser.has_section("integrator"):
        i = parser["integrator"]
        if "dt" in i:
            cfg.dt = _number("integrator", "dt", i["dt"])
        if "method" in i:
            cfg.method = i["method"]
    if parser.has_section("lattice"):
        lat = parser["lattice"]
        try:
            cfg.lattice = LatticeSpec(
                _number("lattice", "L", lat.get("L", "1"), int),
                _number("lattice", "dx", lat.get("dx", "1")),
                _number("lattice", "mass", lat.get("mass", "1")))
        except ValueError as exc:
            raise ConfigError(f"[lattice] {exc}") from None
    _check_opts(cfg)
    return cfg


def _check_opts(cfg: RunConfig):
    try:
        cfg.opts()
    except ValueError as exc:
        raise ConfigError(f"[integrator] {exc}") from None


# ---------------------------------------------------------------------------
# output

def fmt(value: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(value))


def render(columns: Sequence[str], rows: Sequence[Sequence], fmt_name: str) -> str:
    if fmt_name == "json":
        records = [dict(zip(columns, row)) for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_output(text: str, path: Optional[str]):
    """Write ``text`` to ``path`` atomically (temp file + rename), or to stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".netbrackets-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# subcommands

def _system(cfg: RunConfig) -> SystemSpec:
    if not cfg.hamiltonian:
        raise ConfigError("[system] hamiltonian is required")
    try:
        return SystemSpec(cfg.n_dof, cfg.hamiltonian)
    except ValueError as exc:
        raise ConfigError(f"[system] hamiltonian: {exc}") from None


def _observables(cfg: RunConfig, n: int):
    try:
        return parse(cfg.A, n), parse(cfg.B, n)
    except ParseError as exc:
        raise ConfigError(f"[bracket] observable: {exc}") from None


def cmd_flow(cfg: RunConfig, args) -> tuple[list[str], list[list]]:
    sys_ = _system(cfg)
    x, p = cfg.initial_vectors(sys_.n_dof)
    states = propagate(sys_, PhaseState(x, p, cfg.tau), cfg.tau, cfg.times(), cfg.opts(), tangent=False)
    n = sys_.n_dof
    columns = ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]
    rows = [[float(t)] + [float(v) for v in states[float(t)][0].vector] for t in cfg.times()]
    return columns, rows


def cmd_bracket(cfg: RunConfig, args):
    sys_ = _system(cfg)
    A, B = _observables(cfg, sys_.n_dof)
    x, p = cfg.initial_vectors(sys_.n_dof)
    ts, tps = cfg.times(), cfg.tprimes()
    table = bracket_grid(A, B, sys_, PhaseState(x, p, cfg.tau), cfg.tau, ts, tps, cfg.opts())
    rows = [[float(t), float(tp), float(table[i, j])] for i, t in enumerate(ts) for j, tp in enumerate(tps)]
    return ["t", "t_prime", "bracket"], rows


def cmd_lattice(cfg: RunConfig, args):
    if cfg.lattice is None:
        raise ConfigError("[lattice] section is required")
    spec = cfg.lattice
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroModeWarning)
        sys_ = build_lattice_system(spec)
    A, B = _observables(cfg, spec.L)
    phi, pi = cfg.initial_vectors(spec.L)
    z0 = to_canonical(FieldState(phi, pi, cfg.tau), spec)
    ts, tps = cfg.times(), cfg.tprimes()
    table = bracket_grid(canonical_observable(A, spec), canonical_observable(B, spec), sys_, z0, cfg.tau,
                         ts, tps, cfg.opts())
    rows = [[float(t), float(tp), float(table[i, j])] for i, t in enumerate(ts) for j, tp in enumerate(tps)]
    return ["t", "t_prime", "bracket"], rows


def cmd_quantum(cfg: RunConfig, args):
    sys_ = _system(cfg)
    A, B = _observables(cfg, sys_.n_dof)
    x, p = cfg.initial_vectors(sys_.n_dof)
    z0 = PhaseState(x, p, 0.0)
    rows = []
    for t in cfg.times():
        for tp in cfg.tprimes():
            rep = correspondence_check(sys_, A, B, float(t), float(tp), z0, cfg.opts())
            rows.append([float(t), float(tp), rep.classical, rep.quantum.real + 0.0, rep.quantum.imag + 0.0, rep.defect])
    return ["t", "t_prime", "classical", "quantum_re", "quantum_im", "defect"], rows


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="system definition file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--dt", type=float, help="integrator step (overrides config)")
    common.add_argument("--method", choices=("rk4", "midpoint"), help="integrator (overrides config)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for random-point checks")

    parser = argparse.ArgumentParser(prog="netbrackets", description="Non-equal-time Poisson brackets.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("flow", parents=[common], help="trajectory over the t grid")
    sub.add_parser("bracket", parents=[common], help="bracket table over the (t, t') grid")
    sym = sub.add_parser("symbolic", parents=[common], help="symbolic bracket of time-tagged expressions")
    sym.add_argument("--A", dest="sym_a", help="e.g. \"x(t)\"")
    sym.add_argument("--B", dest="sym_b", help="e.g. \"p(t')\"")
    sym.add_argument("--tau", dest="sym_tau", help="reference time tag, e.g. tau or 0")
    sub.add_parser("quantum", parents=[common], help="classical bracket vs Heisenberg commutator")
    sub.add_parser("lattice", parents=[common], help="lattice field bracket table")
    ver = sub.add_parser("verify", parents=[common], help="run oracle suites")
    ver.add_argument("--suite", choices=SUITES, default="all")
    return parser


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = load_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if args.dt is not None:
        cfg.dt = args.dt
    if args.method is not None:
        cfg.method = args.method
    _check_opts(cfg)
    return cfg


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        if args.command == "verify":
            reports = run_suite(args.suite, args.seed)
            for r in reports:
                print(r.line(), file=sys.stderr if args.out is None and args.format == "json" else sys.stdout)
            if args.out is not None or args.format == "json":
                rows = [[r.name, r.max_abs_error, r.tolerance, r.passed, r.samples] for r in reports]
                write_output(render(["name", "max_abs_error", "tolerance", "passed", "samples"], rows, args.format),
                             args.out)
            return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILURE

        if args.command == "symbolic":
            cfg = _load(args) if args.config else RunConfig(A="", B="")
            a_text = args.sym_a or cfg.A
            b_text = args.sym_b or cfg.B
            tau_text = args.sym_tau or "tau"
            if not a_text or not b_text:
                raise ConfigError("symbolic needs --A and --B")
            try:
                result = symbolic_bracket(parse_tagged(a_text), parse_tagged(b_text), parse_tag(tau_text))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if args.format == "json":
                text = json.dumps({"A": a_text, "B": b_text, "tau": tau_text, "bracket": str(result)}) + "\n"
            else:
                text = str(result) + "\n"
            write_output(text, args.out)
            return EXIT_OK

        cfg = _load(args)
        handler = {"flow": cmd_flow, "bracket": cmd_bracket, "lattice": cmd_lattice, "quantum": cmd_quantum}
        columns, rows = handler[args.command](cfg, args)
        write_output(render(columns, rows, args.format), args.out)
        if args.command == "quantum" and any(row[-1] > CORRESPONDENCE_TOL for row in rows):
            print(f"correspondence defect exceeds {CORRESPONDENCE_TOL:g}", file=sys.stderr)
            return EXIT_FAILURE
        return EXIT_OK
    except ConfigError as exc:
        print(f"netbrackets: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DomainError, IntegrationError, CorrespondenceError) as exc:
        print(f"netbrackets: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
