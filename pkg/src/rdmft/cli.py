"""Command-line front end.

Results go to ``--out`` (default stdout); errors go to stderr as one JSON
object.  Exit codes: 0 success, 1 validation failure, 2 non-convergence,
3 I/O or parse error.
"""

import argparse
import csv
import io as _stdio
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bogoliubov, io
from .checks import run_checks
from .ensemble import ThermalModel, TruncationError, converge_truncation
from .fock import Statistics
from .functional import InversionError, hxc_decompose, v_from_gamma
from .hamiltonian import add_potential, validate_potential, validate_spec
from .reference import f_s

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("validate", "ensemble", "sweep", "invert", "functional", "bogoliubov", "check")


class ValidationFailure(ValueError):
    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int
    log: bool = False

    def values(self):
        if self.count == 1:
            return np.array([self.start])
        if self.log:
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


def parse_grid(text, allow_log=True) -> Grid:
    parts = text.split(":")
    log = False
    if len(parts) == 4 and allow_log:
        if parts[3] not in ("log", "lin"):
            raise argparse.ArgumentTypeError(f"grid spacing must be 'log' or 'lin', got {parts[3]!r}")
        log = parts[3] == "log"
        parts = parts[:3]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected A:B:N{'[:log]' if allow_log else ''}, got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    if a > b:
        raise argparse.ArgumentTypeError("grid start must not exceed stop")
    if log and a <= 0:
        raise argparse.ArgumentTypeError("log grid needs a positive start")
    return Grid(a, b, n, log)


def _mu_grid(text):
    return parse_grid(text, allow_log=False)


@dataclass(frozen=True)
class RunConfig:
    command: str
    model_path: str
    beta: Optional[float] = None
    beta_range: Optional[Grid] = None
    mu_range: Optional[Grid] = None
    gamma_path: Optional[str] = None
    output_format: str = "json"
    output_path: Optional[str] = None
    tolerance: Optional[float] = None
    seed: int = 0
    workers: int = 1

    def betas(self):
        if self.beta_range is not None:
            return self.beta_range.values()
        return np.array([1.0 if self.beta is None else self.beta])


def build_parser():
    p = argparse.ArgumentParser(prog="rdmft", description="Finite-temperature reduced density matrix tools.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True, metavar="PATH", help="model JSON file")
    b = p.add_mutually_exclusive_group()
    b.add_argument("--beta", type=float, metavar="X")
    b.add_argument("--beta-range", type=parse_grid, metavar="A:B:N[:log]")
    p.add_argument("--mu-range", type=_mu_grid, metavar="A:B:N")
    p.add_argument("--gamma", metavar="PATH", help="1RDM JSON file (invert, functional)")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--tol", type=float, metavar="X")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--workers", type=int, default=1, metavar="N")
    return p


def config_from_args(ns) -> RunConfig:
    fmt = ns.format or ("csv" if ns.command == "sweep" else "json")
    if ns.beta is not None and not ns.beta > 0:
        raise ValidationFailure("beta must be positive", field="beta")
    if ns.beta_range is not None and not ns.beta_range.start > 0:
        raise ValidationFailure("beta range must be positive", field="beta_range")
    if ns.workers < 1:
        raise ValidationFailure("workers must be >= 1", field="workers")
    return RunConfig(ns.command, ns.model, ns.beta, ns.beta_range, ns.mu_range, ns.gamma, fmt, ns.out,
                     ns.tol, ns.seed, ns.workers)


def _single_beta(cfg):
    if cfg.beta_range is not None and cfg.beta_range.count != 1:
        raise ValidationFailure(f"{cfg.command} takes a single beta", field="beta_range")
    return float(cfg.betas()[0])


def _truncation(spec, beta, tol, v=None):
    if spec.statistics is Statistics.FERMION:
        return None
    if spec.bosonic_truncation is not None:
        return spec.bosonic_truncation
    target = spec if v is None else add_potential(spec, v)
    n, _ = converge_truncation(target, beta, tol)
    return n


def _require_potential(spec, v, where=""):
    pc = validate_potential(spec, v)
    if not pc.passed:
        raise ValidationFailure(f"infeasible potential{where}: {pc.detail}", min_eigenvalue=pc.min_eigenvalue)


def _require_spec(spec):
    rep = validate_spec(spec)
    if not rep.mandatory_ok:
        bad = rep.failures()[0]
        raise ValidationFailure(f"model fails {bad.name}", check=bad.name, value=bad.value)


def _ensemble(spec, cfg):
    _require_spec(spec)
    beta = _single_beta(cfg)
    _require_potential(spec, np.zeros_like(spec.h1))
    tol = cfg.tolerance or 1e-10
    trunc = _truncation(spec, beta, tol)
    st = ThermalModel(spec, trunc).state(beta)
    return io.EnsembleSummary.from_state(st, spec.statistics, trunc)


def _sweep_point(spec, beta, mu, tol):
    v = -mu * np.eye(spec.n_basis)
    _require_potential(spec, v, f" at beta={beta!r}, mu={mu!r}")
    trunc = _truncation(spec, beta, tol, v)
    st = ThermalModel(spec, trunc).state(beta, v)
    return io.EnsembleSummary.from_state(st, spec.statistics, trunc)


SWEEP_COLUMNS = ("beta", "mu", "log_Z", "omega", "energy", "entropy", "N_mean", "N_var")


def sweep(spec, betas, mus, tol=1e-10, workers=1):
    """Rows ``(beta, mu, summary)`` in beta-outer, mu-inner order; ``v = -mu * I``."""
    _require_spec(spec)
    grid = [(float(b), float(m)) for b in betas for m in mus]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(lambda bm: _sweep_point(spec, bm[0], bm[1], tol), grid))
    else:
        out = [_sweep_point(spec, b, m, tol) for b, m in grid]
    return [(b, m, s) for (b, m), s in zip(grid, out)]


def _sweep(spec, cfg):
    mus = cfg.mu_range.values() if cfg.mu_range is not None else np.array([0.0])
    return sweep(spec, cfg.betas(), mus, cfg.tolerance or 1e-10, cfg.workers)


def _invert(spec, cfg):
    _require_spec(spec)
    if cfg.gamma_path is None:
        raise io.ModelParseError("invert needs --gamma", field="gamma")
    beta = _single_beta(cfg)
    g = io.load_gamma(cfg.gamma_path, spec.statistics, spec.n_basis)
    res = v_from_gamma(spec, g, beta, tol=cfg.tolerance or 1e-9)
    if not res.converged:
        raise InversionError(f"inversion did not converge after {res.iterations} iterations", res)
    return res


def _functional(spec, cfg):
    _require_spec(spec)
    if cfg.gamma_path is None:
        raise io.ModelParseError("functional needs --gamma", field="gamma")
    beta = _single_beta(cfg)
    g = io.load_gamma(cfg.gamma_path, spec.statistics, spec.n_basis)
    tol = cfg.tolerance or 1e-9
    res = v_from_gamma(spec, g, beta, tol=tol)
    if not res.converged:
        raise InversionError(f"inversion did not converge after {res.iterations} iterations", res)
    if spec.w is not None:
        dec = hxc_decompose(spec, g, beta, inversion=res)
        return io.FunctionalReport(dec.F, dec.F_s, res.v.v, res.gamma_residual, res.iterations, dec)
    fs = f_s(g, spec.h1, beta, spec.statistics) + spec.h0
    return io.FunctionalReport(res.F_value, fs, res.v.v, res.gamma_residual, res.iterations)


def _bogoliubov(spec, cfg):
    if spec.w is not None:
        raise ValidationFailure("bogoliubov needs a quadratic model (no w)", field="w")
    _require_spec(spec)
    return bogoliubov.diagonalize(bogoliubov.QuadraticSpec.from_hamiltonian(spec))


def _check(spec, cfg):
    return run_checks(spec, _single_beta(cfg), cfg.seed, cfg.tolerance or 1e-10)


def _fmt(x):
    return "" if x is None else "%.17g" % x


def sweep_csv(rows) -> str:
    nb = max((len(s.occupations) for _, _, s in rows if s.occupations is not None), default=0)
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(list(SWEEP_COLUMNS) + [f"gamma_eig_{k}" for k in range(nb)])
    for b, m, s in rows:
        occ = [] if s.occupations is None else list(s.occupations)
        wr.writerow([_fmt(x) for x in (b, m, s.log_Z, s.omega, s.energy, s.entropy, s.N_mean, s.N_var)]
                    + [_fmt(x) for x in occ])
    return buf.getvalue()


def checks_csv(table) -> str:
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["name", "passed", "margin", "threshold", "detail"])
    for r in table.results:
        wr.writerow([r.name, int(r.passed), _fmt(r.margin), _fmt(r.threshold), r.detail])
    return buf.getvalue()


def render(command, result, fmt) -> str:
    if command == "sweep":
        if fmt == "csv":
            return sweep_csv(result)
        return io.dumps(io.SweepResult(tuple(result)))
    if fmt == "csv":
        if command == "check":
            return checks_csv(result)
        raise ValidationFailure(f"csv output is available for sweep and check, not {command}", field="format")
    return io.dumps(result)


HANDLERS = {"validate": None, "ensemble": _ensemble, "sweep": _sweep, "invert": _invert,
            "functional": _functional, "bogoliubov": _bogoliubov, "check": _check}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``; returns the exit status.  Errors are written to stderr as JSON."""
    stdout = sys.stdout if stdout is None else stdout
    status = EXIT_OK
    try:
        spec = io.load_model(cfg.model_path)
        if cfg.command == "validate":
            result = validate_spec(spec)
            status = EXIT_OK if result.ok else EXIT_INVALID
        else:
            result = HANDLERS[cfg.command](spec, cfg)
            if cfg.command == "check" and not result.passed:
                status = EXIT_INVALID
            if cfg.command == "bogoliubov" and not result.stable:
                status = EXIT_INVALID
        text = render(cfg.command, result, cfg.output_format)
        if cfg.output_path:
            try:
                with open(cfg.output_path, "w") as fh:
                    fh.write(text)
            except OSError as exc:
                raise io.ModelParseError(f"cannot write {cfg.output_path}: {exc.strerror}",
                                         path=cfg.output_path) from None
        else:
            stdout.write(text)
        return status
    except io.ModelParseError as exc:
        return _fail(exc.to_dict(), EXIT_IO)
    except InversionError as exc:
        info = {"error": "nonconvergence", "message": str(exc)}
        if exc.result is not None:
            info.update(gamma_residual=exc.result.gamma_residual, iterations=exc.result.iterations)
        return _fail(info, EXIT_NONCONVERGED)
    except TruncationError as exc:
        info = {"error": "nonconvergence", "message": str(exc), "truncation": exc.truncation,
                "z_change": exc.z_change, "gamma_change": exc.gamma_change, "tail_bound": exc.tail_bound}
        return _fail(info, EXIT_NONCONVERGED)
    except ValidationFailure as exc:
        return _fail({"error": "validation", "message": str(exc), **exc.info}, EXIT_INVALID)
    except ValueError as exc:
        return _fail({"error": "validation", "message": str(exc)}, EXIT_INVALID)


def _fail(info, code):
    sys.stderr.write(json.dumps(info, default=float) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse has already printed usage; bad flags count as parse errors
        return EXIT_IO if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
    except ValidationFailure as exc:
        return _fail({"error": "validation", "message": str(exc), **exc.info}, EXIT_INVALID)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
