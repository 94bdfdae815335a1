"""JSON serialization of models, 1RDMs and results.

Complex arrays are flat row-major lists of ``[re, im]`` pairs.  Every result
dictionary carries a ``"type"`` tag so :func:`loads` can rebuild the object
that emitted it.

Model schema::

    {"statistics": "fermion" | "boson",
     "n_basis": Nb,
     "h0": 0.0,
     "h1": [[re, im], ...],          # Nb*Nb entries
     "w": [[re, im], ...],           # optional, Nb**4 entries, index order i,j,k,l
     "source": [[re, im], ...],      # optional, Nb entries
     "pairing": [[re, im], ...],     # optional, Nb*Nb entries
     "bosonic_truncation": N}        # optional
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bogoliubov import BogoliubovSolution
from .ensemble import GibbsState, OneRDM
from .fock import Statistics
from .functional import HxcDecomposition, InversionResult
from .hamiltonian import Check, HamiltonianSpec, Potential, ValidationReport

MODEL_FIELDS = ("statistics", "n_basis", "h0", "h1", "w", "source", "pairing", "bosonic_truncation")


class ModelParseError(ValueError):
    """Malformed input file; ``field``, ``line`` and ``column`` locate the problem when known."""

    def __init__(self, message, field=None, line=None, column=None, path=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column
        self.path = path

    def to_dict(self):
        out = {"error": "parse", "message": str(self)}
        for key in ("path", "field", "line", "column"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def encode_array(a):
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in a]


def decode_array(data, shape, name="array"):
    if isinstance(data, list) and data and isinstance(data[0], list) and data[0] \
            and isinstance(data[0][0], list):
        data = [pair for row in data for pair in row]
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(f"{name}: entries must be numeric [re, im] pairs", field=name) from None
    size = int(np.prod(shape))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ModelParseError(f"{name}: expected a list of [re, im] pairs", field=name)
    if arr.shape[0] != size:
        raise ModelParseError(f"{name}: expected {size} entries, got {arr.shape[0]}", field=name)
    if not np.all(np.isfinite(arr)):
        raise ModelParseError(f"{name}: non-finite entry", field=name)
    # view the pairs as complex so signed zeros survive a round-trip
    return np.ascontiguousarray(arr).view(np.complex128).reshape(shape)


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelParseError(f"cannot read {path}: {exc.strerror}", path=str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno,
                              path=str(path)) from None


def spec_to_dict(spec: HamiltonianSpec) -> dict:
    out = {"statistics": spec.statistics.value, "n_basis": spec.n_basis, "h0": float(spec.h0),
           "h1": encode_array(spec.h1)}
    if spec.w is not None:
        out["w"] = encode_array(spec.w)
    if spec.source is not None:
        out["source"] = encode_array(spec.source)
    if spec.pairing is not None:
        out["pairing"] = encode_array(spec.pairing)
    if spec.bosonic_truncation is not None:
        out["bosonic_truncation"] = spec.bosonic_truncation
    return out


def spec_from_dict(d) -> HamiltonianSpec:
    if not isinstance(d, dict):
        raise ModelParseError("model must be a JSON object")
    unknown = sorted(set(d) - set(MODEL_FIELDS))
    if unknown:
        raise ModelParseError(f"unknown field {unknown[0]!r}", field=unknown[0])
    for key in ("statistics", "n_basis", "h1"):
        if key not in d:
            raise ModelParseError(f"missing field {key!r}", field=key)
    try:
        stats = Statistics.parse(d["statistics"])
    except ValueError:
        raise ModelParseError(f"statistics must be 'fermion' or 'boson', got {d['statistics']!r}",
                              field="statistics") from None
    nb = d["n_basis"]
    if isinstance(nb, bool) or not isinstance(nb, int) or nb < 1:
        raise ModelParseError("n_basis must be a positive integer", field="n_basis")
    h0 = d.get("h0", 0.0)
    if isinstance(h0, bool) or not isinstance(h0, (int, float)):
        raise ModelParseError("h0 must be a real number", field="h0")
    h1 = decode_array(d["h1"], (nb, nb), "h1")
    w = decode_array(d["w"], (nb,) * 4, "w") if d.get("w") is not None else None
    src = decode_array(d["source"], (nb,), "source") if d.get("source") is not None else None
    pair = decode_array(d["pairing"], (nb, nb), "pairing") if d.get("pairing") is not None else None
    trunc = d.get("bosonic_truncation")
    if trunc is not None and (isinstance(trunc, bool) or not isinstance(trunc, int) or trunc < 0):
        raise ModelParseError("bosonic_truncation must be a non-negative integer", field="bosonic_truncation")
    try:
        return HamiltonianSpec(stats, nb, h1, float(h0), w, src, pair, trunc)
    except ValueError as exc:
        raise ModelParseError(str(exc)) from None


def load_model(path) -> HamiltonianSpec:
    spec = spec_from_dict(_read_json(path))
    return spec


def save_model(spec: HamiltonianSpec, path):
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=1)
        fh.write("\n")


def load_gamma(path, statistics, n_basis) -> OneRDM:
    """1RDM file: either a bare list of pairs or an object with a ``"gamma"`` field."""
    d = _read_json(path)
    if isinstance(d, dict):
        if "gamma" not in d:
            raise ModelParseError("missing field 'gamma'", field="gamma", path=str(path))
        if "statistics" in d and Statistics.parse(d["statistics"]) is not Statistics.parse(statistics):
            raise ModelParseError("gamma statistics differ from the model", field="statistics")
        d = d["gamma"]
    m = decode_array(d, (n_basis, n_basis), "gamma")
    try:
        return OneRDM(m, Statistics.parse(statistics))
    except ValueError as exc:
        raise ModelParseError(f"gamma: {exc}", field="gamma") from None


def _opt(a):
    return None if a is None else encode_array(a)


def _real_list(a):
    return [float(x) for x in np.asarray(a, dtype=float).reshape(-1)]


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    """Serializable digest of a :class:`GibbsState`."""

    statistics: Statistics
    beta: float
    log_Z: float
    omega: float
    energy: float
    entropy: float
    N_mean: Optional[float]
    N_var: Optional[float]
    gamma: Optional[np.ndarray]
    occupations: Optional[np.ndarray]
    dimension: int
    truncation: Optional[int] = None

    @classmethod
    def from_state(cls, state: GibbsState, statistics, truncation=None):
        mean = var = gamma = occ = None
        if state.n_moments is not None:
            mean = state.n_moments[0]
            var = max(state.n_moments[1] - mean ** 2, 0.0)
        if state.gamma is not None:
            gamma = state.gamma.matrix
            occ = state.gamma.occupations()
        return cls(Statistics.parse(statistics), state.beta, state.log_Z, state.omega, state.energy,
                   state.entropy, mean, var, gamma, occ, state.dimension, truncation)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class CheckTable:
    seed: int
    results: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return all(r.passed for r in self.results)


@dataclass(frozen=True, eq=False)
class FunctionalReport:
    F: float
    F_s: float
    v: np.ndarray
    gamma_residual: float
    iterations: int
    decomposition: Optional[HxcDecomposition] = None


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Grid rows ``(beta, mu, EnsembleSummary)`` in beta-outer, mu-inner order."""

    rows: tuple


def to_dict(obj) -> dict:
    if isinstance(obj, HamiltonianSpec):
        return {"type": "model", **spec_to_dict(obj)}
    if isinstance(obj, ValidationReport):
        return {"type": "validation", "ok": obj.ok, "mandatory_ok": obj.mandatory_ok,
                "checks": [{"name": c.name, "passed": bool(c.passed), "value": c.value,
                            "threshold": c.threshold, "detail": c.detail, "mandatory": c.mandatory}
                           for c in obj.checks]}
    if isinstance(obj, EnsembleSummary):
        return {"type": "ensemble", "statistics": obj.statistics.value, "beta": obj.beta,
                "log_Z": obj.log_Z, "omega": obj.omega, "energy": obj.energy, "entropy": obj.entropy,
                "N_mean": obj.N_mean, "N_var": obj.N_var, "gamma": _opt(obj.gamma),
                "occupations": None if obj.occupations is None else _real_list(obj.occupations),
                "dimension": obj.dimension, "truncation": obj.truncation}
    if isinstance(obj, InversionResult):
        return {"type": "inversion", "v": encode_array(obj.v.v), "n_basis": obj.v.v.shape[0],
                "gamma_residual": obj.gamma_residual, "F_value": obj.F_value,
                "iterations": obj.iterations, "converged": bool(obj.converged),
                "omega": obj.omega, "truncation": obj.truncation}
    if isinstance(obj, HxcDecomposition):
        return {"type": "hxc", **{k: float(getattr(obj, k)) for k in HxcDecomposition.__dataclass_fields__}}
    if isinstance(obj, FunctionalReport):
        return {"type": "functional", "F": obj.F, "F_s": obj.F_s, "v": encode_array(obj.v),
                "n_basis": obj.v.shape[0], "gamma_residual": obj.gamma_residual,
                "iterations": obj.iterations,
                "decomposition": None if obj.decomposition is None else to_dict(obj.decomposition)}
    if isinstance(obj, BogoliubovSolution):
        nb = len(obj.eigenvalues) // 2 if obj.eigenvalues is not None else len(obj.quasiparticle_energies)
        ground = None if np.isnan(obj.ground_constant) else obj.ground_constant
        return {"type": "bogoliubov", "statistics": obj.statistics.value, "n_basis": nb,
                "quasiparticle_energies": _real_list(obj.quasiparticle_energies),
                "ground_constant": ground, "stable": bool(obj.stable),
                "U": _opt(obj.U), "V": _opt(obj.V), "shift": _opt(obj.shift),
                "shift_constant": obj.shift_constant,
                "eigenvalues": _opt(obj.eigenvalues), "detail": obj.detail}
    if isinstance(obj, SweepResult):
        return {"type": "sweep", "rows": [{"beta": b, "mu": m, "state": to_dict(st)} for b, m, st in obj.rows]}
    if isinstance(obj, CheckTable):
        return {"type": "checks", "seed": obj.seed, "passed": obj.passed,
                "results": [{"name": r.name, "passed": bool(r.passed), "margin": r.margin,
                             "threshold": r.threshold, "detail": r.detail} for r in obj.results]}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(d):
    kind = d.get("type")
    if kind == "model":
        return spec_from_dict({k: v for k, v in d.items() if k != "type"})
    if kind == "validation":
        return ValidationReport(tuple(Check(c["name"], c["passed"], c["value"], c["threshold"],
                                            c["detail"], c["mandatory"]) for c in d["checks"]))
    if kind == "ensemble":
        nb = None if d["occupations"] is None else len(d["occupations"])
        return EnsembleSummary(
            Statistics.parse(d["statistics"]), d["beta"], d["log_Z"], d["omega"], d["energy"],
            d["entropy"], d["N_mean"], d["N_var"],
            None if d["gamma"] is None else decode_array(d["gamma"], (nb, nb), "gamma"),
            None if d["occupations"] is None else np.asarray(d["occupations"]),
            d["dimension"], d["truncation"])
    if kind == "inversion":
        nb = d["n_basis"]
        return InversionResult(Potential(decode_array(d["v"], (nb, nb), "v")), d["gamma_residual"],
                               d["F_value"], d["iterations"], d["converged"], d["omega"], d["truncation"])
    if kind == "hxc":
        return HxcDecomposition(**{k: d[k] for k in HxcDecomposition.__dataclass_fields__})
    if kind == "functional":
        nb = d["n_basis"]
        dec = None if d["decomposition"] is None else from_dict(d["decomposition"])
        return FunctionalReport(d["F"], d["F_s"], decode_array(d["v"], (nb, nb), "v"),
                                d["gamma_residual"], d["iterations"], dec)
    if kind == "bogoliubov":
        nb = d["n_basis"]

        def arr(key, shape):
            return None if d[key] is None else decode_array(d[key], shape, key)
        ev = d["eigenvalues"]
        return BogoliubovSolution(
            Statistics.parse(d["statistics"]), np.asarray(d["quasiparticle_energies"], dtype=float),
            float("nan") if d["ground_constant"] is None else d["ground_constant"], d["stable"], arr("U", (nb, nb)), arr("V", (nb, nb)),
            arr("shift", (nb,)), d["shift_constant"],
            None if ev is None else decode_array(ev, (len(ev),), "eigenvalues"), d["detail"])
    if kind == "sweep":
        return SweepResult(tuple((r["beta"], r["mu"], from_dict(r["state"])) for r in d["rows"]))
    if kind == "checks":
        return CheckTable(d["seed"], tuple(CheckResult(r["name"], r["passed"], r["margin"], r["threshold"],
                                                       r["detail"]) for r in d["results"]))
    raise ModelParseError(f"unknown result type {kind!r}", field="type")


def dumps(obj) -> str:
    return json.dumps(to_dict(obj), indent=1) + "\n"


def loads(text):
    return from_dict(json.loads(text))
