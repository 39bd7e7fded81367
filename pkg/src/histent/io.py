"""JSON circuit / schedule files.

Schema (complex numbers are ``[re, im]`` pairs; a bare number is real)::

    {
      "qubits": 3,                 # or "dim": 4 with optional "factor_dims"
      "parameters": {"p": 0.5},    # optional, overridable from the CLI
      "partition": {"A": [0, 1]},  # optional; default A = all but last factor
      "initial": "basis:000" | ["chi:p", "bell:00"] | {"amplitudes": [...]},
      "steps": [
        {"time": 1,                # optional, defaults to the step number
         "unitary": null | "CNOT 0 1" | [gate, ...] | {"matrix": [[...]]},
         "measure": "computational" | {"qubits": [0]} |
                    [{"label": "0", "projector": [[...]]}, ...]}
      ]
    }

A gate is ``"NAME q0 q1 ..."`` or ``{"gate": NAME, "targets": [...]}`` or
``{"matrix": [[...]], "targets": [...]}``; gates in a list apply left to
right. Named initial states are ``basis:<bits>``, ``bell:<xy>``,
``chi:<alpha_re,alpha_im,beta_re,beta_im>`` and ``chi:<param>`` (alpha =
sqrt(param), beta = sqrt(1 - param)); a list means their tensor product.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from histent.circuits import (
    GateSpec,
    basis_ket,
    bell_ket,
    chi_ket,
    computational_event,
    gate_matrix,
)
from histent.entanglement import SpacePartition
from histent.errors import InputError
from histent.history import MeasurementEvent, Schedule
from histent.tensor import SpaceFactorization, kron_all

FIXTURES = ("entangler.json", "teleportation.json", "doubleslit.json")


def _complex(x: Any, where: str) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise InputError(f"{where}: expected a number or [re, im] pair, got {x!r}")


def _vector(rows: Any, where: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise InputError(f"{where}: expected a non-empty list of complex numbers")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(rows)], dtype=np.complex128)


def _matrix(rows: Any, where: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InputError(f"{where}: expected a matrix as a list of rows")
    m = [_vector(r, f"{where}[{i}]") for i, r in enumerate(rows)]
    if len({len(r) for r in m}) != 1:
        raise InputError(f"{where}: rows have different lengths")
    return np.array(m)


def _encode(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def encode_matrix(m: np.ndarray) -> list[list[list[float]]]:
    return [[_encode(z) for z in row] for row in np.asarray(m)]


@dataclass
class CircuitFile:
    """A parsed input document; ``schedule(params)`` rebuilds with overrides."""

    doc: dict
    source: str = "<memory>"
    parameters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.doc, dict):
            raise InputError(f"{self.source}: top level must be a JSON object")
        params = self.doc.get("parameters", {})
        if not isinstance(params, dict):
            raise InputError(f"{self.source}: 'parameters' must be an object")
        self.parameters = {str(k): float(v) for k, v in params.items()}

    @property
    def factorization(self) -> SpaceFactorization:
        d = self.doc
        if "qubits" in d:
            return SpaceFactorization.qubits(_count(d["qubits"], "qubits"))
        if "factor_dims" in d:
            f = SpaceFactorization(tuple(_count(x, "factor_dims") for x in d["factor_dims"]))
            if "dim" in d and _count(d["dim"], "dim") != f.dim:
                raise InputError(f"{self.source}: factor_dims {f.factor_dims} do not multiply to dim {d['dim']}")
            return f
        if "dim" in d:
            return SpaceFactorization((_count(d["dim"], "dim"),))
        raise InputError(f"{self.source}: one of 'qubits' or 'dim' is required")

    @property
    def n_qubits(self) -> int | None:
        return _count(self.doc["qubits"], "qubits") if "qubits" in self.doc else None

    def partition(self) -> SpacePartition:
        f = self.factorization
        n = len(f.factor_dims)
        spec = self.doc.get("partition")
        if spec is None:
            if n < 2:
                raise InputError(f"{self.source}: a space partition needs at least two tensor factors")
            return SpacePartition(f.factor_dims, tuple(range(n - 1)))
        if not isinstance(spec, dict) or "A" not in spec:
            raise InputError(f"{self.source}: 'partition' must be an object with key 'A'")
        return SpacePartition(f.factor_dims, tuple(spec["A"]))

    def schedule(self, overrides: Mapping[str, float] | None = None) -> Schedule:
        params = dict(self.parameters)
        params.update(overrides or {})
        return _build_schedule(self.doc, self.factorization, self.n_qubits, params, self.source)


def _count(x: Any, name: str) -> int:
    if not isinstance(x, int) or isinstance(x, bool) or x < 1:
        raise InputError(f"'{name}' must be a positive integer, got {x!r}")
    return x


def _named_state(spec: str, params: Mapping[str, float], where: str) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    if kind == "basis":
        return basis_ket(arg)
    if kind == "bell":
        return bell_ket(arg)
    if kind == "chi":
        parts = arg.split(",")
        if len(parts) == 4:
            try:
                ar, ai, br, bi = (float(x) for x in parts)
            except ValueError:
                raise InputError(f"{where}: bad chi amplitudes {arg!r}") from None
            return chi_ket(complex(ar, ai), complex(br, bi))
        if arg in params:
            p = params[arg]
            if not 0.0 <= p <= 1.0:
                raise InputError(f"{where}: parameter {arg}={p} outside [0, 1]")
            return chi_ket(math.sqrt(p), math.sqrt(1.0 - p))
        raise InputError(f"{where}: chi needs four numbers or a defined parameter, got {arg!r}")
    raise InputError(f"{where}: unknown named state {spec!r}")


def _initial(doc: dict, dim: int, params, source: str) -> np.ndarray:
    where = f"{source}: initial"
    spec = doc.get("initial")
    if spec is None:
        raise InputError(f"{where}: missing")
    if isinstance(spec, str):
        psi = _named_state(spec, params, where)
    elif isinstance(spec, list) and spec and all(isinstance(s, str) for s in spec):
        psi = kron_all(_named_state(s, params, f"{where}[{i}]")[:, None] for i, s in enumerate(spec))[:, 0]
    elif isinstance(spec, dict) and "amplitudes" in spec:
        psi = _vector(spec["amplitudes"], f"{where}.amplitudes")
        if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
            raise InputError(f"{where}: amplitudes are not normalized")
    else:
        raise InputError(f"{where}: unrecognized initial state {spec!r}")
    if psi.shape != (dim,):
        raise InputError(f"{where}: state has dimension {psi.shape[0]}, expected {dim}")
    return psi


def _gate(item: Any, n_qubits: int | None, dim: int, where: str) -> np.ndarray:
    if isinstance(item, dict) and "matrix" in item and "targets" not in item:
        return _matrix(item["matrix"], f"{where}.matrix")
    if n_qubits is None:
        raise InputError(f"{where}: named gates need a 'qubits' file")
    if isinstance(item, str):
        name, *targets = item.split()
        try:
            spec = GateSpec(name, tuple(int(t) for t in targets))
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from None
    elif isinstance(item, dict) and "targets" in item:
        if "matrix" in item:
            spec = GateSpec(item.get("gate", "custom"), tuple(item["targets"]), _matrix(item["matrix"], f"{where}.matrix"))
        else:
            spec = GateSpec(str(item.get("gate")), tuple(item["targets"]))
    else:
        raise InputError(f"{where}: unrecognized gate {item!r}")
    try:
        return gate_matrix(spec, n_qubits)
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from None


def _unitary(spec: Any, n_qubits: int | None, dim: int, where: str) -> np.ndarray:
    u = np.eye(dim, dtype=np.complex128)
    if spec is None or spec == "I":
        return u
    items = spec if isinstance(spec, list) else [spec]
    if isinstance(spec, dict) and "matrix" in spec and "targets" not in spec:
        items = [spec]
    for i, item in enumerate(items):
        g = _gate(item, n_qubits, dim, f"{where}[{i}]" if isinstance(spec, list) else where)
        if g.shape != (dim, dim):
            raise InputError(f"{where}: matrix shape {g.shape}, expected {(dim, dim)}")
        u = g @ u
    return u


def _measure(spec: Any, t: int, n_qubits: int | None, dim: int, where: str) -> MeasurementEvent:
    if spec == "computational":
        if n_qubits is not None:
            return computational_event(t, n_qubits)
        return MeasurementEvent.computational(t, dim)
    if isinstance(spec, dict) and "qubits" in spec:
        if n_qubits is None:
            raise InputError(f"{where}: qubit measurements need a 'qubits' file")
        return computational_event(t, n_qubits, list(spec["qubits"]))
    if isinstance(spec, list) and spec:
        outcomes = []
        for i, o in enumerate(spec):
            if not isinstance(o, dict) or "label" not in o or "projector" not in o:
                raise InputError(f"{where}[{i}]: expected {{'label', 'projector'}}")
            outcomes.append((str(o["label"]), _matrix(o["projector"], f"{where}[{i}].projector")))
        return MeasurementEvent(t, tuple(outcomes))
    raise InputError(f"{where}: unrecognized measurement {spec!r}")


def _build_schedule(doc: dict, f: SpaceFactorization, n_qubits, params, source: str) -> Schedule:
    dim = f.dim
    psi = _initial(doc, dim, params, source)
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        raise InputError(f"{source}: 'steps' must be a non-empty list")
    events, evolutions = [], []
    for k, step in enumerate(steps):
        if not isinstance(step, dict):
            raise InputError(f"{source}: steps[{k}] must be an object")
        t = step.get("time", k + 1)
        if not isinstance(t, int) or isinstance(t, bool):
            raise InputError(f"{source}: steps[{k}].time must be an integer")
        where = f"{source}: steps[{k}] (t{t})"
        try:
            evolutions.append(_unitary(step.get("unitary"), n_qubits, dim, f"{where}.unitary"))
            events.append(_measure(step.get("measure", "computational"), t, n_qubits, dim, f"{where}.measure"))
        except InputError as exc:
            msg = str(exc)
            raise InputError(msg if msg.startswith(source) else f"{where}: {msg}") from None
    try:
        return Schedule(psi, tuple(events), tuple(evolutions), f)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None


def resolve_input(name: str | Path) -> Path:
    """A filesystem path, or the name of a bundled fixture."""
    p = Path(name)
    if p.exists():
        return p
    if p.name in FIXTURES and str(p) == p.name:
        return Path(str(resources.files("histent") / "fixtures" / p.name))
    raise InputError(f"input file not found: {name}")


def load_input(path: str | Path) -> CircuitFile:
    p = resolve_input(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{p.name}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return CircuitFile(doc, p.name)


def parse_circuit_file(path: str | Path, params: Mapping[str, float] | None = None) -> Schedule:
    return load_input(path).schedule(params)


def schedule_to_dict(s: Schedule) -> dict:
    """Explicit-matrix document that parses back to the same schedule."""
    doc: dict[str, Any] = {"dim": s.dim}
    if s.factorization is not None and len(s.factorization.factor_dims) > 1:
        doc["factor_dims"] = list(s.factorization.factor_dims)
    doc["initial"] = {"amplitudes": [_encode(z) for z in s.initial_state]}
    doc["steps"] = [
        {
            "time": ev.time_label,
            "unitary": {"matrix": encode_matrix(u)},
            "measure": [{"label": lbl, "projector": encode_matrix(p)} for lbl, p in ev.outcomes],
        }
        for ev, u in zip(s.events, s.evolutions)
    ]
    return doc


def write_schedule(s: Schedule, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(s), indent=1) + "\n")
