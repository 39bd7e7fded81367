"""Gate library and the canonical circuit schedules.

Qubit 0 is the leftmost tensor factor and the most significant bit of a
computational-basis label, so the label ``"10"`` means qubit 0 in |1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike

from histent.errors import InputError
from histent.history import MeasurementEvent, Schedule
from histent.tensor import ComplexMatrix, SpaceFactorization, StateVector, as_matrix, is_unitary, kron, structural_tol

_S2 = 1 / math.sqrt(2)

GATES: dict[str, ComplexMatrix] = {
    "I": np.eye(2, dtype=np.complex128),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "S": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=np.complex128),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128),
    "CZ": np.diag([1, 1, 1, -1]).astype(np.complex128),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128),
}
GATES["CX"] = GATES["CNOT"]


@dataclass(frozen=True, eq=False)
class GateSpec:
    """A named gate (or custom unitary) on the listed qubits.

    For controlled gates the first target is the control.
    """

    name: str
    targets: tuple[int, ...]
    matrix: ComplexMatrix | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.matrix is None:
            key = self.name.upper()
            if key not in GATES:
                raise InputError(f"unknown gate {self.name!r}")
            m = GATES[key]
        else:
            m = as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        k = len(self.targets)
        if len(set(self.targets)) != k:
            raise InputError(f"gate {self.name}: repeated targets {self.targets}")
        if m.shape != (2**k, 2**k):
            raise InputError(f"gate {self.name}: matrix {m.shape} does not act on {k} qubit(s)")
        if not is_unitary(m, structural_tol()):
            raise InputError(f"gate {self.name}: matrix is not unitary")


def _apply_on_axes(state: np.ndarray, g: ComplexMatrix, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    t = state.reshape((2,) * n + state.shape[1:])
    t = np.tensordot(g.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(targets)))
    # tensordot puts the gate's output axes first; move them back in place
    t = np.moveaxis(t, list(range(k)), list(targets))
    return t.reshape(state.shape)


def gate_matrix(g: GateSpec, n_qubits: int) -> ComplexMatrix:
    """Full 2^n x 2^n unitary of ``g`` with identity on the other qubits."""
    if any(t < 0 or t >= n_qubits for t in g.targets):
        raise InputError(f"gate {g.name}: targets {g.targets} out of range for {n_qubits} qubits")
    dim = 2**n_qubits
    return _apply_on_axes(np.eye(dim, dtype=np.complex128), g.matrix, g.targets, n_qubits)


def layer_unitary(gates: Sequence[GateSpec], n_qubits: int) -> ComplexMatrix:
    """Gates applied in the declared order (first gate acts first)."""
    u = np.eye(2**n_qubits, dtype=np.complex128)
    for g in gates:
        u = gate_matrix(g, n_qubits) @ u
    return u


def basis_ket(bits: str) -> StateVector:
    if not bits or any(b not in "01" for b in bits):
        raise InputError(f"invalid bitstring {bits!r}")
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[int(bits, 2)] = 1.0
    return v


def bell_ket(which: str = "00") -> StateVector:
    """beta_xy = (|0y> + (-1)^x |1 ybar>) / sqrt 2."""
    if which not in ("00", "01", "10", "11"):
        raise InputError(f"invalid Bell label {which!r}")
    x, y = int(which[0]), int(which[1])
    v = np.zeros(4, dtype=np.complex128)
    v[y] = _S2
    v[2 + (1 - y)] = (-1) ** x * _S2
    return v


def chi_ket(alpha: complex, beta: complex) -> StateVector:
    v = np.array([alpha, beta], dtype=np.complex128)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InputError(f"|alpha|^2 + |beta|^2 = {np.linalg.norm(v) ** 2:.15f}, expected 1")
    return v


def computational_event(time_label: int, n_qubits: int, qubits: Sequence[int] | None = None) -> MeasurementEvent:
    """Computational-basis measurement of ``qubits`` (all by default)."""
    if qubits is None:
        qubits = range(n_qubits)
    qubits = list(qubits)
    if any(q < 0 or q >= n_qubits for q in qubits) or len(set(qubits)) != len(qubits):
        raise InputError(f"t{time_label}: invalid measured qubits {qubits}")
    dim = 2**n_qubits
    bits = (np.arange(dim)[:, None] >> (n_qubits - 1 - np.arange(n_qubits))[None, :]) & 1
    outcomes = []
    for code in range(2 ** len(qubits)):
        label = format(code, f"0{len(qubits)}b") if qubits else ""
        want = np.array([int(c) for c in label], dtype=int)
        diag = np.all(bits[:, qubits] == want, axis=1) if qubits else np.ones(dim, bool)
        outcomes.append((label, np.diag(diag.astype(np.complex128))))
    return MeasurementEvent(time_label, tuple(outcomes))


Measurement = Union[str, Sequence[int], MeasurementEvent, Sequence[tuple[str, ArrayLike]]]


@dataclass(eq=False)
class CircuitSpec:
    """Qubit circuit as alternating gate layers and measurements.

    ``layers`` holds ``(gates, measurement)`` pairs. A measurement is
    ``"computational"``, a list of qubit indices measured in the computational
    basis, or an explicit list of ``(label, projector)`` pairs.
    """

    n_qubits: int
    initial_state: StateVector
    layers: list[tuple[list[GateSpec], Measurement]] = field(default_factory=list)

    def to_schedule(self) -> Schedule:
        events, evolutions = [], []
        for k, (gates, meas) in enumerate(self.layers):
            t = k + 1
            evolutions.append(layer_unitary(gates, self.n_qubits))
            events.append(_measurement_event(meas, t, self.n_qubits))
        return Schedule(self.initial_state, tuple(events), tuple(evolutions), SpaceFactorization.qubits(self.n_qubits))


def _measurement_event(meas: Measurement, t: int, n_qubits: int) -> MeasurementEvent:
    if isinstance(meas, MeasurementEvent):
        return meas
    if isinstance(meas, str):
        if meas != "computational":
            raise InputError(f"t{t}: unknown measurement {meas!r}")
        return computational_event(t, n_qubits)
    meas = list(meas)
    if all(isinstance(q, (int, np.integer)) for q in meas):
        return computational_event(t, n_qubits, meas)
    return MeasurementEvent(t, tuple((str(lbl), as_matrix(p)) for lbl, p in meas))


def entangler_schedule() -> Schedule:
    """|00>, H on qubit 0 then measure, CNOT(0, 1) then measure."""
    spec = CircuitSpec(
        2,
        basis_ket("00"),
        [
            ([GateSpec("H", (0,))], "computational"),
            ([GateSpec("CNOT", (0, 1))], "computational"),
        ],
    )
    return spec.to_schedule()


def teleportation_schedule(alpha: complex, beta: complex) -> Schedule:
    """(alpha|0> + beta|1>) x beta_00, measured at t1, after CNOT(0,1) at t2
    and after H on qubit 0 at t3. Qubits 0, 1 belong to Alice, qubit 2 to Bob.
    """
    psi = kron(chi_ket(alpha, beta), bell_ket("00"))
    spec = CircuitSpec(
        3,
        psi,
        [
            ([], "computational"),
            ([GateSpec("CNOT", (0, 1))], "computational"),
            ([GateSpec("H", (0,))], "computational"),
        ],
    )
    return spec.to_schedule()


def teleportation_schedule_p(p: float) -> Schedule:
    """Teleportation with alpha = sqrt(p), beta = sqrt(1 - p)."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"p must lie in [0, 1], got {p}")
    return teleportation_schedule(math.sqrt(p), math.sqrt(1.0 - p))


def double_slit_schedule() -> Schedule:
    """|0>, H then measure, H then measure: an inconsistent two-time family."""
    spec = CircuitSpec(
        1,
        basis_ket("0"),
        [([GateSpec("H", (0,))], "computational"), ([GateSpec("H", (0,))], "computational")],
    )
    return spec.to_schedule()
