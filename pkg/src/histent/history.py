"""History vectors built from a measurement schedule.

A :class:`Schedule` is an initial state plus measurement events at ordered
times, with a unitary evolution in front of every event. Each sequence of
outcomes (one label per event) is a history; its chain state

    C|psi> = P_{a_n} U_n ... P_{a_1} U_1 |psi>

carries everything needed for probabilities and decoherence functionals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from histent.errors import InputError, NumericalInvariantError
from histent.tensor import (
    ComplexMatrix,
    SpaceFactorization,
    StateVector,
    as_matrix,
    is_projector,
    is_unitary,
    ket,
    outer,
    projector_rank,
    structural_tol,
)

HistoryIndex = tuple[str, ...]

PRUNE_TOL = 1e-14
NORM_TOL = 1e-10


def _event_name(t: int) -> str:
    return f"t{t}"


@dataclass(frozen=True, eq=False)
class MeasurementEvent:
    """A complete family of orthogonal projectors measured at ``time_label``."""

    time_label: int
    outcomes: tuple[tuple[str, ComplexMatrix], ...]

    def __post_init__(self):
        outcomes = tuple((str(lbl), as_matrix(p)) for lbl, p in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        self._validate()

    def _validate(self) -> None:
        where = _event_name(self.time_label)
        if not self.outcomes:
            raise InputError(f"{where}: measurement has no outcomes")
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise InputError(f"{where}: duplicate outcome labels {labels}")
        tol = structural_tol()
        dim = self.outcomes[0][1].shape[0]
        total = np.zeros((dim, dim), dtype=np.complex128)
        for lbl, p in self.outcomes:
            if p.shape != (dim, dim):
                raise InputError(f"{where}: projector {lbl!r} has shape {p.shape}, expected {(dim, dim)}")
            if not is_projector(p, tol):
                raise InputError(f"{where}: operator {lbl!r} is not an orthogonal projector")
            total += p
        for i, (li, pi) in enumerate(self.outcomes):
            for lj, pj in self.outcomes[i + 1 :]:
                if np.max(np.abs(pi @ pj)) > tol:
                    raise InputError(f"{where}: projectors {li!r} and {lj!r} are not orthogonal")
        if np.max(np.abs(total - np.eye(dim))) > tol:
            raise InputError(f"{where}: projectors are not complete (sum differs from identity)")

    @property
    def dim(self) -> int:
        return self.outcomes[0][1].shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.outcomes)

    def projector(self, label: str) -> ComplexMatrix:
        for lbl, p in self.outcomes:
            if lbl == label:
                return p
        raise InputError(f"{_event_name(self.time_label)}: unknown outcome label {label!r}")

    def rank(self, label: str) -> int:
        return projector_rank(self.projector(label))

    def bra_vector(self, label: str) -> StateVector:
        """Representative unit vector of a rank-1 outcome.

        Phase convention: the column of the projector with the largest
        diagonal entry (first on ties), normalized. Computational-basis
        projectors give the basis vectors themselves.
        """
        p = self.projector(label)
        if projector_rank(p) != 1:
            raise ValueError(f"outcome {label!r} at {_event_name(self.time_label)} is not rank 1")
        j = int(np.argmax(np.real(np.diag(p))))
        return p[:, j] / np.sqrt(p[j, j].real)

    @classmethod
    def computational(cls, time_label: int, dim: int, labels: Sequence[str] | None = None) -> MeasurementEvent:
        if labels is None:
            labels = [str(k) for k in range(dim)]
        outcomes = []
        for k, lbl in enumerate(labels):
            p = np.zeros((dim, dim), dtype=np.complex128)
            p[k, k] = 1.0
            outcomes.append((lbl, p))
        return cls(time_label, tuple(outcomes))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Initial state, measurement events and the evolutions between them.

    ``evolutions[i]`` takes the system from the previous time (t_0 for
    ``i == 0``) to the time of ``events[i]``.
    """

    initial_state: StateVector
    events: tuple[MeasurementEvent, ...]
    evolutions: tuple[ComplexMatrix, ...]
    factorization: SpaceFactorization | None = None

    def __post_init__(self):
        psi = ket(self.initial_state)
        object.__setattr__(self, "initial_state", psi)
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "evolutions", tuple(as_matrix(u) for u in self.evolutions))
        self._validate()

    def _validate(self) -> None:
        dim = self.dim
        if abs(np.linalg.norm(self.initial_state) - 1.0) > 1e-12:
            raise InputError("initial state is not normalized")
        if not self.events:
            raise InputError("schedule has no measurement events")
        if len(self.evolutions) != len(self.events):
            raise InputError(f"{len(self.events)} events but {len(self.evolutions)} evolutions")
        tol = structural_tol()
        previous = None
        for ev, u in zip(self.events, self.evolutions):
            where = _event_name(ev.time_label)
            if previous is not None and ev.time_label <= previous:
                raise InputError(f"{where}: time labels must be strictly increasing")
            previous = ev.time_label
            if ev.dim != dim:
                raise InputError(f"{where}: projectors act on dimension {ev.dim}, state has {dim}")
            if u.shape != (dim, dim):
                raise InputError(f"{where}: evolution has shape {u.shape}, expected {(dim, dim)}")
            if not is_unitary(u, tol):
                raise InputError(f"{where}: evolution is not unitary")
        if self.factorization is not None and self.factorization.dim != dim:
            raise InputError(f"factorization {self.factorization.factor_dims} does not match dimension {dim}")

    @property
    def dim(self) -> int:
        return self.initial_state.shape[0]

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def times(self) -> tuple[int, ...]:
        return tuple(ev.time_label for ev in self.events)

    @property
    def alphabets(self) -> tuple[tuple[str, ...], ...]:
        return tuple(ev.labels for ev in self.events)

    def validate_index(self, alpha: Sequence[str]) -> HistoryIndex:
        alpha = tuple(str(a) for a in alpha)
        if len(alpha) != self.n_events:
            raise InputError(f"history {alpha} has {len(alpha)} outcomes, schedule has {self.n_events} events")
        for a, ev in zip(alpha, self.events):
            if a not in ev.labels:
                raise InputError(f"{_event_name(ev.time_label)}: unknown outcome label {a!r}")
        return alpha

    def truncated(self, n_keep: int) -> Schedule:
        """The first ``n_keep`` events only."""
        if not 1 <= n_keep <= self.n_events:
            raise ValueError(f"cannot keep {n_keep} of {self.n_events} events")
        return Schedule(self.initial_state, self.events[:n_keep], self.evolutions[:n_keep], self.factorization)

    def without_event(self, k: int) -> Schedule:
        """Drop the (non-final) event at position ``k``; its evolution is merged into the next."""
        if not 0 <= k < self.n_events - 1:
            raise ValueError(f"event position {k} is not an intermediate event")
        evs = self.events[:k] + self.events[k + 1 :]
        us = list(self.evolutions)
        us[k + 1] = us[k + 1] @ us[k]
        del us[k]
        return Schedule(self.initial_state, evs, tuple(us), self.factorization)

    def has_scalar_amplitudes(self) -> bool:
        final = self.events[-1]
        return all(final.rank(lbl) == 1 for lbl in final.labels)


@dataclass(frozen=True, eq=False)
class HistoryVector:
    """Histories with nonzero weight, in lexicographic (event, outcome) order.

    ``amplitudes`` is ``None`` when the final event has outcomes of rank > 1;
    probabilities and chain states are always present for vectors built from a
    schedule. Vectors assembled directly from amplitudes have no schedule.
    """

    times: tuple[int, ...]
    alphabets: tuple[tuple[str, ...], ...]
    histories: tuple[HistoryIndex, ...]
    probabilities: NDArray[np.float64]
    amplitudes: NDArray[np.complex128] | None = None
    chain_states: NDArray[np.complex128] | None = None
    schedule: Schedule | None = None
    _lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {h: i for i, h in enumerate(self.histories)})

    def __len__(self) -> int:
        return len(self.histories)

    def __iter__(self) -> Iterator[HistoryIndex]:
        return iter(self.histories)

    def index(self, alpha: Sequence[str]) -> int | None:
        return self._lookup.get(tuple(alpha))

    def amplitude(self, alpha: Sequence[str]) -> complex:
        if self.amplitudes is None:
            raise ValueError("history vector has no scalar amplitudes (rank > 1 final projectors)")
        i = self.index(alpha)
        return 0j if i is None else complex(self.amplitudes[i])

    def as_dict(self) -> dict[HistoryIndex, complex]:
        if self.amplitudes is None:
            raise ValueError("history vector has no scalar amplitudes (rank > 1 final projectors)")
        return {h: complex(a) for h, a in zip(self.histories, self.amplitudes)}

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.probabilities)))

    @classmethod
    def from_amplitudes(
        cls,
        amplitudes: dict[Sequence[str], complex],
        times: Sequence[int] | None = None,
        alphabets: Sequence[Sequence[str]] | None = None,
    ) -> HistoryVector:
        """Assemble a vector from an explicit ``{history: amplitude}`` map."""
        items = [(tuple(str(x) for x in h), complex(a)) for h, a in amplitudes.items() if abs(a) > PRUNE_TOL]
        if not items:
            raise ValueError("no nonzero amplitudes")
        n = len(items[0][0])
        if any(len(h) != n for h, _ in items):
            raise ValueError("histories of different lengths")
        if alphabets is None:
            alphabets = [sorted({h[k] for h, _ in items}) for k in range(n)]
        alphabets = tuple(tuple(a) for a in alphabets)
        times = tuple(range(1, n + 1)) if times is None else tuple(int(t) for t in times)
        if len(times) != n or len(alphabets) != n:
            raise ValueError("times/alphabets do not match history length")
        rank = [{lbl: i for i, lbl in enumerate(alph)} for alph in alphabets]
        try:
            items.sort(key=lambda it: tuple(rank[k][lbl] for k, lbl in enumerate(it[0])))
        except KeyError as exc:
            raise ValueError(f"label {exc} missing from alphabets") from None
        amps = np.array([a for _, a in items], dtype=np.complex128)
        return cls(times, alphabets, tuple(h for h, _ in items), np.abs(amps) ** 2, amps)


def _final_bras(s: Schedule) -> NDArray[np.complex128] | None:
    if not s.has_scalar_amplitudes():
        return None
    final = s.events[-1]
    return np.array([final.bra_vector(lbl) for lbl in final.labels])


def build_history_vector(s: Schedule) -> HistoryVector:
    """Enumerate all histories with |chain state| above the pruning threshold.

    Norms never grow along a chain, so a branch is dropped as soon as its
    partial chain state falls below the threshold.
    """
    states = s.initial_state[None, :]
    codes = np.zeros((1, 0), dtype=np.int64)
    for ev, u in zip(s.events, s.evolutions):
        evolved = states @ u.T
        projs = np.stack([p for _, p in ev.outcomes])
        # (history, outcome, dim), outcome-minor so lexicographic order is kept
        branched = np.einsum("oij,hj->hoi", projs, evolved)
        k, n_out = branched.shape[:2]
        branched = branched.reshape(k * n_out, -1)
        new_codes = np.concatenate([np.repeat(codes, n_out, axis=0), np.tile(np.arange(n_out), k)[:, None]], axis=1)
        alive = np.linalg.norm(branched, axis=1) > PRUNE_TOL
        states, codes = branched[alive], new_codes[alive]

    probs = np.sum(np.abs(states) ** 2, axis=1).real
    total = float(np.sum(probs))
    if abs(total - 1.0) > NORM_TOL:
        raise NumericalInvariantError(f"history probabilities sum to {total:.12f}; projector family is invalid")

    alphabets = s.alphabets
    histories = tuple(tuple(alphabets[t][c] for t, c in enumerate(row)) for row in codes.tolist())
    bras = _final_bras(s)
    amps = None
    if bras is not None:
        amps = np.einsum("hi,hi->h", bras[codes[:, -1]].conj(), states)
    return HistoryVector(s.times, alphabets, histories, probs, amps, states, s)


def chain_state(s: Schedule, alpha: Sequence[str]) -> StateVector:
    alpha = s.validate_index(alpha)
    v = s.initial_state.copy()
    for a, ev, u in zip(alpha, s.events, s.evolutions):
        v = ev.projector(a) @ (u @ v)
    return v


def chain_operator(s: Schedule, alpha: Sequence[str]) -> ComplexMatrix:
    """P_{a_n} U_n ... P_{a_1} U_1 P_psi as an explicit matrix product."""
    alpha = s.validate_index(alpha)
    c = outer(s.initial_state)
    for a, ev, u in zip(alpha, s.events, s.evolutions):
        c = ev.projector(a) @ u @ c
    return c


def amplitude(s: Schedule, alpha: Sequence[str]) -> complex:
    """<a_n| U_n P_{a_{n-1}} ... P_{a_1} U_1 |psi> for a rank-1 final outcome."""
    alpha = s.validate_index(alpha)
    final = s.events[-1]
    if final.rank(alpha[-1]) != 1:
        raise ValueError(f"final outcome {alpha[-1]!r} has rank > 1; no scalar amplitude")
    v = s.initial_state.copy()
    for k, (a, ev, u) in enumerate(zip(alpha, s.events, s.evolutions)):
        v = u @ v
        if k < len(alpha) - 1:
            v = ev.projector(a) @ v
    return complex(np.vdot(final.bra_vector(alpha[-1]), v))


def probability(hv: HistoryVector, alpha: Sequence[str]) -> float:
    alpha = tuple(str(a) for a in alpha)
    if len(alpha) != len(hv.times):
        raise InputError(f"history {alpha} has {len(alpha)} outcomes, vector has {len(hv.times)} times")
    i = hv.index(alpha)
    return 0.0 if i is None else float(hv.probabilities[i])


def decoherence_functional(s: Schedule, alpha: Sequence[str], beta: Sequence[str]) -> complex:
    """Tr(C_alpha C_beta^dagger)."""
    ca = chain_operator(s, alpha)
    cb = chain_operator(s, beta)
    return complex(np.trace(ca @ cb.conj().T))


def decoherence_matrix(hv: HistoryVector) -> NDArray[np.complex128]:
    """All pairwise functionals over the retained histories.

    With P_psi on the right of every chain operator,
    Tr(C_a C_b^dagger) = <C_b psi | C_a psi>.
    """
    if hv.chain_states is None:
        raise ValueError("history vector carries no chain states")
    v = hv.chain_states
    return v @ v.conj().T


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    violations: tuple[tuple[HistoryIndex, HistoryIndex, float, float], ...]
    max_real_offdiagonal: float
    max_abs_offdiagonal: float
    tol: float


def is_consistent_set(s: Schedule, hv: HistoryVector | None = None) -> ConsistencyReport:
    """Weak decoherence test: Re Tr(C_a C_b^dagger) = 0 for all a != b.

    ``violations`` lists ``(a, b, real part, modulus)`` for each offending
    pair with a before b.
    """
    hv = build_history_vector(s) if hv is None else hv
    tol = structural_tol()
    d = decoherence_matrix(hv)
    n = d.shape[0]
    iu = np.triu_indices(n, 1)
    signed = d.real[iu]
    re = np.abs(signed)
    ab = np.abs(d[iu])
    bad = np.flatnonzero(re > tol)
    violations = tuple(
        (hv.histories[iu[0][k]], hv.histories[iu[1][k]], float(signed[k]), float(ab[k])) for k in bad
    )
    return ConsistencyReport(
        consistent=not violations,
        violations=violations,
        max_real_offdiagonal=float(re.max(initial=0.0)),
        max_abs_offdiagonal=float(ab.max(initial=0.0)),
        tol=tol,
    )


@dataclass(frozen=True)
class MarginalRow:
    history: HistoryIndex
    summed: float
    direct: float

    @property
    def discrepancy(self) -> float:
        return abs(self.summed - self.direct)


@dataclass(frozen=True)
class MarginalReport:
    """Sum-rule comparison of a schedule against reduced schedules.

    ``last_time`` sums the full probabilities over the last ``drop_last``
    outcomes and compares with the truncated schedule. ``intermediate`` maps
    each non-final time label to the rows obtained by summing over that
    outcome and comparing with the schedule in which it is not measured.
    """

    drop_last: int
    last_time: tuple[MarginalRow, ...]
    intermediate: dict[int, tuple[MarginalRow, ...]]
    tol: float

    @property
    def last_time_max(self) -> float:
        return max((r.discrepancy for r in self.last_time), default=0.0)

    def intermediate_max(self, time_label: int) -> float:
        return max((r.discrepancy for r in self.intermediate[time_label]), default=0.0)

    @property
    def ok(self) -> bool:
        return self.last_time_max <= self.tol


def _compare(hv_full: HistoryVector, keep_pos: Sequence[int], hv_red: HistoryVector) -> tuple[MarginalRow, ...]:
    summed: dict[HistoryIndex, float] = {}
    for h, p in zip(hv_full.histories, hv_full.probabilities):
        key = tuple(h[k] for k in keep_pos)
        summed[key] = summed.get(key, 0.0) + float(p)
    direct = {h: float(p) for h, p in zip(hv_red.histories, hv_red.probabilities)}
    keys = list(hv_red.histories) + [k for k in summed if k not in direct]
    return tuple(MarginalRow(k, summed.get(k, 0.0), direct.get(k, 0.0)) for k in keys)


def marginal_check(s: Schedule, drop_last: int = 1) -> MarginalReport:
    n = s.n_events
    if not 1 <= drop_last < n:
        raise InputError(f"drop_last must be in [1, {n - 1}], got {drop_last}")
    hv = build_history_vector(s)
    m = n - drop_last
    last = _compare(hv, range(m), build_history_vector(s.truncated(m)))
    inter = {}
    for k in range(n - 1):
        keep = [j for j in range(n) if j != k]
        inter[s.events[k].time_label] = _compare(hv, keep, build_history_vector(s.without_event(k)))
    return MarginalReport(drop_last, last, inter, structural_tol())
