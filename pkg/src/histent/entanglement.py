"""History density matrices, space/time reductions and entanglement entropies.

Densities live on the pruned history basis: only outcome sequences that occur
with nonzero amplitude are basis elements, ordered lexicographically by the
declared outcome order at each time. Reductions trace out outcome labels,
either at a set of times (time reduction) or of a subsystem at every time
(space reduction); both are key-grouped partial traces on that basis.

Outcome labels of a composite system are split into per-factor parts
character by character (``"101"`` -> ``"1", "0", "1"``), or on ``":"`` when
a label contains one (``"up:0"`` -> ``"up", "0"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from histent import _kernels
from histent.errors import InputError, NumericalInvariantError
from histent.history import (
    PRUNE_TOL,
    HistoryIndex,
    HistoryVector,
    MeasurementEvent,
    Schedule,
    build_history_vector,
)
from histent.tensor import (
    HERMITIAN_TOL,
    TRACE_TOL,
    ComplexMatrix,
    entropy_from_eigenvalues,
    hermitian_eigenvalues,
    is_hermitian,
    partial_trace,
    structural_tol,
)

Side = Literal["A", "B"]
SEPARABILITY_RTOL = 1e-10


@dataclass(frozen=True)
class SpacePartition:
    """Bipartition of the tensor factors into A and B."""

    factor_dims: tuple[int, ...]
    a: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        a = tuple(sorted(set(int(i) for i in self.a)))
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "a", a)
        if not a or len(a) == len(dims) or a[0] < 0 or a[-1] >= len(dims):
            raise InputError(f"A = {self.a} is not a proper subset of factors 0..{len(dims) - 1}")

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.factor_dims)) if i not in self.a)

    @property
    def dim(self) -> int:
        return math.prod(self.factor_dims)

    def side(self, keep: Side) -> tuple[int, ...]:
        if keep == "A":
            return self.a
        if keep == "B":
            return self.b
        raise InputError(f"side must be 'A' or 'B', got {keep!r}")

    def other(self, keep: Side) -> Side:
        return "B" if keep == "A" else "A"

    @classmethod
    def last_qubit(cls, n_qubits: int) -> SpacePartition:
        """A = qubits 0..n-2, B = the last qubit."""
        return cls((2,) * n_qubits, tuple(range(n_qubits - 1)))


def split_label(label: str, n_factors: int) -> tuple[str, ...]:
    parts = tuple(label.split(":")) if ":" in label else tuple(label)
    if len(parts) != n_factors:
        raise InputError(f"outcome label {label!r} does not factorize into {n_factors} parts")
    return parts


def _join(parts: Sequence[str], template: str) -> str:
    return ":".join(parts) if ":" in template else "".join(parts)


def _label_part(label: str, part: SpacePartition, keep: Side) -> str:
    pieces = split_label(label, len(part.factor_dims))
    return _join([pieces[i] for i in part.side(keep)], label)


@dataclass(frozen=True, eq=False)
class HistoryDensity:
    """Density operator on a pruned history basis.

    ``basis[i]`` is the outcome sequence (one label per entry of ``times``)
    of row/column ``i``. ``events`` is kept when the density comes from a
    schedule so that space reductions can verify product measurements.
    ``factor``, when known, satisfies ``matrix == factor @ factor^H``; the
    spectrum is then taken from the smaller of the two Gram matrices.
    """

    times: tuple[int, ...]
    alphabets: tuple[tuple[str, ...], ...]
    basis: tuple[HistoryIndex, ...]
    matrix: ComplexMatrix
    events: tuple[MeasurementEvent, ...] | None = None
    factor: NDArray[np.complex128] | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", m)
        n = len(self.basis)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match basis of size {n}")
        if len(set(self.basis)) != n:
            raise ValueError("repeated basis elements")
        if not is_hermitian(m, HERMITIAN_TOL):
            raise NumericalInvariantError("history density is not Hermitian")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise NumericalInvariantError(f"history density has trace {tr:.12f}")
        object.__setattr__(self, "_pos", {h: i for i, h in enumerate(self.basis)})

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, alpha: Sequence[str]) -> int | None:
        return self._pos.get(tuple(alpha))

    def eigenvalues(self) -> NDArray[np.float64]:
        """Descending spectrum, zero-padded to ``dim`` when taken from the factor."""
        f = self.factor
        if f is None or f.shape[1] >= self.dim:
            return hermitian_eigenvalues(self.matrix)
        w = hermitian_eigenvalues(f.conj().T @ f) if f.shape[1] else np.zeros(0)
        return np.concatenate([w, np.zeros(self.dim - w.size)])

    def check_positive(self) -> None:
        w = self.eigenvalues()
        if w.size and w[-1] < -HERMITIAN_TOL:
            raise NumericalInvariantError(f"history density has negative eigenvalue {w[-1]:.3e}")

    def entropy(self) -> float:
        w = self.eigenvalues()
        if w.size and w[-1] < -HERMITIAN_TOL:
            raise NumericalInvariantError(f"history density has negative eigenvalue {w[-1]:.3e}")
        tr = float(np.sum(w))
        if abs(tr - 1.0) > TRACE_TOL:
            raise NumericalInvariantError(f"history density has trace {tr:.12f}")
        return entropy_from_eigenvalues(w)

    def entry(self, alpha: Sequence[str], beta: Sequence[str]) -> complex:
        i, j = self.index(alpha), self.index(beta)
        if i is None or j is None:
            return 0j
        return complex(self.matrix[i, j])

    def as_dict(self) -> dict[tuple[HistoryIndex, HistoryIndex], complex]:
        """Nonzero entries keyed by (row history, column history)."""
        out = {}
        for i, j in zip(*np.nonzero(np.abs(self.matrix) > PRUNE_TOL)):
            out[(self.basis[i], self.basis[j])] = complex(self.matrix[i, j])
        return out


def _sort_basis(keys: Iterable[HistoryIndex], alphabets: Sequence[Sequence[str]]) -> list[HistoryIndex]:
    rank = [{lbl: i for i, lbl in enumerate(a)} for a in alphabets]
    return sorted(set(keys), key=lambda h: tuple(rank[t][lbl] for t, lbl in enumerate(h)))


def _reduce(
    hd: HistoryDensity,
    split: Callable[[HistoryIndex], tuple[HistoryIndex, HistoryIndex]],
    times: tuple[int, ...],
    alphabets: tuple[tuple[str, ...], ...],
    events: tuple[MeasurementEvent, ...] | None,
) -> HistoryDensity:
    pairs = [split(h) for h in hd.basis]
    basis = _sort_basis((k for k, _ in pairs), alphabets)
    kept_pos = {h: i for i, h in enumerate(basis)}
    traced_pos: dict[HistoryIndex, int] = {}
    kept = np.array([kept_pos[k] for k, _ in pairs], dtype=np.int64)
    traced = np.array([traced_pos.setdefault(t, len(traced_pos)) for _, t in pairs], dtype=np.int64)
    m = _kernels.reduce_by_keys(hd.matrix, kept, traced, len(basis))
    factor = None
    if hd.factor is not None:
        r = hd.factor.shape[1]
        factor = np.zeros((len(basis), r * len(traced_pos)), dtype=np.complex128)
        for i in range(len(pairs)):
            factor[kept[i], traced[i] * r : (traced[i] + 1) * r] = hd.factor[i]
    return HistoryDensity(times, alphabets, tuple(basis), m, events, factor)


def density_from_history(hv: HistoryVector) -> HistoryDensity:
    """Pure history density |Psi><Psi| on the vector's retained histories."""
    if hv.amplitudes is None:
        raise ValueError("history vector has no scalar amplitudes; density needs rank-1 final outcomes")
    a = hv.amplitudes
    events = hv.schedule.events if hv.schedule is not None else None
    return HistoryDensity(hv.times, hv.alphabets, hv.histories, np.outer(a, a.conj()), events, a[:, None].copy())


def mix(densities: Sequence[tuple[float, HistoryDensity]]) -> HistoryDensity:
    """Convex combination on the union of the bases."""
    if not densities:
        raise ValueError("nothing to mix")
    weights = np.array([w for w, _ in densities], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must be non-negative and sum to 1, got {weights.tolist()}")
    times = densities[0][1].times
    if any(d.times != times for _, d in densities):
        raise ValueError("densities are defined at different times")
    alphabets = []
    for t in range(len(times)):
        seen: dict[str, None] = {}
        for _, d in densities:
            seen.update(dict.fromkeys(d.alphabets[t]))
        alphabets.append(tuple(seen))
    alphabets = tuple(alphabets)
    basis = _sort_basis((h for _, d in densities for h in d.basis), alphabets)
    pos = {h: i for i, h in enumerate(basis)}
    m = np.zeros((len(basis), len(basis)), dtype=np.complex128)
    blocks = []
    for w, d in densities:
        idx = np.array([pos[h] for h in d.basis])
        m[np.ix_(idx, idx)] += w * d.matrix
        if d.factor is not None:
            f = np.zeros((len(basis), d.factor.shape[1]), dtype=np.complex128)
            f[idx] = math.sqrt(w) * d.factor
            blocks.append(f)
    factor = np.concatenate(blocks, axis=1) if len(blocks) == len(densities) else None
    events = densities[0][1].events if all(d.events is densities[0][1].events for _, d in densities) else None
    return HistoryDensity(times, alphabets, tuple(basis), m, events, factor)


def _permute_factors(m: ComplexMatrix, dims: Sequence[int], order: Sequence[int]) -> ComplexMatrix:
    """Reorder the tensor factors of an operator: new factor i is old factor order[i]."""
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    t = t.transpose(list(order) + [n + o for o in order])
    d = math.prod(dims)
    return t.reshape(d, d)


def _check_product_events(events: Sequence[MeasurementEvent], part: SpacePartition) -> None:
    tol = structural_tol()
    dims = part.factor_dims
    order = part.a + part.b
    da = math.prod(dims[i] for i in part.a)
    db = math.prod(dims[i] for i in part.b)
    for ev in events:
        if ev.dim != part.dim:
            raise InputError(f"t{ev.time_label}: dimension {ev.dim} does not match partition {dims}")
        seen_a: dict[str, np.ndarray] = {}
        seen_b: dict[str, np.ndarray] = {}
        for lbl, p in ev.outcomes:
            la = _label_part(lbl, part, "A")
            lb = _label_part(lbl, part, "B")
            q = _permute_factors(p, dims, order)
            pa = partial_trace(q, (da, db), [0])
            pb = partial_trace(q, (da, db), [1])
            # for P = P_A x P_B: Tr_B P = r_B P_A, Tr_A P = r_A P_B, Tr P = r_A r_B
            tr = np.trace(p).real
            if np.max(np.abs(np.kron(pa, pb) / tr - q)) > tol * max(1.0, tr):
                raise InputError(f"t{ev.time_label}: outcome {lbl!r} is not a product projector across the A|B cut")
            ka, kb = pa / tr, pb / tr
            for seen, key, val in ((seen_a, la, ka), (seen_b, lb, kb)):
                if key in seen and np.max(np.abs(seen[key] - val)) > tol:
                    raise InputError(f"t{ev.time_label}: label part {key!r} names different local projectors")
                seen.setdefault(key, val)


def space_reduce(hd: HistoryDensity, part: SpacePartition, keep: Side = "A") -> HistoryDensity:
    """Trace out the other subsystem's outcome labels at every time."""
    part.side(keep)
    n_f = len(part.factor_dims)
    for alph in hd.alphabets:
        for lbl in alph:
            split_label(lbl, n_f)
    if hd.events is not None:
        _check_product_events(hd.events, part)
    other = part.other(keep)

    def split(h):
        return tuple(_label_part(x, part, keep) for x in h), tuple(_label_part(x, part, other) for x in h)

    alphabets = tuple(tuple(dict.fromkeys(_label_part(x, part, keep) for x in alph)) for alph in hd.alphabets)
    return _reduce(hd, split, hd.times, alphabets, None)


def _time_positions(hd: HistoryDensity, keep_times: Iterable[int]) -> list[int]:
    keep = set(int(t) for t in keep_times)
    unknown = keep - set(hd.times)
    if unknown:
        raise InputError(f"times {sorted(unknown)} are not among {list(hd.times)}")
    if not keep:
        raise InputError("keep_times is empty")
    if len(keep) == len(hd.times):
        raise InputError("keep_times covers every time; nothing to trace out")
    return [i for i, t in enumerate(hd.times) if t in keep]


def time_reduce(hd: HistoryDensity, keep_times: Iterable[int]) -> HistoryDensity:
    """Trace out the outcome labels at all times not in ``keep_times``.

    Times are the time labels of the density (1-based for schedules built
    by this package).
    """
    pos = _time_positions(hd, keep_times)
    rest = [i for i in range(len(hd.times)) if i not in pos]

    def split(h):
        return tuple(h[i] for i in pos), tuple(h[i] for i in rest)

    events = None if hd.events is None else tuple(hd.events[i] for i in pos)
    return _reduce(
        hd,
        split,
        tuple(hd.times[i] for i in pos),
        tuple(hd.alphabets[i] for i in pos),
        events,
    )


def sequence_probability(hd: HistoryDensity, alpha: Sequence[str]) -> float:
    """Tr(rho P_alpha) for an outcome sequence at the density's times."""
    alpha = tuple(str(a) for a in alpha)
    if len(alpha) != len(hd.times):
        raise InputError(f"sequence {alpha} has {len(alpha)} outcomes, density has times {hd.times}")
    for a, alph, t in zip(alpha, hd.alphabets, hd.times):
        if a not in alph:
            raise InputError(f"t{t}: unknown outcome label {a!r}")
    i = hd.index(alpha)
    return 0.0 if i is None else float(hd.matrix[i, i].real)


def temporal_entanglement_entropy(hd: HistoryDensity, keep_times: Iterable[int]) -> float:
    return time_reduce(hd, keep_times).entropy()


def space_entanglement_entropy(hd: HistoryDensity, part: SpacePartition, keep: Side = "A") -> float:
    return space_reduce(hd, part, keep).entropy()


# ---------------------------------------------------------------------------
# products and separability
# ---------------------------------------------------------------------------


def time_product(first: HistoryVector, second: HistoryVector) -> HistoryVector:
    """Merge histories living at disjoint times into one, ordered by time label."""
    if first.amplitudes is None or second.amplitudes is None:
        raise ValueError("time product needs scalar amplitudes")
    if set(first.times) & set(second.times):
        raise ValueError(f"times overlap: {first.times} and {second.times}")
    times = tuple(sorted(first.times + second.times))
    src = {t: (0, i) for i, t in enumerate(first.times)}
    src.update({t: (1, i) for i, t in enumerate(second.times)})
    alphabets = tuple((first, second)[src[t][0]].alphabets[src[t][1]] for t in times)
    amps = {}
    for h1, a1 in zip(first.histories, first.amplitudes):
        for h2, a2 in zip(second.histories, second.amplitudes):
            parts = (h1, h2)
            amps[tuple(parts[src[t][0]][src[t][1]] for t in times)] = a1 * a2
    return HistoryVector.from_amplitudes(amps, times, alphabets)


def space_product(a: HistoryVector, b: HistoryVector) -> HistoryVector:
    """Product history state: labels concatenated per time, amplitudes multiplied."""
    if a.amplitudes is None or b.amplitudes is None:
        raise ValueError("space product needs scalar amplitudes")
    if a.times != b.times:
        raise ValueError(f"space product needs equal times, got {a.times} and {b.times}")
    alphabets = tuple(tuple(x + y for x in ax for y in bx) for ax, bx in zip(a.alphabets, b.alphabets))
    amps = {}
    for ha, aa in zip(a.histories, a.amplitudes):
        for hb, ab in zip(b.histories, b.amplitudes):
            amps[tuple(x + y for x, y in zip(ha, hb))] = aa * ab
    return HistoryVector.from_amplitudes(amps, a.times, alphabets)


@dataclass(frozen=True, eq=False)
class SeparabilityResult:
    """Outcome of a rank-1 test on an amplitude matrix.

    ``factors`` holds the two normalized factor vectors when separable, with
    the first nonzero amplitude of the first factor real and positive.
    """

    separable: bool
    singular_values: NDArray[np.float64]
    factors: tuple[HistoryVector, HistoryVector] | None

    @property
    def ratio(self) -> float:
        s = self.singular_values
        return float(s[1] / s[0]) if s.size > 1 and s[0] > 0 else 0.0


def _rank_one(
    rows: list[HistoryIndex],
    cols: list[HistoryIndex],
    m: np.ndarray,
    row_meta: tuple,
    col_meta: tuple,
) -> SeparabilityResult:
    s_vals = np.linalg.svd(m, compute_uv=False)
    separable = s_vals.size < 2 or s_vals[1] <= SEPARABILITY_RTOL * s_vals[0]
    if not separable:
        return SeparabilityResult(False, s_vals, None)
    u, s, vh = np.linalg.svd(m)
    f1 = u[:, 0]
    f2 = s[0] * vh[0, :]
    nz = np.flatnonzero(np.abs(f1) > 1e-12 * np.max(np.abs(f1)))[0]
    phase = f1[nz] / abs(f1[nz])
    f1, f2 = f1 / phase, f2 * phase
    v1 = HistoryVector.from_amplitudes(dict(zip(rows, f1)), *row_meta)
    v2 = HistoryVector.from_amplitudes(dict(zip(cols, f2)), *col_meta)
    return SeparabilityResult(True, s_vals, (v1, v2))


def _amplitude_matrix(hv: HistoryVector, split: Callable[[HistoryIndex], tuple[HistoryIndex, HistoryIndex]], row_alph, col_alph):
    if hv.amplitudes is None:
        raise ValueError("separability test needs scalar amplitudes")
    pairs = [split(h) for h in hv.histories]
    rows = _sort_basis((r for r, _ in pairs), row_alph)
    cols = _sort_basis((c for _, c in pairs), col_alph)
    ri = {h: i for i, h in enumerate(rows)}
    ci = {h: i for i, h in enumerate(cols)}
    m = np.zeros((len(rows), len(cols)), dtype=np.complex128)
    for (r, c), a in zip(pairs, hv.amplitudes):
        m[ri[r], ci[c]] += a
    return rows, cols, m


def space_separability(hv: HistoryVector, part: SpacePartition) -> SeparabilityResult:
    """Rank-1 test of A(alpha, beta) with alpha the A-labels and beta the B-labels."""

    def split(h):
        return tuple(_label_part(x, part, "A") for x in h), tuple(_label_part(x, part, "B") for x in h)

    ra = tuple(tuple(dict.fromkeys(_label_part(x, part, "A") for x in alph)) for alph in hv.alphabets)
    rb = tuple(tuple(dict.fromkeys(_label_part(x, part, "B") for x in alph)) for alph in hv.alphabets)
    rows, cols, m = _amplitude_matrix(hv, split, ra, rb)
    return _rank_one(rows, cols, m, (hv.times, ra), (hv.times, rb))


def time_separability(hv: HistoryVector, split: tuple[Iterable[int], Iterable[int]]) -> SeparabilityResult:
    """Rank-1 test of A(alpha_J, alpha_K) for a bipartition (J, K) of the times."""
    tj = set(int(t) for t in split[0])
    tk = set(int(t) for t in split[1])
    if not tj or not tk or tj & tk or tj | tk != set(hv.times):
        raise InputError(f"{sorted(tj)} | {sorted(tk)} is not a bipartition of times {list(hv.times)}")
    pj = [i for i, t in enumerate(hv.times) if t in tj]
    pk = [i for i, t in enumerate(hv.times) if t in tk]

    def cut(h):
        return tuple(h[i] for i in pj), tuple(h[i] for i in pk)

    aj = tuple(hv.alphabets[i] for i in pj)
    ak = tuple(hv.alphabets[i] for i in pk)
    rows, cols, m = _amplitude_matrix(hv, cut, aj, ak)
    return _rank_one(
        rows,
        cols,
        m,
        (tuple(hv.times[i] for i in pj), aj),
        (tuple(hv.times[i] for i in pk), ak),
    )


# ---------------------------------------------------------------------------
# no-signaling
# ---------------------------------------------------------------------------


def is_factorized(u: ComplexMatrix, part: SpacePartition, tol: float = SEPARABILITY_RTOL) -> bool:
    """True when ``u`` = U_A x U_B across the partition (operator-Schmidt rank 1)."""
    dims = part.factor_dims
    q = _permute_factors(np.asarray(u, dtype=np.complex128), dims, part.a + part.b)
    da = math.prod(dims[i] for i in part.a)
    db = math.prod(dims[i] for i in part.b)
    r = q.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    s = np.linalg.svd(r, compute_uv=False)
    return s.size < 2 or s[1] <= tol * s[0]


def alice_only_schedule(s_joint: Schedule, part: SpacePartition) -> Schedule:
    """Same schedule with B's measuring devices switched off.

    Each event keeps only the A-part of its outcome labels; the projector of
    an A-outcome is the sum of the joint projectors sharing that A-label.
    """
    events = []
    for ev in s_joint.events:
        groups: dict[str, np.ndarray] = {}
        for lbl, p in ev.outcomes:
            key = _label_part(lbl, part, "A")
            groups[key] = groups.get(key, 0) + p
        events.append(MeasurementEvent(ev.time_label, tuple(groups.items())))
    return Schedule(s_joint.initial_state, tuple(events), s_joint.evolutions, s_joint.factorization)


@dataclass(frozen=True)
class NoSignalingReport:
    """Alice's sequence probabilities with and without Bob's measurements.

    Each row is ``(alpha, p_with_bob, p_alice_only)``, where ``p_with_bob``
    sums the joint probabilities over Bob's outcomes.
    """

    rows: tuple[tuple[HistoryIndex, float, float], ...]
    factorized: bool
    tol: float

    @property
    def max_discrepancy(self) -> float:
        return max((abs(a - b) for _, a, b in self.rows), default=0.0)

    @property
    def signaling(self) -> bool:
        return self.max_discrepancy > self.tol


def no_signaling_check(s_joint: Schedule, s_alice_only: Schedule | None, part: SpacePartition) -> NoSignalingReport:
    if s_alice_only is None:
        s_alice_only = alice_only_schedule(s_joint, part)
    tol = structural_tol()
    if s_joint.dim != part.dim or s_alice_only.dim != part.dim:
        raise InputError("schedule dimension does not match the partition")
    if s_joint.n_events != s_alice_only.n_events or s_joint.times != s_alice_only.times:
        raise InputError("schedule mismatch: different measurement times")
    if np.max(np.abs(s_joint.initial_state - s_alice_only.initial_state)) > tol:
        raise InputError("schedule mismatch: different initial states")
    for ev_j, ev_a, u_j, u_a in zip(s_joint.events, s_alice_only.events, s_joint.evolutions, s_alice_only.evolutions):
        where = f"t{ev_j.time_label}"
        if np.max(np.abs(u_j - u_a)) > tol:
            raise InputError(f"schedule mismatch: different evolutions before {where}")
        groups: dict[str, np.ndarray] = {}
        for lbl, p in ev_j.outcomes:
            key = _label_part(lbl, part, "A")
            groups[key] = groups.get(key, 0) + p
        if set(groups) != set(ev_a.labels):
            raise InputError(f"schedule mismatch: Alice outcomes at {where} are {ev_a.labels}, expected {sorted(groups)}")
        for key, p in groups.items():
            if np.max(np.abs(ev_a.projector(key) - p)) > tol:
                raise InputError(f"schedule mismatch: Alice projector {key!r} at {where} is not P_A x I")

    hv_joint = build_history_vector(s_joint)
    hv_alice = build_history_vector(s_alice_only)
    marg: dict[HistoryIndex, float] = {}
    for h, p in zip(hv_joint.histories, hv_joint.probabilities):
        key = tuple(_label_part(x, part, "A") for x in h)
        marg[key] = marg.get(key, 0.0) + float(p)
    direct = {h: float(p) for h, p in zip(hv_alice.histories, hv_alice.probabilities)}
    keys = _sort_basis(list(marg) + list(direct), hv_alice.alphabets)
    rows = tuple((k, marg.get(k, 0.0), direct.get(k, 0.0)) for k in keys)
    factorized = all(is_factorized(u, part) for u in s_joint.evolutions)
    report = NoSignalingReport(rows, factorized, tol)
    if factorized and report.signaling:
        raise NumericalInvariantError(
            f"factorized evolution but Alice's statistics differ by {report.max_discrepancy:.3e}"
        )
    return report
