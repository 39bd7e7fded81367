"""Hot numeric kernels.

Two implementations of each kernel live here: a numba ``@njit`` version with
explicit loops, and a pure-numpy version. ``HISTENT_NO_NUMBA=1`` (or a
missing numba install) selects the numpy path at import time. Both paths are
deterministic for a fixed input; they are not bitwise identical to each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("HISTENT_NO_NUMBA", "0").lower() not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# rotations on entries smaller than this are skipped outright
_TINY = 1e-300


class ConvergenceError(RuntimeError):
    pass


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# Jacobi eigensolver for complex Hermitian matrices
# ---------------------------------------------------------------------------


@_njit
def _jacobi_loops(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        if math.sqrt(2.0 * off) < tol:
            return a, v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= _TINY:
                    continue
                ec = np.conj(apq / mag)
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                g_pp = c + 0j
                g_pq = s + 0j
                g_qp = -s * ec
                g_qq = c * ec
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * g_pp + akq * g_qp
                    a[k, q] = akp * g_pq + akq * g_qq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = np.conj(g_pp) * apk + np.conj(g_qp) * aqk
                    a[q, k] = np.conj(g_pq) * apk + np.conj(g_qq) * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = vkp * g_pp + vkq * g_qp
                    v[k, q] = vkp * g_pq + vkq * g_qq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    return a, v, -1


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of the circle method: every (p, q) exactly once per sweep,
    each round made of disjoint pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p >= n or q >= n:
                continue
            ps.append(min(p, q))
            qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _jacobi_rounds(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    rounds = _round_robin(n)
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(2.0 * float(np.sum(np.abs(a[iu]) ** 2)))
        if off < tol:
            return a, v, sweep
        if sweep == max_sweeps:
            break
        for P, Q in rounds:
            if P.size == 0:
                continue
            apq = a[P, Q]
            mag = np.abs(apq)
            live = mag > _TINY
            safe = np.where(live, mag, 1.0)
            ec = np.where(live, np.conj(apq) / safe, 1.0)
            theta = (a[Q, Q].real - a[P, P].real) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            g_pp = c.astype(np.complex128)
            g_pq = s.astype(np.complex128)
            g_qp = -s * ec
            g_qq = c * ec
            col_p = a[:, P].copy()
            col_q = a[:, Q]
            a[:, P] = col_p * g_pp + col_q * g_qp
            a[:, Q] = col_p * g_pq + col_q * g_qq
            row_p = a[P, :].copy()
            row_q = a[Q, :]
            a[P, :] = np.conj(g_pp)[:, None] * row_p + np.conj(g_qp)[:, None] * row_q
            a[Q, :] = np.conj(g_pq)[:, None] * row_p + np.conj(g_qq)[:, None] * row_q
            vp = v[:, P].copy()
            vq = v[:, Q]
            v[:, P] = vp * g_pp + vq * g_qp
            v[:, Q] = vp * g_pq + vq * g_qq
            a[P[live], Q[live]] = 0.0
            a[Q[live], P[live]] = 0.0
        d = np.arange(n)
        a[d, d] = a[d, d].real
    return a, v, -1


def _prepare(m: np.ndarray) -> tuple[np.ndarray, float]:
    a = np.array(m, dtype=np.complex128, order="C", copy=True)
    # symmetrize so roundoff in the input cannot break Hermiticity mid-sweep
    a = 0.5 * (a + a.conj().T)
    scale = max(1.0, float(np.linalg.norm(a)))
    return a, JACOBI_TOL * scale


def _finish(a, v, sweeps):
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    w = np.real(np.diag(a)).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def jacobi_eigh_numba(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    a, tol = _prepare(m)
    return _finish(*_jacobi_loops(a, tol, JACOBI_MAX_SWEEPS))


def jacobi_eigh_numpy(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, tol = _prepare(m)
    return _finish(*_jacobi_rounds(a, tol, JACOBI_MAX_SWEEPS))


# ---------------------------------------------------------------------------
# Key-grouped partial trace
#
# Every basis element i carries a kept index kept[i] and a traced index
# traced[i]; the reduced matrix is out[kept[i], kept[j]] += m[i, j] over pairs
# with traced[i] == traced[j]. Dense partial traces and reductions of pruned
# history bases are both instances of this.
# ---------------------------------------------------------------------------


@_njit
def _reduce_loops(m, kept, traced, n_kept):
    n = m.shape[0]
    out = np.zeros((n_kept, n_kept), dtype=np.complex128)
    for i in range(n):
        ti = traced[i]
        ki = kept[i]
        for j in range(n):
            if traced[j] == ti:
                out[ki, kept[j]] += m[i, j]
    return out


def reduce_by_keys_numba(m, kept, traced, n_kept):
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    return _reduce_loops(
        np.ascontiguousarray(m, dtype=np.complex128),
        np.ascontiguousarray(kept, dtype=np.int64),
        np.ascontiguousarray(traced, dtype=np.int64),
        int(n_kept),
    )


def reduce_by_keys_numpy(m, kept, traced, n_kept):
    m = np.asarray(m, dtype=np.complex128)
    kept = np.asarray(kept, dtype=np.int64)
    traced = np.asarray(traced, dtype=np.int64)
    out = np.zeros((n_kept, n_kept), dtype=np.complex128)
    order = np.argsort(traced, kind="stable")
    bounds = np.flatnonzero(np.diff(traced[order])) + 1
    for idx in np.split(order, bounds):
        k = kept[idx]
        out[np.ix_(k, k)] += m[np.ix_(idx, idx)]
    return out


if USE_NUMBA:
    jacobi_eigh = jacobi_eigh_numba
    reduce_by_keys = reduce_by_keys_numba
else:
    jacobi_eigh = jacobi_eigh_numpy
    reduce_by_keys = reduce_by_keys_numpy


def warmup() -> None:
    """Trigger JIT compilation so later timings exclude it."""
    m = np.eye(2, dtype=np.complex128)
    jacobi_eigh(m)
    reduce_by_keys(m, np.array([0, 0]), np.array([0, 1]), 1)
