import numpy as np
import pytest

from histent.history import MeasurementEvent, Schedule


def gram_schmidt(m):
    """Orthonormalize the columns of ``m`` (classical Gram-Schmidt, twice)."""
    m = np.array(m, dtype=np.complex128)
    n = m.shape[1]
    q = np.zeros_like(m)
    for k in range(n):
        v = m[:, k].copy()
        for _ in range(2):
            for j in range(k):
                v -= np.vdot(q[:, j], v) * q[:, j]
        q[:, k] = v / np.linalg.norm(v)
    return q


def random_unitary(rng, d):
    return gram_schmidt(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_hermitian(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_event(rng, t, d, rank_one=True):
    """Complete orthogonal projector family from the columns of a random unitary."""
    u = random_unitary(rng, d)
    if rank_one or d < 2:
        groups = [[k] for k in range(d)]
    else:
        cut = int(rng.integers(1, d))
        groups = [list(range(cut)), list(range(cut, d))]
    outcomes = []
    for i, g in enumerate(groups):
        cols = u[:, g]
        outcomes.append((str(i), cols @ cols.conj().T))
    return MeasurementEvent(t, tuple(outcomes))


def random_schedule(rng, dim=None, n=None, rank_one=True):
    dim = int(rng.integers(2, 5)) if dim is None else dim
    n = int(rng.integers(1, 4)) if n is None else n
    events = tuple(random_event(rng, t + 1, dim, rank_one) for t in range(n))
    us = tuple(random_unitary(rng, dim) for _ in range(n))
    return Schedule(random_state(rng, dim), events, us)


def collapse_probability(s, alpha):
    """Step-by-step Born-rule simulation: evolve, project, renormalize."""
    state = s.initial_state.copy()
    p = 1.0
    for a, ev, u in zip(alpha, s.events, s.evolutions):
        state = u @ state
        projected = ev.projector(a) @ state
        q = float(np.vdot(projected, projected).real)
        p *= q
        if q == 0.0:
            return 0.0
        state = projected / np.sqrt(q)
    return p


def all_histories(s):
    import itertools

    return list(itertools.product(*s.alphabets))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
