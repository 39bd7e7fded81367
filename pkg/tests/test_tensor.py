import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histent import _kernels
from histent.errors import NumericalInvariantError
from histent.tensor import (
    SpaceFactorization,
    hermitian_eigenvalues,
    hermitian_eigh,
    is_hermitian,
    is_projector,
    is_unitary,
    kron,
    outer,
    partial_trace,
    von_neumann_entropy,
)

from conftest import random_density, random_hermitian, random_unitary

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]])
Z = np.array([[1, 0], [0, -1]])
I2 = np.eye(2)
BELL = np.array([1, 0, 0, 1]) / math.sqrt(2)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def kron_loops(a, b):
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    out = np.zeros((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), complex)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(b.shape[0]):
                for l in range(b.shape[1]):
                    out[i * b.shape[0] + k, j * b.shape[1] + l] = a[i, j] * b[k, l]
    return out


def partial_trace_loops_3(m, dims):
    """Keep factors 0 and 2 of a three-factor operator by explicit index sums."""
    d0, d1, d2 = dims
    out = np.zeros((d0 * d2, d0 * d2), complex)
    for i0 in range(d0):
        for i2 in range(d2):
            for j0 in range(d0):
                for j2 in range(d2):
                    for k in range(d1):
                        row = (i0 * d1 + k) * d2 + i2
                        col = (j0 * d1 + k) * d2 + j2
                        out[i0 * d2 + i2, j0 * d2 + j2] += m[row, col]
    return out


def det_gauss(a):
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    det = 1.0 + 0j
    for c in range(n):
        p = c + int(np.argmax(np.abs(a[c:, c])))
        if a[p, c] == 0:
            return 0j
        if p != c:
            a[[c, p]] = a[[p, c]]
            det = -det
        det *= a[c, c]
        for r in range(c + 1, n):
            a[r, c:] -= a[r, c] / a[c, c] * a[c, c:]
    return det


def eigenvalues_by_bisection(m, points=4000):
    """Roots of det(m - x I), located by sign changes on a grid and bisection."""
    n = m.shape[0]
    bound = max(np.sum(np.abs(m), axis=1)) + 1.0
    f = lambda x: det_gauss(m - x * np.eye(n)).real
    grid = np.linspace(-bound, bound, points)
    vals = [f(x) for x in grid]
    roots = []
    for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if flo == 0:
            roots.append(lo)
            continue
        if np.sign(flo) == np.sign(fhi):
            continue
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return np.sort(roots)[::-1]


BACKENDS = [_kernels.jacobi_eigh_numpy]
if _kernels.HAVE_NUMBA:
    BACKENDS.append(_kernels.jacobi_eigh_numba)


class TestKron:
    def test_identity(self):
        np.testing.assert_array_equal(kron(I2, I2), np.eye(4))

    def test_hadamard_on_first_qubit(self):
        out = kron(H, I2) @ np.array([1, 0, 0, 0])
        np.testing.assert_allclose(out, np.array([1, 0, 1, 0]) / math.sqrt(2), atol=1e-15)
        assert out[2] == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_matches_loop_definition(self):
        np.testing.assert_array_equal(kron(X, Z), kron_loops(X, Z))

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_associative_and_bilinear(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3)) for _ in range(3))
        lam = complex(rng.normal(), rng.normal())
        np.testing.assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12)
        np.testing.assert_allclose(kron(a + lam * b, c), kron(a, c) + lam * kron(b, c), atol=1e-12)
        np.testing.assert_allclose(kron(a, b + lam * c), kron(a, b) + lam * kron(a, c), atol=1e-12)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_trace_multiplies(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert abs(np.trace(kron(a, b)) - np.trace(a) * np.trace(b)) < 1e-10


class TestPartialTrace:
    def test_bell_reduction(self):
        out = partial_trace(outer(BELL), (2, 2), [0])
        np.testing.assert_allclose(out, I2 / 2, atol=1e-15)

    def test_product_state(self, rng):
        ra, rb = random_density(rng, 2), random_density(rng, 3)
        np.testing.assert_allclose(partial_trace(kron(ra, rb), (2, 3), [0]), ra, atol=1e-14)
        np.testing.assert_allclose(partial_trace(kron(ra, rb), (2, 3), [1]), rb, atol=1e-14)

    @pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2), (3, 2, 2)])
    def test_matches_loop_oracle(self, rng, dims):
        m = random_hermitian(rng, math.prod(dims))
        np.testing.assert_allclose(partial_trace(m, dims, [0, 2]), partial_trace_loops_3(m, dims), atol=1e-13)

    @pytest.mark.parametrize("impl", [_kernels.reduce_by_keys_numpy, _kernels.reduce_by_keys_numba])
    def test_backends_agree(self, rng, impl):
        if impl is _kernels.reduce_by_keys_numba and not _kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")
        dims = (2, 3, 2)
        m = random_hermitian(rng, 12)
        from histent.tensor import _split_indices

        kept, traced, nk = _split_indices(dims, [0, 2])
        np.testing.assert_allclose(impl(m, kept, traced, nk), partial_trace_loops_3(m, dims), atol=1e-13)

    def test_errors(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(4), (2, 3), [0])
        with pytest.raises(ValueError):
            partial_trace(np.eye(4), (2, 2), [])
        with pytest.raises(ValueError):
            partial_trace(np.ones((4, 2)), (2, 2), [0])

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_complementary_traces_preserve_trace(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 12)
        dims = (2, 3, 2)
        for keep in ([0], [1, 2], [0, 2], [1]):
            assert abs(np.trace(partial_trace(rho, dims, keep)) - np.trace(rho)) < 1e-10

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_disjoint_traces_commute(self, seed):
        rng = np.random.default_rng(seed)
        m = random_hermitian(rng, 12)
        dims = (3, 2, 2)
        first1 = partial_trace(partial_trace(m, dims, [0, 2]), (3, 2), [0])
        first2 = partial_trace(partial_trace(m, dims, [0, 1]), (3, 2), [0])
        once = partial_trace(m, dims, [0])
        np.testing.assert_allclose(first1, once, atol=1e-12)
        np.testing.assert_allclose(first2, once, atol=1e-12)


class TestEigen:
    def test_diagonal(self):
        np.testing.assert_allclose(hermitian_eigenvalues(np.diag([0.5, 0.5])), [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("eig", BACKENDS)
    def test_matches_determinant_bisection(self, eig):
        rng = np.random.default_rng(8)
        m = random_hermitian(rng, 8)
        w, v = eig(m)
        np.testing.assert_allclose(w, eigenvalues_by_bisection(m), atol=1e-9)
        assert abs(w.sum() - np.trace(m).real) < 1e-9
        for k in range(8):
            assert np.linalg.norm(m @ v[:, k] - w[k] * v[:, k]) <= 1e-9

    def test_descending(self, rng):
        w = hermitian_eigenvalues(random_hermitian(rng, 6))
        assert np.all(np.diff(w) <= 0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_eigenvalues(np.array([[0, 1], [0, 0]]))

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 5)
        u = random_unitary(rng, 5)
        np.testing.assert_allclose(hermitian_eigenvalues(u @ rho @ u.conj().T), hermitian_eigenvalues(rho), atol=1e-8)

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 33])
    def test_backends_agree(self, rng, n):
        m = random_hermitian(rng, n)
        ws = [b(m)[0] for b in BACKENDS]
        for w in ws[1:]:
            np.testing.assert_allclose(w, ws[0], atol=1e-10)

    def test_deterministic(self, rng):
        m = random_hermitian(rng, 12)
        w1, v1 = hermitian_eigh(m)
        w2, v2 = hermitian_eigh(m)
        assert w1.tobytes() == w2.tobytes() and v1.tobytes() == v2.tobytes()

    def test_degenerate_spectrum(self, rng):
        u = random_unitary(rng, 6)
        m = u @ np.diag([2, 2, 2, -1, -1, 0.5]) @ u.conj().T
        for eig in BACKENDS:
            w, v = eig(m)
            np.testing.assert_allclose(w, [2, 2, 2, 0.5, -1, -1], atol=1e-10)
            assert np.max(np.abs(m @ v - v * w)) < 1e-9


class TestEntropy:
    def test_pure(self):
        psi = np.array([1, 1j, 0]) / math.sqrt(2)
        assert abs(von_neumann_entropy(outer(psi))) < 1e-12

    def test_two_halves(self):
        assert von_neumann_entropy(np.diag([0.5, 0.5])) == pytest.approx(1.0, abs=1e-12)

    def test_teleportation_spectrum_at_half(self):
        assert von_neumann_entropy(np.diag([0.25] * 4)) == pytest.approx(2.0, abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(NumericalInvariantError):
            von_neumann_entropy(np.diag([1.2, -0.2]))

    def test_rejects_bad_trace(self):
        with pytest.raises(NumericalInvariantError):
            von_neumann_entropy(np.diag([0.5, 0.6]))

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_additive_on_products(self, seed):
        rng = np.random.default_rng(seed)
        r, s = random_density(rng, 3), random_density(rng, 2)
        assert abs(von_neumann_entropy(kron(r, s)) - von_neumann_entropy(r) - von_neumann_entropy(s)) < 1e-8


class TestPredicates:
    def test_unitary(self):
        assert is_unitary(H) and not is_unitary(2 * H)

    def test_hermitian(self):
        assert is_hermitian(Z) and not is_hermitian(np.array([[0, 1j], [1j, 0]]))

    def test_projector(self):
        assert is_projector(np.diag([1, 0])) and not is_projector(X)

    def test_tolerance_env(self, monkeypatch):
        near = np.diag([1.0, 1e-7])
        assert not is_projector(near)
        monkeypatch.setenv("HISTENT_TOL", "1e-6")
        assert is_projector(near)

    def test_factorization(self):
        assert SpaceFactorization((2, 3)).dim == 6
        with pytest.raises(ValueError):
            SpaceFactorization((2, 0))


def test_backend_flag():
    import os
    import subprocess
    import sys

    env = dict(os.environ, HISTENT_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import histent; print(histent.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"
