"""Dense complex linear algebra on history-space operators.

Matrices are plain ``complex128`` numpy arrays, states are 1-D arrays.
Eigen-decomposition uses the package's own Jacobi kernels (see
:mod:`histent._kernels`); entropies are in bits.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from histent import _kernels
from histent.errors import NumericalInvariantError

ComplexMatrix = NDArray[np.complex128]
StateVector = NDArray[np.complex128]

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
EIGEN_FLOOR = 1e-12


def structural_tol() -> float:
    """Tolerance for unitarity / Hermiticity / projector checks.

    Overridable through the ``HISTENT_TOL`` environment variable.
    """
    raw = os.environ.get("HISTENT_TOL")
    if raw is None or raw.strip() == "":
        return 1e-10
    try:
        tol = float(raw)
    except ValueError as exc:
        raise ValueError(f"HISTENT_TOL is not a float literal: {raw!r}") from exc
    if not tol > 0:
        raise ValueError(f"HISTENT_TOL must be positive, got {raw!r}")
    return tol


def as_matrix(m: ArrayLike) -> ComplexMatrix:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def is_hermitian(m: ArrayLike, tol: float | None = None) -> bool:
    a = as_matrix(m)
    tol = structural_tol() if tol is None else tol
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - a.conj().T), initial=0.0)) <= tol


def is_unitary(m: ArrayLike, tol: float | None = None) -> bool:
    a = as_matrix(m)
    tol = structural_tol() if tol is None else tol
    if a.shape[0] != a.shape[1]:
        return False
    eye = np.eye(a.shape[0])
    return float(np.max(np.abs(a.conj().T @ a - eye), initial=0.0)) <= tol


def is_projector(m: ArrayLike, tol: float | None = None) -> bool:
    a = as_matrix(m)
    tol = structural_tol() if tol is None else tol
    return is_hermitian(a, tol) and float(np.max(np.abs(a @ a - a), initial=0.0)) <= tol


def projector_rank(p: ArrayLike) -> int:
    return int(round(float(np.trace(as_matrix(p)).real)))


@dataclass(frozen=True)
class SpaceFactorization:
    """Ordered local dimensions of a composite space."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be positive, got {self.factor_dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.factor_dims)

    @classmethod
    def qubits(cls, n: int) -> SpaceFactorization:
        return cls((2,) * n)


def kron(a: ArrayLike, b: ArrayLike) -> ComplexMatrix:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def kron_all(factors: Iterable[ArrayLike]) -> ComplexMatrix:
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = kron(out, f)
    return out


def trace(m: ArrayLike) -> complex:
    return complex(np.trace(as_matrix(m)))


def _split_indices(dims: Sequence[int], keep: Sequence[int]) -> tuple[np.ndarray, np.ndarray, int]:
    """Kept / traced flat indices of every basis element of a product space."""
    digits = np.indices(dims).reshape(len(dims), -1)
    traced_axes = [i for i in range(len(dims)) if i not in keep]
    kept_dims = [dims[i] for i in keep]
    kept = np.ravel_multi_index(digits[list(keep)], kept_dims) if keep else np.zeros(digits.shape[1], int)
    if traced_axes:
        traced = np.ravel_multi_index(digits[traced_axes], [dims[i] for i in traced_axes])
    else:
        traced = np.zeros(digits.shape[1], dtype=np.int64)
    return kept, traced, math.prod(kept_dims)


def partial_trace(m: ArrayLike, f: SpaceFactorization | Sequence[int], keep: Iterable[int]) -> ComplexMatrix:
    """Trace out every factor not listed in ``keep``.

    Kept factors stay in their original order regardless of the order in
    ``keep``.
    """
    a = as_matrix(m)
    if not isinstance(f, SpaceFactorization):
        f = SpaceFactorization(tuple(f))
    keep = sorted(set(int(k) for k in keep))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"partial trace needs a square matrix, got {a.shape}")
    if a.shape[0] != f.dim:
        raise ValueError(f"factorization {f.factor_dims} does not match dimension {a.shape[0]}")
    if not keep:
        raise ValueError("keep set is empty")
    if keep[0] < 0 or keep[-1] >= len(f.factor_dims):
        raise ValueError(f"keep indices {keep} out of range for {len(f.factor_dims)} factors")
    kept, traced, n_kept = _split_indices(f.factor_dims, keep)
    return _kernels.reduce_by_keys(a, kept, traced, n_kept)


def hermitian_eigh(m: ArrayLike, tol: float = HERMITIAN_TOL) -> tuple[NDArray[np.float64], ComplexMatrix]:
    """Eigenvalues (descending) and eigenvector columns of a Hermitian matrix."""
    a = as_matrix(m)
    if not is_hermitian(a, tol):
        raise ValueError("matrix is not Hermitian")
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=np.complex128)
    try:
        return _kernels.jacobi_eigh(a)
    except _kernels.ConvergenceError as exc:
        raise NumericalInvariantError(str(exc)) from exc


def hermitian_eigenvalues(m: ArrayLike, tol: float = HERMITIAN_TOL) -> NDArray[np.float64]:
    return hermitian_eigh(m, tol)[0]


def entropy_from_eigenvalues(w: ArrayLike) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > EIGEN_FLOOR]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def von_neumann_entropy(m: ArrayLike) -> float:
    """-Tr(rho log2 rho) of a density matrix, in bits."""
    a = as_matrix(m)
    w = hermitian_eigenvalues(a)
    if w.size and w[-1] < -HERMITIAN_TOL:
        raise NumericalInvariantError(f"density has negative eigenvalue {w[-1]:.3e}")
    tr = float(np.sum(w))
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalInvariantError(f"density trace is {tr:.12f}, expected 1")
    return entropy_from_eigenvalues(w)


def ket(vector: ArrayLike) -> StateVector:
    return np.asarray(vector, dtype=np.complex128).reshape(-1)


def outer(u: ArrayLike, v: ArrayLike | None = None) -> ComplexMatrix:
    u = ket(u)
    v = u if v is None else ket(v)
    return np.outer(u, v.conj())


def basis_state(index: int, dim: int) -> StateVector:
    e = np.zeros(dim, dtype=np.complex128)
    e[index] = 1.0
    return e
