"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the Jacobi eigensolver and the keyed partial trace on history-density
shaped inputs, after one untimed warmup call per kernel.
"""

import argparse
import statistics
import time

import numpy as np

from histent import _kernels


def timed(fn, *args, repeat=5):
    fn(*args)
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def rank_r_density(rng, n, r):
    x = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    m = x @ x.conj().T
    return m / np.trace(m).real


def reduction_case(rng, n_kept, n_traced):
    n = n_kept * n_traced
    m = rank_r_density(rng, n, 4)
    perm = rng.permutation(n)
    kept = (perm % n_kept).astype(np.int64)
    traced = (perm // n_kept).astype(np.int64)
    return m, kept, traced, n_kept


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is timed")

    print(f"{'kernel':<28}{'size':>8}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>9}")
    for n in (16, 64, 128, 256):
        m = rank_r_density(rng, n, 4)
        t_np = timed(_kernels.jacobi_eigh_numpy, m, repeat=args.repeat)
        t_nb = timed(_kernels.jacobi_eigh_numba, m, repeat=args.repeat) if _kernels.HAVE_NUMBA else float("nan")
        w_np = _kernels.jacobi_eigh_numpy(m)[0]
        w_nb = _kernels.jacobi_eigh_numba(m)[0] if _kernels.HAVE_NUMBA else w_np
        assert np.max(np.abs(w_np - w_nb)) < 1e-9
        print(f"{'jacobi_eigh':<28}{n:>8}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}")

    for n_kept, n_traced in ((16, 16), (64, 8), (128, 32), (256, 16)):
        case = reduction_case(rng, n_kept, n_traced)
        t_np = timed(_kernels.reduce_by_keys_numpy, *case, repeat=args.repeat)
        if _kernels.HAVE_NUMBA:
            t_nb = timed(_kernels.reduce_by_keys_numba, *case, repeat=args.repeat)
            assert np.allclose(_kernels.reduce_by_keys_numpy(*case), _kernels.reduce_by_keys_numba(*case), atol=1e-13)
        else:
            t_nb = float("nan")
        size = f"{n_kept * n_traced}->{n_kept}"
        print(f"{'reduce_by_keys':<28}{size:>8}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
