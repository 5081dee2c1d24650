"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from ncsr import _pykernels
from ncsr.profile import validate_profile

try:
    from ncsr import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(prof, n):
    rng = np.random.default_rng(0)
    b, c = prof.breaks, prof.coefs
    x = rng.uniform(-2.0, 2.0, n)
    w = rng.uniform(-2.0, 2.0, n)
    v = rng.uniform(-1.5, 1.5, n)
    return {
        "ppoly_eval": lambda K: K.ppoly_eval(x, b, c),
        "omega": lambda K: K.omega(w, 0.0, b, c),
        "tauinv": lambda K: K.tauinv(v, 0.0, 0.0, b, c),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    prof = validate_profile([(-np.inf, [0.0, 0.0, 1.0]), (0.0, [0.0, 0.0, 1.0, 0.5, 0.25])])
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':<12}" + "".join(f"{k:>14}" for k in backends) + f"{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(prof, args.size).items():
        t = {k: min(timeit.repeat(lambda: fn(K), number=1, repeat=args.repeat)) for k, K in backends.items()}
        row = f"{name:<12}" + "".join(f"{1e3 * t[k]:>12.2f}ms" for k in backends)
        if "cython" in t:
            diff = np.abs(np.asarray(fn(_ckernels)) - np.asarray(fn(_pykernels))).max()
            row += f"{t['python'] / t['cython']:>9.1f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
