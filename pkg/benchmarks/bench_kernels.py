"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on identical inputs under every importable backend; the
table reports the best wall time per backend and the speedup. Outputs are
compared so a timing is never reported for a kernel that disagrees.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from css_envelope import kernels, stability


def rt_inputs():
    # hp tasks at 1 tick/bit: three interferers, 2000 candidate payloads
    hp_c = np.array([1000, 2000, 700], dtype=np.int64)
    hp_p = np.array([4000, 6000, 9000], dtype=np.int64)
    hp_j = np.array([0, 100, 50], dtype=np.int64)
    grid = np.arange(1, 20001, 10, dtype=np.int64)
    return grid, 500, hp_c, hp_p, hp_j, 1_000_000


def busy_inputs():
    hp_c = np.array([3, 5, 2], dtype=np.int64)
    hp_p = np.array([17, 29, 41], dtype=np.int64)
    hp_j = np.array([1, 0, 4], dtype=np.int64)
    return 20_000, 4, hp_c, hp_p, hp_j, 1_000_000


def jump_inputs(runs=256, steps=64, seed=0):
    rng = np.random.default_rng(seed)
    sys_, _ = stability.certified_jump_system(rng, 3)
    n = sys_.certs[0].P.shape[0]
    pm = np.ascontiguousarray(np.stack([m.P for m in sys_.certs]))
    cum = np.ascontiguousarray(np.cumsum(sys_.P_rho, axis=1))
    cum[:, -1] = 1.0 + 1e-12
    mode = rng.integers(0, 3, size=runs).astype(np.int64)
    x = rng.normal(size=(runs, n))
    return (x, np.zeros(runs), mode, np.ascontiguousarray(sys_.Phi),
            np.ascontiguousarray(sys_.Lt), pm, np.ascontiguousarray(sys_.scale, dtype=float),
            cum, np.ascontiguousarray(rng.normal(size=(steps, runs, n))),
            np.ascontiguousarray(rng.random(size=(steps, runs))))


def fresh(args):
    # jump_linear_chunk updates its state arrays in place
    return tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)


CASES = {
    "rt_sweep (2000 payloads)": ("rt_sweep", rt_inputs),
    "busy_period (timeline oracle)": ("busy_period", busy_inputs),
    "jump_linear_chunk (256 runs x 64 epochs)": ("jump_linear_chunk", jump_inputs),
}


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    found = kernels.backends()
    if "compiled" not in found:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    results = []
    for label, (fname, make) in CASES.items():
        inputs = make()
        outs, times = {}, {}
        for name, mod in found.items():
            fn = getattr(mod, fname)
            outs[name] = fn(*fresh(inputs))
            times[name] = min(timeit.repeat(lambda: fn(*fresh(inputs)), number=1,
                                            repeat=args.repeat))
        if len(outs) == 2 and not same(outs["python"], outs["compiled"]):
            raise SystemExit(f"{label}: backends disagree")
        row = {"kernel": label, **{f"{k}_s": v for k, v in times.items()}}
        if "compiled" in times:
            row["speedup"] = times["python"] / times["compiled"]
        results.append(row)

    print(f"{'kernel':<42} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for r in results:
        comp = r.get("compiled_s")
        print(f"{r['kernel']:<42} {r['python_s'] * 1e3:>8.2f}ms "
              + (f"{comp * 1e3:>8.3f}ms {r['speedup']:>7.0f}x" if comp else f"{'-':>10} {'-':>8}"))
    if args.json:
        with open(args.json, "w") as f:
            json.dump(results, f, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
