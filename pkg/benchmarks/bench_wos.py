"""Walk-on-spheres and Riesz-sum throughput: numba kernels against the numpy fallback.

    python3 benchmarks/bench_wos.py [--walks N] [--repeat R]

Each backend runs in its own interpreter (the backend is fixed at import).
"""
import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from ntalab import backend
from ntalab.geometry import halfspace, hong_cone
from ntalab.potential import _riesz_sum
from ntalab.wos import WalkConfig, run_walks

walks, repeat = int(sys.argv[1]), int(sys.argv[2])
out = {"backend": backend()}
for name, dom, start in (("halfspace3", halfspace(3), [0, 0, 1.0]), ("hong4", hong_cone(), [1.0, 0, 0, 0])):
    cfg = WalkConfig(walks=walks, seed=1)
    run_walks(dom, start, cfg.with_(walks=64))  # compile / warm up
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        batch = run_walks(dom, start, cfg)
        best = min(best, time.perf_counter() - t)
    out[name] = {"seconds": best, "walks_per_s": walks / best, "mean_steps": float(batch.steps.mean()),
                 "hit_checksum": float(np.abs(batch.hits).sum())}
rng = np.random.default_rng(0)
atoms = rng.standard_normal((200_000, 3))
w = np.full(len(atoms), 1 / len(atoms))
x, y = np.array([5.0, 0, 0]), np.array([0, 5.0, 0])
_riesz_sum(atoms[:100], w[:100], x, y)
t = time.perf_counter()
val = _riesz_sum(atoms, w, x, y)
out["riesz_200k"] = {"seconds": time.perf_counter() - t, "value": val.tolist()}
print(json.dumps(out))
"""


def run(disable, walks, repeat):
    env = dict(os.environ)
    if disable:
        env["NTALAB_DISABLE_NUMBA"] = "1"
    else:
        env.pop("NTALAB_DISABLE_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", CHILD, str(walks), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    t = time.perf_counter()
    fast = run(False, args.walks, args.repeat)
    slow = run(True, args.walks, args.repeat)
    print(f"{'case':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  same hits")
    for case in ("halfspace3", "hong4"):
        a, b = fast[case]["seconds"], slow[case]["seconds"]
        same = abs(fast[case]["hit_checksum"] - slow[case]["hit_checksum"]) <= 1e-9 * fast[case]["hit_checksum"]
        print(f"{case:<12} {a:>10.4f} {b:>10.4f} {b / a:>8.1f}  {same}")
    a, b = fast["riesz_200k"]["seconds"], slow["riesz_200k"]["seconds"]
    print(f"{'riesz_200k':<12} {a:>10.4f} {b:>10.4f} {b / a:>8.1f}")
    print(f"backends: {fast['backend']} / {slow['backend']}; total {time.perf_counter() - t:.1f} s")


if __name__ == "__main__":
    main()
