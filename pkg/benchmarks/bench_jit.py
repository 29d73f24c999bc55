"""Time the numba kernels against the plain-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import.
Numba timings exclude compilation: every workload runs once to warm up first.

    python benchmarks/bench_jit.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from magss import _jit, diagnostics as Dg, samplers as S, targets as T

def magss_funnel():
    tg = T.FunnelTarget(2)
    cfg = S.MagssConfig(metric="monge", metric_params={"alpha2": 1.0})
    st = S.initial_state(np.zeros(2), np.random.default_rng(0))
    for _ in range(200):
        st = S.magss_step(st, tg, cfg)

def mala_gauss():
    tg = T.GaussianTarget(10)
    S.mala_step(S.initial_state(np.zeros(10), np.random.default_rng(0)), tg, 0.1, n_steps=20000)

def ksd_2000():
    X = np.random.default_rng(0).normal(size=(2000, 4))
    Dg.ksd_vstat(X, -X)

jobs = {"magss funnel x200": magss_funnel, "mala D=10 x2e4": mala_gauss, "ksd n=2000": ksd_2000}
repeat = int(sys.argv[1])
out = {}
for name, fn in jobs.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps({"backend": _jit.backend(), "times": out}))
"""


def run(disable, repeat):
    env = dict(os.environ)
    env.pop("MAGSS_DISABLE_NUMBA", None)
    if disable:
        env["MAGSS_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run(False, args.repeat)["times"]
    py = run(True, args.repeat)["times"]
    print(f"{'workload':<20}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for name in jit:
        print(f"{name:<20}{jit[name]:>12.4f}{py[name]:>12.4f}{py[name] / jit[name]:>9.1f}x")


if __name__ == "__main__":
    main()
