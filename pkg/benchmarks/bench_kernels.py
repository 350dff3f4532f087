"""Compare the numba kernels against the plain-Python fallback.

Each backend runs in its own interpreter because the switch is read at
import time. The workload is one wave-zone crossing per rung of a
five-rung eps ladder plus a batch of direct field evaluations; compile
time is excluded by a warm-up run.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from impgeod import *
from impgeod import kernels
from impgeod.integrator import _Field

repeat = int(sys.argv[1])
bg = make_background(3.0)
prof = profile_catalog("quadratic", [1.0, -1.0, 0.5])
moll = make_mollifier("bump")
seed = SeedData(0.0, [1, 0, 0], 1.0, 0.0, [0, 1, 0], 1)
geo = BackgroundGeodesic.from_seed(seed, bg)
ladder = 1e-2 * 0.5 ** np.arange(5)
fld = _Field(1e-2, prof, moll, bg, 1)
y = np.array([0.004, 0.1, 0.9, 0.2, 0.1, 1.0, 0.3, 0.1, 0.9, 0.0])
out = np.empty(10)


def crossings():
    steps = 0
    for eps in ladder:
        _, rec = integrate_through_wave(seed_family_data(geo, eps), eps, prof, moll, bg, 1)
        steps += rec.n_steps
    return steps


def field(n=20000):
    for _ in range(n):
        kernels.rhs_kernel(0.0, y, out, *fld.args)
    return n


result = {"backend": backend_name()}
for name, fn in (("ladder_crossings", crossings), ("rhs_20k", field)):
    units = fn()  # warm-up and unit count
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    result[name] = {"best_s": min(times), "units": units}
print(json.dumps(result))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("IMPGEOD_DISABLE_NUMBA", None)
    if disable:
        env["IMPGEOD_DISABLE_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", help="write the raw timings here")
    args = p.parse_args(argv)
    results = [run_backend(False, args.repeat), run_backend(True, args.repeat)]
    print(f"{'workload':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("ladder_crossings", "rhs_20k"):
        fast, slow = results[0][key]["best_s"], results[1][key]["best_s"]
        print(f"{key:<18}{fast:>12.4f}{slow:>12.4f}{slow / fast:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
