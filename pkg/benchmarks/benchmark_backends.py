#!/usr/bin/env python3
"""Compare the compiled (numba) and pure-numpy integrator backends.

The backend is chosen at import time from the ``ERTRANS_NO_NUMBA``
environment variable, so each backend is timed in a fresh subprocess.
Both backends are also checked for agreement on the reported metrics.

Usage::

    python3 benchmarks/benchmark_backends.py [--repeats N] [--alpha-points N]
"""

import argparse
import json
import os
import subprocess
import sys

_PAYLOAD = r"""
import json
import time

from ertrans._kernels import backend_name
from ertrans.protocol import ProtocolParams, run_transfer

repeats = {repeats}
alpha_points = {alpha_points}

params = ProtocolParams()
G = params.G

# warm-up: triggers jit compilation on the numba backend so the timed
# section measures steady-state throughput on both backends
run_transfer(params)

alphas = [0.1 + 0.8 * k / max(alpha_points - 1, 1) for k in range(alpha_points)]
start = time.monotonic()
results = []
for _ in range(repeats):
    for a in alphas:
        res = run_transfer(ProtocolParams(alpha=a * G))
        results.append((res.efficiency, res.noise, res.fidelity_snr))
elapsed = time.monotonic() - start

print(json.dumps({{
    "backend": backend_name(),
    "elapsed_s": elapsed,
    "runs": repeats * alpha_points,
    "seconds_per_run": elapsed / (repeats * alpha_points),
    "metrics": results[:alpha_points],
}}))
"""


def run_backend(no_numba: bool, repeats: int, alpha_points: int) -> dict:
    env = dict(os.environ)
    env["ERTRANS_NO_NUMBA"] = "1" if no_numba else ""
    code = _PAYLOAD.format(repeats=repeats, alpha_points=alpha_points)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        raise RuntimeError(f"benchmark subprocess failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=1,
                    help="timed passes over the alpha grid (default 1)")
    ap.add_argument("--alpha-points", type=int, default=5,
                    help="alpha/G grid points per pass (default 5)")
    args = ap.parse_args()

    print(f"timing {args.repeats} x {args.alpha_points} transfer runs per backend")
    rows = []
    for no_numba in (False, True):
        r = run_backend(no_numba, args.repeats, args.alpha_points)
        rows.append(r)
        print(f"  {r['backend']:>6}: {r['elapsed_s']:8.2f} s total, "
              f"{r['seconds_per_run']:6.3f} s/run")

    fast, slow = sorted(rows, key=lambda r: r["elapsed_s"])
    print(f"speedup ({fast['backend']} over {slow['backend']}): "
          f"{slow['elapsed_s'] / fast['elapsed_s']:.2f}x")

    worst = 0.0
    for m1, m2 in zip(rows[0]["metrics"], rows[1]["metrics"]):
        worst = max(worst, max(abs(a - b) for a, b in zip(m1, m2)))
    print(f"max metric disagreement between backends: {worst:.3e}")
    if worst > 1e-9:
        print("ERROR: backends disagree beyond 1e-9", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
