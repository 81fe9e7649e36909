"""Time the hot kernels with numba and with the pure-Python fallback.

Each mode runs in its own interpreter because MAGE_DISABLE_NUMBA is read at
import time.  Usage: python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

CHILD = r"""
import json, time
import numpy as np
from mage._jit import NUMBA_OK
from mage.opponents import cfr_train, mcts_select, minimax_value

def best_of(fn, reps):
    fn()  # warm-up (includes JIT compilation when numba is on)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

board = [0] * 9
out = {
    "numba": NUMBA_OK,
    "cfr_1000_iters": best_of(lambda: cfr_train(1000), 3),
    "mcts_1000_sims": best_of(lambda: mcts_select(board, 1, 1000, np.random.default_rng(0)), 3),
    "minimax_empty_board": best_of(lambda: minimax_value(board, 1), 3),
}
print(json.dumps(out))
"""


def run(disabled: bool) -> dict:
    env = dict(os.environ, MAGE_DISABLE_NUMBA="1" if disabled else "0")
    proc = subprocess.run([sys.executable, "-c", CHILD], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    fast, slow = run(False), run(True)
    print(f"{'kernel':<22}{'numba (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    for key in fast:
        if key == "numba":
            continue
        print(f"{key:<22}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}x")
    if not fast["numba"]:
        print("note: numba is not importable here, both columns ran the fallback")


if __name__ == "__main__":
    main()
