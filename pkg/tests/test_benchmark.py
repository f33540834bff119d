from __future__ import annotations

import runpy
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_svr.py"


def test_benchmark_compares_available_solvers():
    module = runpy.run_path(str(BENCH))
    rows = module["bench"]([30], repeats=1, seed=0)
    assert rows[0]["n"] == 30
    if "speedup" in rows[0]:
        assert rows[0]["max_pred_diff"] < 1e-6
