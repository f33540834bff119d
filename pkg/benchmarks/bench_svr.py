"""Time the compiled and pure-Python SMO solvers on the same problems.

    python3 benchmarks/bench_svr.py --sizes 50,100,200,400 --repeats 3
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from lexeval.assess import _backend
from lexeval.assess.svr import SvrParams, fit_svr, predict_svr


def make_problem(n: int, d: int = 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.dirichlet(np.ones(d), size=n)
    y = X @ np.arange(1, d + 1) + rng.normal(0, 0.1, n)
    return X, y, rng.dirichlet(np.ones(d), size=50)


def bench(sizes, repeats: int, seed: int) -> list[dict]:
    rows = []
    for n in sizes:
        X, y, Xt = make_problem(n, seed=seed)
        row: dict = {"n": n}
        preds = {}
        for name in sorted(_backend.IMPLEMENTATIONS):
            params = SvrParams(solver=name)
            timer = timeit.Timer(lambda: fit_svr(X, y, params))
            row[f"{name}_s"] = min(timer.repeat(repeat=repeats, number=1))
            preds[name] = predict_svr(fit_svr(X, y, params), Xt)
        if len(preds) == 2:
            row["speedup"] = row["python_s"] / row["cython_s"]
            row["max_pred_diff"] = float(np.max(np.abs(preds["python"] - preds["cython"])))
        rows.append(row)
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,100,200,400")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args()
    rows = bench([int(s) for s in args.sizes.split(",")], args.repeats, args.seed)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"default solver: {_backend.BACKEND}")
    cols = list(rows[0])
    print("\t".join(cols))
    for r in rows:
        print("\t".join(f"{r[c]:.4g}" if isinstance(r[c], float) else str(r[c]) for c in cols))


if __name__ == "__main__":
    main()
