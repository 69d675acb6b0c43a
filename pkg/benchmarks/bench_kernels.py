"""Compare the compiled and pure-Python kernel backends.

Times each hot kernel directly on both backends, then times whole-model
cross-validation in subprocesses with ``CASCADE_SCREEN_BACKEND`` set, so
the second table reflects what a user of each backend would see.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from cascade_screen import _kernels
from cascade_screen.classifiers.svc import kernel_matrix
from cascade_screen.classifiers.tree import build_tree

END_TO_END = """
import time, warnings
warnings.simplefilter("ignore")
from cascade_screen import _kernels
from cascade_screen.classifiers import LearnerSpec
from cascade_screen.cascade import CascadeSpec
from cascade_screen.selection import cross_validate
from cascade_screen.synth import CohortSpec, generate_cohort
ds = generate_cohort(CohortSpec(n=400, seed=0)).dataset()
out = {"backend": _kernels.BACKEND}
for name, spec in [("TREE", LearnerSpec("TREE")), ("SVC", LearnerSpec("SVC")),
                   ("FOREST", LearnerSpec("FOREST")),
                   ("SVC_DT_RF", CascadeSpec.from_shape("SVC_DT_RF"))]:
    best = float("inf")
    for _ in range({repeat}):
        t = time.perf_counter()
        cross_validate(spec, ds, k=10, seed=0)
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(__import__("json").dumps(out))
"""


def kernel_cases(rng):
    n, d = 400, 17
    X = np.ascontiguousarray(rng.normal(size=(n, d)).round(1))
    y = (X[:, 0] + rng.normal(size=n) > 0).astype(np.int64)
    rows = np.arange(n, dtype=np.int64)
    feats = np.arange(d, dtype=np.int64)
    ypm = np.where(y == 1, 1.0, -1.0)
    Q = np.ascontiguousarray(ypm[:, None] * ypm[None, :] * kernel_matrix(X, X, "rbf", 1.0 / d))
    t = build_tree(X, y, max_depth=8)
    Xt = np.ascontiguousarray(rng.normal(size=(4000, d)))
    return {
        "best_split (n=400, d=17)": lambda b: b.best_split(X, y, rows, feats, 0, 1),
        "smo_solve (n=400, rbf)": lambda b: b.smo_solve(Q, ypm, 1.0, 1e-3, 100000),
        "tree_apply (4000 rows)": lambda b: b.tree_apply(Xt, t.feature, t.threshold, t.left, t.right),
    }


def time_kernels(repeat):
    backends = _kernels.available_backends()
    rows = []
    for name, fn in kernel_cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        for label, mod in backends.items():
            number = 1
            while timeit.timeit(lambda: fn(mod), number=number) < 0.2:
                number *= 2
            row[label] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=repeat)) / number
        rows.append(row)
    return rows


def time_end_to_end(repeat):
    results = {}
    for label in _kernels.available_backends():
        env = dict(os.environ, CASCADE_SCREEN_BACKEND=label)
        proc = subprocess.run([sys.executable, "-c", END_TO_END.replace("{repeat}", str(repeat))],
                              env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(proc.stdout)
    return results


def _fmt(seconds):
    return f"{seconds * 1e3:10.3f} ms"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="also write the timings to this file")
    args = parser.parse_args(argv)

    labels = list(_kernels.available_backends())
    if "cython" not in labels:
        print("compiled backend not built; only the python fallback is timed")
    kernels = time_kernels(args.repeat)
    print(f"{'kernel':28s}" + "".join(f"{lab:>14s}" for lab in labels) + "   speedup")
    for row in kernels:
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{row['kernel']:28s}" + "".join(_fmt(row[lab]) + "  " for lab in labels)
              + f"{speed:8.1f}x")

    e2e = time_end_to_end(max(1, args.repeat // 2))
    print()
    print(f"{'10-fold CV, n=400':28s}" + "".join(f"{lab:>14s}" for lab in labels) + "   speedup")
    for model in ("TREE", "SVC", "FOREST", "SVC_DT_RF"):
        times = {lab: e2e[lab][model] for lab in labels}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{model:28s}" + "".join(_fmt(times[lab]) + "  " for lab in labels) + f"{speed:8.1f}x")

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"kernels": kernels, "end_to_end": e2e}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
