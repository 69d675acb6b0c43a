"""The compiled and pure-Python kernels must agree bit for bit."""

import numpy as np
import pytest

from cascade_screen import _kernels
from cascade_screen.classifiers.svc import kernel_matrix

backends = _kernels.available_backends()
needs_both = pytest.mark.skipif("cython" not in backends, reason="compiled kernels not built")


def test_backend_selected():
    assert _kernels.BACKEND in backends


@needs_both
@pytest.mark.parametrize("seed", range(30))
def test_best_split_parity(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 60)), int(rng.integers(1, 6))
    X = np.ascontiguousarray(rng.integers(0, 6, size=(n, d)).astype(float) + rng.normal(size=(n, d)) * (seed % 2))
    y = rng.integers(0, 2, n).astype(np.int64)
    rows = np.sort(rng.choice(n, size=max(2, n // 2 + 1), replace=False)).astype(np.int64)
    feats = np.arange(d, dtype=np.int64)
    for crit in (0, 1):
        for min_leaf in (1, 3):
            a = backends["cython"].best_split(X, y, rows, feats, crit, min_leaf)
            b = backends["python"].best_split(X, y, rows, feats, crit, min_leaf)
            assert a == b


@needs_both
@pytest.mark.parametrize("seed", range(20))
def test_smo_parity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    X = rng.normal(size=(n, 3))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[-1] = 1.0, -1.0
    Q = np.ascontiguousarray(y[:, None] * y[None, :] * kernel_matrix(X, X, "rbf", 0.5))
    a1, b1, it1, c1 = backends["cython"].smo_solve(Q, y, 1.0, 1e-3, 100000)
    a2, b2, it2, c2 = backends["python"].smo_solve(Q, y, 1.0, 1e-3, 100000)
    assert np.array_equal(a1, a2) and b1 == b2 and it1 == it2 and c1 == c2


@needs_both
def test_tree_apply_parity(rng):
    from cascade_screen.classifiers.tree import build_tree

    X = rng.normal(size=(100, 4))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    t = build_tree(X, y, max_depth=6)
    Xt = np.ascontiguousarray(rng.normal(size=(200, 4)))
    args = (Xt, t.feature, t.threshold, t.left, t.right)
    assert np.array_equal(backends["cython"].tree_apply(*args), backends["python"].tree_apply(*args))
