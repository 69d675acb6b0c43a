"""Kernel support vector classifier solved by SMO, with Platt-scaled probabilities."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import TrainingError

KERNELS = ("linear", "poly", "rbf", "sigmoid")


def resolve_gamma(gamma, X):
    """Numeric gamma: ``scale`` = 1/(d * Var(X)) over all entries, ``auto`` = 1/d."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if gamma == "scale":
        var = float(X.var())
        return 1.0 / (d * var) if var > 0 else 1.0
    if gamma == "auto":
        return 1.0 / d
    return float(gamma)


def kernel_matrix(A, B, kernel, gamma, degree=3):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if kernel == "rbf":
        sq = (np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :]
              - 2.0 * (A @ B.T))
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    dot = A @ B.T
    if kernel == "linear":
        return dot
    if kernel == "poly":
        return (gamma * dot + 1.0) ** int(degree)
    if kernel == "sigmoid":
        return np.tanh(gamma * dot + 1.0)
    raise ValueError(f"unknown kernel {kernel!r}")


def kernel(u, v, kernel_name, gamma=1.0, degree=3):
    """Scalar kernel value; see :func:`kernel_matrix`."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    if kernel_name == "rbf":
        diff = u - v
        return float(math.exp(-gamma * float(diff @ diff)))
    return float(kernel_matrix(u[None, :], v[None, :], kernel_name, gamma, degree)[0, 0])


def dual_objective(alpha, Q):
    """Dual objective in maximization form: sum(alpha) - 1/2 alpha' Q alpha."""
    return float(alpha.sum() - 0.5 * alpha @ Q @ alpha)


def solve_dual(K, y_pm, C, tol=1e-3, max_iter=None):
    """Run SMO on the Gram matrix ``K`` with labels in {-1, +1}.

    Returns ``(alpha, b, n_iter, converged)``.
    """
    y_pm = np.ascontiguousarray(y_pm, dtype=np.float64)
    n = y_pm.size
    Q = np.ascontiguousarray(y_pm[:, None] * y_pm[None, :] * K)
    if max_iter is None:
        max_iter = 10 * n * 1000
    return _kernels.smo_solve(Q, y_pm, float(C), float(tol), int(max_iter))


def _sigmoid_neg(z):
    """1 / (1 + exp(z)), overflow-safe."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def platt_fit(decision, labels, max_iter=100, min_step=1e-10, sigma=1e-12):
    """Fit ``P(y=1|f) = 1/(1+exp(A f + B))`` by Newton's method with backtracking.

    Targets are regularized to ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``.
    """
    f = np.asarray(decision, dtype=np.float64)
    t_lab = np.asarray(labels, dtype=np.int64)
    prior1 = float(np.sum(t_lab == 1))
    prior0 = float(t_lab.size - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(t_lab == 1, hi, lo)

    def objective(A, B):
        z = f * A + B
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
                                     (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))))))

    A = 0.0
    B = math.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = objective(A, B)
    for _ in range(max_iter):
        z = f * A + B
        p = _sigmoid_neg(z)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA = A + step * dA
            newB = B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        if step < min_step:
            break
    return A, B


@dataclass(frozen=True, eq=False)
class SvcModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    alpha: np.ndarray
    b: float
    kernel: str
    gamma: float
    degree: int
    C: float
    platt_A: float
    platt_B: float
    converged: bool
    n_iter: int
    params: dict

    family = "SVC"

    @property
    def n_features(self):
        return int(self.support_vectors.shape[1])

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        X = self._check(X)
        if self.dual_coef.size == 0:
            return np.full(X.shape[0], self.b)
        K = kernel_matrix(X, self.support_vectors, self.kernel, self.gamma, self.degree)
        return K @ self.dual_coef + self.b

    def predict_proba(self, X):
        return _sigmoid_neg(self.platt_A * self.decision_function(X) + self.platt_B)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self):
        return {
            "family": "SVC",
            "params": dict(self.params),
            "n_features": self.n_features,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "alpha": self.alpha.tolist(),
            "b": self.b,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "degree": self.degree,
            "C": self.C,
            "platt": [self.platt_A, self.platt_B],
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        return cls(
            support_vectors=sv.reshape(-1, int(d["n_features"])),
            dual_coef=np.asarray(d["dual_coef"], dtype=np.float64),
            alpha=np.asarray(d["alpha"], dtype=np.float64),
            b=float(d["b"]),
            kernel=d["kernel"],
            gamma=float(d["gamma"]),
            degree=int(d["degree"]),
            C=float(d["C"]),
            platt_A=float(d["platt"][0]),
            platt_B=float(d["platt"][1]),
            converged=bool(d["converged"]),
            n_iter=int(d["n_iter"]),
            params=dict(d.get("params", {})),
        )


def _fit_raw(X, y01, kernel_name, gamma, C, degree, tol, max_iter):
    y_pm = np.where(y01 == 1, 1.0, -1.0)
    K = kernel_matrix(X, X, kernel_name, gamma, degree)
    alpha, b, n_iter, converged = solve_dual(K, y_pm, C, tol, max_iter)
    sv = alpha > 0
    return alpha, b, n_iter, converged, sv, y_pm


def _calibration_split(y01, fraction, seed):
    rng = np.random.default_rng(seed)
    calib = []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y01 == cls))
        m = int(round(fraction * idx.size))
        if m < 1 or idx.size - m < 1:
            return None
        calib.append(idx[:m])
    calib = np.sort(np.concatenate(calib))
    train = np.setdiff1d(np.arange(y01.size), calib)
    return train, calib


def fit_svc(X, y, kernel="rbf", gamma="scale", C=2.0, degree=2, tol=1e-3,
            max_iter=None, calibration_fraction=0.2, calibration_seed=0, params=None):
    """Train an SVC on 0/1 labels and calibrate its probability output.

    Platt parameters are fitted on decision values of a stratified held-out
    ``calibration_fraction`` of the rows, scored by a model trained on the
    rest; the returned model is then refit on all rows. When a class is too
    small to split, calibration falls back to in-sample decision values.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y01 = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("cannot train an SVC on an empty training set")
    if np.unique(y01).size < 2:
        raise TrainingError("SVC needs both classes in the training data")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    g = resolve_gamma(gamma, X)

    alpha, b, n_iter, converged, sv, y_pm = _fit_raw(X, y01, kernel, g, C, degree, tol, max_iter)
    if not converged:
        warnings.warn(f"SMO stopped after {n_iter} iterations without converging",
                      RuntimeWarning, stacklevel=2)
    dual_coef = alpha[sv] * y_pm[sv]
    support = X[sv]

    split = _calibration_split(y01, calibration_fraction, calibration_seed) \
        if calibration_fraction else None
    if split is not None and np.unique(y01[split[0]]).size == 2:
        tr, cal = split
        a2, b2, _, _, sv2, ypm2 = _fit_raw(X[tr], y01[tr], kernel, g, C, degree, tol, max_iter)
        Kc = kernel_matrix(X[cal], X[tr][sv2], kernel, g, degree)
        dec = Kc @ (a2[sv2] * ypm2[sv2]) + b2
        A, B = platt_fit(dec, y01[cal])
    else:
        Kt = kernel_matrix(X, support, kernel, g, degree)
        A, B = platt_fit(Kt @ dual_coef + b, y01)

    return SvcModel(
        support_vectors=support, dual_coef=dual_coef, alpha=alpha[sv], b=float(b),
        kernel=kernel, gamma=g, degree=int(degree), C=float(C),
        platt_A=float(A), platt_B=float(B), converged=bool(converged),
        n_iter=int(n_iter), params=dict(params or {}),
    )


def train_svc(X, y, spec):
    p, o = spec.params, spec.options
    return fit_svc(
        X, y, kernel=p["kernel"], gamma=p["gamma"], C=p["C"], degree=p["degree"],
        tol=o["tol"], max_iter=o["max_iter"],
        calibration_fraction=o["calibration_fraction"],
        calibration_seed=o["calibration_seed"], params=p,
    )
