"""Feed-forward network with one sigmoid output, trained by backpropagation.

Loss is mean binary cross-entropy plus ``alpha * 1/2 * ||W||^2`` over the
weight matrices (biases unpenalized). All parameters live in one flat
vector so optimizer updates are single array operations.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError

ACTIVATIONS = ("relu", "tanh")


class Network:
    """Parameter layout and forward/backward passes for a fixed architecture."""

    def __init__(self, layer_sizes, activation="relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.activation = activation
        self.slices = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset += fan_in * fan_out
            b = slice(offset, offset + fan_out)
            offset += fan_out
            self.slices.append((w, b, fan_in, fan_out))
        self.n_params = offset
        mask = np.zeros(offset)
        for w, _, _, _ in self.slices:
            mask[w] = 1.0
        self.weight_mask = mask

    def init_params(self, rng):
        theta = np.zeros(self.n_params)
        for w, _, fan_in, fan_out in self.slices:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            theta[w] = rng.uniform(-bound, bound, size=fan_in * fan_out)
        return theta

    def unpack(self, theta):
        return [(theta[w].reshape(fi, fo), theta[b]) for w, b, fi, fo in self.slices]

    def logits(self, theta, X):
        a = X
        layers = self.unpack(theta)
        for W, b in layers[:-1]:
            z = a @ W + b
            a = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
        W, b = layers[-1]
        return (a @ W + b)[:, 0]

    def loss_and_grad(self, theta, X, y, alpha):
        """Mean BCE + L2 penalty and its gradient with respect to ``theta``."""
        layers = self.unpack(theta)
        acts = [X]
        a = X
        for W, b in layers[:-1]:
            z = a @ W + b
            a = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
            acts.append(a)
        W_out, b_out = layers[-1]
        z = (a @ W_out + b_out)[:, 0]
        m = X.shape[0]
        # softplus(z) - y z, stable for large |z|
        data_loss = float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))))
        wsq = theta * self.weight_mask
        loss = data_loss + 0.5 * alpha * float(wsq @ wsq)

        grad = np.empty_like(theta)
        delta = ((0.5 + 0.5 * np.tanh(0.5 * z) - y) / m)[:, None]
        for li in range(len(layers) - 1, -1, -1):
            w_sl, b_sl, fi, fo = self.slices[li]
            W, _ = layers[li]
            a_in = acts[li]
            grad[w_sl] = (a_in.T @ delta).ravel()
            grad[b_sl] = delta.sum(axis=0)
            if li:
                delta = delta @ W.T
                if self.activation == "relu":
                    delta *= a_in > 0
                else:
                    delta *= 1.0 - a_in * a_in
        grad += alpha * wsq
        return loss, grad


@dataclass(frozen=True, eq=False)
class MlpModel:
    layer_sizes: tuple
    activation: str
    theta: np.ndarray
    n_epochs: int
    final_loss: float
    params: dict

    family = "MLP"

    @property
    def n_features(self):
        return self.layer_sizes[0]

    @property
    def network(self):
        return Network(self.layer_sizes, self.activation)

    def weights(self):
        return self.network.unpack(self.theta)

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def predict_proba(self, X):
        z = self.network.logits(self.theta, self._check(X))
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self):
        return {
            "family": "MLP",
            "params": dict(self.params),
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "theta": self.theta.tolist(),
            "n_epochs": self.n_epochs,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_sizes"]), d["activation"],
                   np.asarray(d["theta"], dtype=np.float64), int(d["n_epochs"]),
                   float(d["final_loss"]), dict(d.get("params", {})))


def fit_mlp(X, y, hidden=(64, 64, 64), activation="relu", solver="sgd", alpha=3e-4,
            learning_rate="adaptive", seed=0, max_epochs=500, batch_size=32,
            sgd_lr=0.01, adam_lr=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8,
            adaptive_patience=10, adaptive_tol=1e-4, stop_tol=1e-6, params=None):
    """Minibatch training.

    Each epoch visits a fresh permutation of the rows in batches of
    ``batch_size``; the epoch loss is the size-weighted mean of batch losses.
    With ``learning_rate="adaptive"`` the sgd step size halves whenever the
    epoch loss has not improved on the best by ``adaptive_tol`` for
    ``adaptive_patience`` consecutive epochs. Training stops early once the
    epoch loss changes by less than ``stop_tol``.

    Raises:
        TrainingError: the loss became non-finite.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TrainingError("MLP needs at least 2 training rows")
    if np.unique(y).size < 2:
        raise TrainingError("MLP needs both classes in the training data")
    if solver not in ("sgd", "adam"):
        raise ValueError(f"unknown solver {solver!r}")
    n, d = X.shape
    net = Network((d, *hidden, 1), activation)
    rng = np.random.default_rng(seed)
    theta = net.init_params(rng)
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    step = 0
    lr = sgd_lr
    best = math.inf
    stale = 0
    prev = None
    epoch_loss = math.nan
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grad = net.loss_and_grad(theta, X[idx], y[idx], alpha)
            total += loss * idx.size
            if solver == "sgd":
                theta -= lr * grad
            else:
                step += 1
                m1 *= beta1
                m1 += (1.0 - beta1) * grad
                m2 *= beta2
                m2 += (1.0 - beta2) * grad * grad
                lr_t = adam_lr * math.sqrt(1.0 - beta2 ** step) / (1.0 - beta1 ** step)
                theta -= lr_t * m1 / (np.sqrt(m2) + epsilon)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss) or not np.isfinite(theta).all():
            raise TrainingError("MLP loss diverged", epoch=epoch)
        if solver == "sgd" and learning_rate == "adaptive":
            if epoch_loss > best - adaptive_tol:
                stale += 1
                if stale >= adaptive_patience:
                    lr /= 2.0
                    stale = 0
            else:
                stale = 0
        best = min(best, epoch_loss)
        if prev is not None and abs(prev - epoch_loss) < stop_tol:
            break
        prev = epoch_loss
    return MlpModel(net.layer_sizes, activation, theta, epoch, float(epoch_loss), dict(params or {}))


def train_mlp(X, y, spec, seed=0):
    p, o = spec.params, spec.options
    return fit_mlp(
        X, y, hidden=(p["hidden_width"],) * p["n_hidden_layers"], activation=p["activation"],
        solver=p["solver"], alpha=p["alpha"], learning_rate=p["learning_rate"], seed=seed,
        max_epochs=o["max_epochs"], batch_size=o["batch_size"], sgd_lr=o["sgd_lr"],
        adam_lr=o["adam_lr"], beta1=o["beta1"], beta2=o["beta2"], epsilon=o["epsilon"],
        adaptive_patience=o["adaptive_patience"], adaptive_tol=o["adaptive_tol"],
        stop_tol=o["stop_tol"], params=p,
    )
