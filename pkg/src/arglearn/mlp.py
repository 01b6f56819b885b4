"""Small fully-connected network with explicit backprop and Adam updates.

float64 throughout so analytic gradients can be validated against central
finite differences; checkpoints are JSON with an architecture header.
"""

from __future__ import annotations

import json

import numpy as np

_ACTIVATIONS = {"tanh"}


class Mlp:
    """Dense layers with tanh hidden activations and a linear output."""

    def __init__(self, layers: list[int], seed: int, activation: str = "tanh"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {activation!r}")
        self.layers = list(layers)
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layers[:-1], layers[1:]):
            scale = np.sqrt(1.0 / fan_in)
            self.weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Returns (output, activations); activations[i] feeds layer i."""
        acts = [np.atleast_2d(np.asarray(x, dtype=float))]
        h = acts[0]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < len(self.weights) - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out: np.ndarray):
        """Parameter gradients for d(loss)/d(output) = grad_out."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        g = np.asarray(grad_out, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (1.0 - acts[i] * acts[i])
        return grads_w, grads_b

    # -- flat parameter views (checkpoints, finite differences) -------------

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def set_flat_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for p in self.weights + self.biases:
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != flat.size:
            raise ValueError(f"parameter vector length {flat.size}, expected {pos}")

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.weights + self.biases)

    def copy(self) -> "Mlp":
        clone = Mlp(self.layers, self.seed, self.activation)
        clone.set_flat_params(self.get_flat_params())
        return clone

    def save(self, path) -> None:
        payload = {
            "layers": self.layers,
            "activation": self.activation,
            "seed": self.seed,
            "params": self.get_flat_params().tolist(),
        }
        with open(path, "w") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "Mlp":
        with open(path) as f:
            payload = json.load(f)
        net = cls(payload["layers"], payload["seed"], payload["activation"])
        net.set_flat_params(np.array(payload["params"], dtype=float))
        return net


class Adam:
    """Adaptive-moment gradient descent over an Mlp's parameter list."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        params = net.weights + net.biases
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, net: Mlp, grads_w, grads_b) -> None:
        self.t += 1
        params = net.weights + net.biases
        grads = list(grads_w) + list(grads_b)
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
