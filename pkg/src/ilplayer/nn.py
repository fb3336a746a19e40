"""Dense MLP with hand-written backprop, Adam, and losses on normalized solutions."""

from __future__ import annotations

import enum

import numpy as np

from .lattice import Lattice

HUBER_BETA = 0.3


class Mlp:
    """ReLU network; optional sigmoid output rescaled to ``[out_low, out_high]``."""

    def __init__(self, dims, rng=None, sigmoid_output=False, out_low=0.0, out_high=1.0):
        rng = np.random.default_rng() if rng is None else rng
        self.dims = [int(d) for d in dims]
        self.sigmoid_output = sigmoid_output
        self.out_low = np.broadcast_to(np.asarray(out_low, dtype=float), (self.dims[-1],)).copy()
        self.out_high = np.broadcast_to(np.asarray(out_high, dtype=float), (self.dims[-1],)).copy()
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x):
        """Return ``(output, cache)`` for a batch ``x`` of shape ``(B, dims[0])``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dims[0]:
            raise ValueError(f"expected input width {self.dims[0]}, got {x.shape[1]}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        out = h
        if self.sigmoid_output:
            sig = 1.0 / (1.0 + np.exp(-h))
            acts.append(sig)
            out = self.out_low + (self.out_high - self.out_low) * sig
        return out, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout) -> list[np.ndarray]:
        """Gradients aligned with :meth:`parameters` given ``dL/doutput``."""
        acts = cache
        g = np.atleast_2d(np.asarray(dout, dtype=float))
        if self.sigmoid_output:
            sig = acts[-1]
            g = g * (self.out_high - self.out_low) * sig * (1.0 - sig)
            acts = acts[:-1]
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (acts[i + 1] > 0)
            grads.append(g.sum(axis=0))
            grads.append(acts[i].T @ g)
            g = g @ self.weights[i].T
        grads.reverse()
        return grads

    def input_gradient(self, cache, dout):
        acts = cache
        g = np.atleast_2d(np.asarray(dout, dtype=float))
        if self.sigmoid_output:
            sig = acts[-1]
            g = g * (self.out_high - self.out_low) * sig * (1.0 - sig)
            acts = acts[:-1]
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (acts[i + 1] > 0)
            g = g @ self.weights[i].T
        return g

    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "sigmoid_output": self.sigmoid_output,
            "out_low": self.out_low.tolist(),
            "out_high": self.out_high.tolist(),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        mlp = cls(data["dims"], np.random.default_rng(0), data["sigmoid_output"],
                  data["out_low"], data["out_high"])
        for i, (w, b) in enumerate(zip(data["weights"], data["biases"])):
            mlp.weights[i] = np.asarray(w, dtype=float).reshape(mlp.weights[i].shape)
            mlp.biases[i] = np.asarray(b, dtype=float)
        return mlp


class Adam:
    """Adam with bias correction; updates the parameter arrays in place."""

    def __init__(self, params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameters")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = np.asarray(g, dtype=float).reshape(p.shape)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "t": self.t,
            "m": [a.ravel().tolist() for a in self.m],
            "v": [a.ravel().tolist() for a in self.v],
        }

    def load_state_dict(self, state: dict):
        self.lr, self.beta1, self.beta2 = state["lr"], state["beta1"], state["beta2"]
        self.eps, self.t = state["eps"], state["t"]
        for i, p in enumerate(self.params):
            self.m[i] = np.asarray(state["m"][i], dtype=float).reshape(p.shape)
            self.v[i] = np.asarray(state["v"][i], dtype=float).reshape(p.shape)


class LossKind(str, enum.Enum):
    MSE = "mse"
    L1 = "l1"
    HUBER = "huber"
    L0 = "l0"


def loss_and_gradient(kind: LossKind | str, y, y_star):
    """Mean per-coordinate loss and its gradient with respect to ``y``.

    L0 has no gradient; it uses ``sign(y - y*) / n`` on mismatched coordinates.
    """
    y = np.asarray(y, dtype=float)
    e = y - np.asarray(y_star, dtype=float)
    n = e.shape[-1]
    kind = LossKind(kind)
    if kind == LossKind.MSE:
        return float(np.mean(e**2)), 2.0 * e / n
    if kind == LossKind.L1:
        return float(np.mean(np.abs(e))), np.sign(e) / n
    if kind == LossKind.HUBER:
        small = np.abs(e) < HUBER_BETA
        val = np.where(small, 0.5 * e**2 / HUBER_BETA, np.abs(e) - 0.5 * HUBER_BETA)
        grad = np.where(small, e / HUBER_BETA, np.sign(e))
        return float(np.mean(val)), grad / n
    wrong = e != 0
    return float(np.mean(wrong)), np.sign(e) * wrong / n


def normalize_solution(y, low, high) -> np.ndarray:
    """Affine map of the box ``[low, high]`` onto ``[-0.5, 0.5]``."""
    return Lattice.normalized(low, high).to_frame(y)


def denormalize_solution(z, low, high) -> np.ndarray:
    return Lattice.normalized(low, high).from_frame(z)


def normalize_cost(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    norm = np.linalg.norm(c, axis=-1, keepdims=True)
    if np.any(norm <= 0):
        raise ValueError("cannot normalize a zero cost vector")
    return c / norm


def normalize_cost_backward(c, grad) -> np.ndarray:
    """Pull a gradient on ``c / ||c||`` back to ``c``."""
    c = np.asarray(c, dtype=float)
    grad = np.asarray(grad, dtype=float)
    norm = np.linalg.norm(c, axis=-1, keepdims=True)
    unit = c / norm
    return (grad - unit * np.sum(unit * grad, axis=-1, keepdims=True)) / norm
