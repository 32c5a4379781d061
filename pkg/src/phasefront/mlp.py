"""Small fully connected stack with hand-written backward pass.

Hidden layers use leaky-relu(0.1); the output layer is linear. Used by the
value-, policy- and Q-networks.
"""
from __future__ import annotations

import numpy as np

from . import numkernel as nk
from .errors import ShapeError


class Mlp:
    def __init__(self, dims, rng=None, prefix: str = ""):
        self.dims = tuple(int(d) for d in dims)
        self.prefix = prefix
        self.params: dict[str, np.ndarray] = {}
        rng = rng or nk.make_rng(0)
        for i, (din, dout) in enumerate(zip(self.dims, self.dims[1:])):
            self.params[f"{prefix}W{i}"] = nk.glorot_uniform(rng, din, dout)
            self.params[f"{prefix}b{i}"] = np.zeros(dout)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def forward(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dims[0]:
            raise ShapeError(f"input dim {x.shape[1]} != expected {self.dims[0]}")
        inputs, pres = [], []
        for i in range(self.n_layers):
            inputs.append(x)
            pre = x @ self.params[f"{self.prefix}W{i}"] + self.params[f"{self.prefix}b{i}"]
            pres.append(pre)
            x = nk.leaky_relu(pre) if i < self.n_layers - 1 else pre
        return x, {"inputs": inputs, "pres": pres}

    def backward(self, cache, dout: np.ndarray):
        grads = {}
        d = np.asarray(dout, dtype=np.float64)
        for i in reversed(range(self.n_layers)):
            dpre = d if i == self.n_layers - 1 else d * nk.leaky_relu_grad(cache["pres"][i])
            grads[f"{self.prefix}W{i}"] = cache["inputs"][i].T @ dpre
            grads[f"{self.prefix}b{i}"] = dpre.sum(axis=0)
            d = dpre @ self.params[f"{self.prefix}W{i}"].T
        return grads, d

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.dims = self.dims
        twin.prefix = self.prefix
        twin.params = {k: v.copy() for k, v in self.params.items()}
        return twin
