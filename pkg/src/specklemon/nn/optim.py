"""Adam optimizer with bias correction."""

import numpy as np

from .tensor import Tensor

__all__ = ["OptimError", "Adam"]


class OptimError(ValueError):
    """Optimizer misuse (shape drift, non-finite gradients)."""


class Adam:
    """Standard Adam: first/second moment tracking with bias correction.

    State (t, m, v) is exposed through state_dict/load_state_dict so a
    training run can be resumed on the exact trajectory.
    """

    def __init__(self, params: "list[Tensor]", lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if not params:
            raise OptimError("no parameters to optimize")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g.shape != p.data.shape:
                raise OptimError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {p.name!r}")
            if not np.isfinite(g).all():
                raise OptimError(f"non-finite gradient for parameter {p.name!r}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": [m.copy() for m in self.m],
            "v": [v.copy() for v in self.v],
        }

    def load_state_dict(self, state: dict):
        if len(state["m"]) != len(self.params) or len(state["v"]) != len(self.params):
            raise OptimError("optimizer state does not match the parameter list")
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            if dst.shape != src.shape:
                raise OptimError(f"moment shape {src.shape} != parameter shape {dst.shape}")
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            if dst.shape != src.shape:
                raise OptimError(f"moment shape {src.shape} != parameter shape {dst.shape}")
            dst[...] = src
