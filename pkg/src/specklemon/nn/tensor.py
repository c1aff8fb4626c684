"""Parameter container for the fixed-topology network stack."""

import numpy as np

__all__ = ["Tensor"]


class Tensor:
    """Dense n-d array with a same-shape gradient slot.

    Activations flow through the layers as plain ndarrays; Tensor wraps the
    trainable parameters so optimizers can address them by name.
    """

    __slots__ = ("name", "data", "grad")

    def __init__(self, data, name: str = ""):
        self.data = np.asarray(data)
        if self.data.ndim == 0:
            self.data = self.data.reshape(1)
        self.grad = np.zeros_like(self.data)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor({self.name!r}, shape={self.data.shape}, dtype={self.data.dtype})"
