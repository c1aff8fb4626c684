"""Layers with explicit forward/backward passes.

No general autodiff graph: the architecture is a fixed layer chain, so each
layer caches what its own backward pass needs. Convolutions run as im2col
matrix products; the input gradient is computed as a stride-dilated
correlation with the flipped kernel, which keeps the backward pass on the
same GEMM path.
"""

import numpy as np

from .tensor import Tensor

__all__ = [
    "LayerError",
    "Layer",
    "Conv2d",
    "ReLU",
    "MaxPool2d",
    "Dense",
    "Flatten",
    "ResidualBlock",
]


class LayerError(ValueError):
    """Shape mismatch or unsupported layer configuration."""


def _pair(v) -> "tuple[int, int]":
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise LayerError(f"expected an int or a pair, got {v}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int):
    """Patch tensor of a padded NCHW batch: (N, C*kh*kw, ho*wo).

    The copy runs in (n, c, u, v, ho, wo) order so reads stay nearly
    sequential; the batched GEMM then consumes it without further
    transposes.
    """
    n, c, h, w = xp.shape
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    sn, sc, sy, sx = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, sy, sx, sy * sh, sx * sw),
        writeable=False,
    )
    cols = np.ascontiguousarray(view)
    return cols.reshape(n, c * kh * kw, ho * wo), ho, wo


class Layer:
    """Base: forward caches context, backward consumes it exactly once."""

    def params(self) -> "list[Tensor]":
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self, attr: str):
        ctx = getattr(self, attr, None)
        if ctx is None:
            raise LayerError(f"{type(self).__name__}.backward called without a forward pass")
        setattr(self, attr, None)
        return ctx


class Conv2d(Layer):
    """Cross-correlation with stride and zero padding, NCHW layout.

    Output spatial dims are floor((H + 2p - k) / s) + 1. Weights are
    He-normal with fan-in scaling, biases zero.
    """

    def __init__(self, in_channels, out_channels, kernel=3, stride=1, padding=0,
                 rng=None, dtype=np.float32, name="conv"):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kh, self.kw = _pair(kernel)
        self.sh, self.sw = _pair(stride)
        self.ph, self.pw = _pair(padding)
        if min(self.kh, self.kw, self.sh, self.sw) < 1 or min(self.ph, self.pw) < 0:
            raise LayerError(f"bad conv geometry k={kernel} s={stride} p={padding}")
        if self.ph > self.kh - 1 or self.pw > self.kw - 1:
            raise LayerError("padding larger than kernel-1 is not supported")
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = self.in_channels * self.kh * self.kw
        w = rng.standard_normal((self.out_channels, self.in_channels, self.kh, self.kw))
        self.weight = Tensor((w * np.sqrt(2.0 / fan_in)).astype(dtype), name=f"{name}.weight")
        self.bias = Tensor(np.zeros(self.out_channels, dtype=dtype), name=f"{name}.bias")
        self._ctx = None

    def params(self):
        return [self.weight, self.bias]

    def out_shape(self, h: int, w: int) -> "tuple[int, int]":
        ho = (h + 2 * self.ph - self.kh) // self.sh + 1
        wo = (w + 2 * self.pw - self.kw) // self.sw + 1
        return ho, wo

    def _pad(self, x):
        if self.ph or self.pw:
            return np.pad(x, ((0, 0), (0, 0), (self.ph, self.ph), (self.pw, self.pw)))
        return x

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise LayerError(
                f"{self.weight.name}: expected (N, {self.in_channels}, H, W), got {x.shape}"
            )
        ho, wo = self.out_shape(x.shape[2], x.shape[3])
        if ho < 1 or wo < 1:
            raise LayerError(f"{self.weight.name}: input {x.shape} smaller than kernel")
        xp = self._pad(x)
        cols, ho, wo = _im2col(xp, self.kh, self.kw, self.sh, self.sw)
        wmat = self.weight.data.reshape(self.out_channels, -1)
        out = np.matmul(wmat, cols) + self.bias.data[:, None]
        self._ctx = (xp, x.shape)
        return out.reshape(x.shape[0], self.out_channels, ho, wo)

    def backward(self, dout, need_dx=True):
        xp, x_shape = self._take_cache("_ctx")
        n, _, ho, wo = dout.shape
        dout2 = dout.reshape(n, self.out_channels, ho * wo)

        cols, _, _ = _im2col(xp, self.kh, self.kw, self.sh, self.sw)
        dw = np.matmul(dout2, cols.transpose(0, 2, 1)).sum(axis=0)
        self.weight.grad += dw.reshape(self.weight.shape)
        self.bias.grad += dout2.sum(axis=(0, 2))
        if not need_dx:
            return None

        # dx: dilate dout by the stride, pad by (k-1), correlate with the
        # flipped kernel transposed over channels; this yields the gradient
        # on the padded input, so crop the pad margins afterwards.
        hd = (ho - 1) * self.sh + 1
        wd = (wo - 1) * self.sw + 1
        dd = np.zeros(
            (n, self.out_channels, hd + 2 * (self.kh - 1), wd + 2 * (self.kw - 1)),
            dtype=dout.dtype,
        )
        dd[:, :, self.kh - 1: self.kh - 1 + hd: self.sh,
           self.kw - 1: self.kw - 1 + wd: self.sw] = dout
        wflip = self.weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        wflip = np.ascontiguousarray(wflip).reshape(self.in_channels, -1)
        cols_d, hp, wp = _im2col(dd, self.kh, self.kw, 1, 1)
        dxp = np.matmul(wflip, cols_d).reshape(n, self.in_channels, hp, wp)

        # hp/wp can fall short of the padded input when the strided forward
        # left a remainder; those rows/cols got no gradient.
        h, w = x_shape[2], x_shape[3]
        dx = np.zeros((n, self.in_channels, h, w), dtype=dout.dtype)
        hx = min(h, hp - self.ph)
        wx = min(w, wp - self.pw)
        dx[:, :, :hx, :wx] = dxp[:, :, self.ph: self.ph + hx, self.pw: self.pw + wx]
        return dx


class ReLU(Layer):
    """max(x, 0); the subgradient at exactly 0 is taken as 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, dout):
        mask = self._take_cache("_mask")
        return dout * mask


class MaxPool2d(Layer):
    """Non-overlapping max pooling; gradient routes to the first argmax.

    Trailing rows/columns that do not fill a window are dropped (and
    receive zero gradient).
    """

    def __init__(self, kernel=2):
        self.kh, self.kw = _pair(kernel)
        if min(self.kh, self.kw) < 1:
            raise LayerError(f"bad pool kernel {kernel}")
        self._ctx = None

    def forward(self, x):
        if x.ndim != 4:
            raise LayerError(f"maxpool expects NCHW, got shape {x.shape}")
        n, c, h, w = x.shape
        ho, wo = h // self.kh, w // self.kw
        if ho < 1 or wo < 1:
            raise LayerError(f"maxpool window {(self.kh, self.kw)} larger than input {x.shape}")
        xc = x[:, :, : ho * self.kh, : wo * self.kw]
        windows = xc.reshape(n, c, ho, self.kh, wo, self.kw).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(n, c, ho, wo, self.kh * self.kw)
        idx = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        self._ctx = (x.shape, idx)
        return out

    def backward(self, dout):
        x_shape, idx = self._take_cache("_ctx")
        n, c, h, w = x_shape
        ho, wo = dout.shape[2], dout.shape[3]
        dwin = np.zeros((n, c, ho, wo, self.kh * self.kw), dtype=dout.dtype)
        np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
        dwin = dwin.reshape(n, c, ho, wo, self.kh, self.kw).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, :, : ho * self.kh, : wo * self.kw] = dwin.reshape(n, c, ho * self.kh, wo * self.kw)
        return dx


class Dense(Layer):
    """Affine map x @ W + b on (N, in) inputs."""

    def __init__(self, in_features, out_features, rng=None, dtype=np.float32, name="dense"):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        rng = rng if rng is not None else np.random.default_rng(0)
        w = rng.standard_normal((self.in_features, self.out_features))
        self.weight = Tensor((w * np.sqrt(2.0 / self.in_features)).astype(dtype), name=f"{name}.weight")
        self.bias = Tensor(np.zeros(self.out_features, dtype=dtype), name=f"{name}.bias")
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise LayerError(
                f"{self.weight.name}: expected (N, {self.in_features}), got {x.shape}"
            )
        self._x = x
        return x @ self.weight.data + self.bias.data

    def backward(self, dout):
        x = self._take_cache("_x")
        self.weight.grad += x.T @ dout
        self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.data.T


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        shape = self._take_cache("_shape")
        return dout.reshape(shape)


class ResidualBlock(Layer):
    """ReLU(conv2(ReLU(conv1(x))) + x) with an identity skip.

    Both convolutions preserve shape (stride 1, same padding), so the block
    input and output channel counts are equal by construction.
    """

    def __init__(self, channels, kernel=3, rng=None, dtype=np.float32, name="res"):
        kh, kw = _pair(kernel)
        if kh % 2 == 0 or kw % 2 == 0:
            raise LayerError(f"residual block kernel must be odd, got {kernel}")
        self.conv1 = Conv2d(channels, channels, kernel, 1, (kh // 2, kw // 2),
                            rng=rng, dtype=dtype, name=f"{name}.conv1")
        self.conv2 = Conv2d(channels, channels, kernel, 1, (kh // 2, kw // 2),
                            rng=rng, dtype=dtype, name=f"{name}.conv2")
        self.relu1 = ReLU()
        self._out_mask = None

    def params(self):
        return self.conv1.params() + self.conv2.params()

    def forward(self, x):
        y = self.conv2.forward(self.relu1.forward(self.conv1.forward(x)))
        if y.shape != x.shape:
            raise LayerError(
                f"{self.conv1.weight.name}: residual branch shape {y.shape} != input {x.shape}"
            )
        s = y + x
        self._out_mask = s > 0
        return np.where(self._out_mask, s, 0)

    def backward(self, dout):
        mask = self._take_cache("_out_mask")
        ds = dout * mask
        dx_branch = self.conv1.backward(self.relu1.backward(self.conv2.backward(ds)))
        return dx_branch + ds
