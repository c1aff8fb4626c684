import numpy as np
import pytest
from gradcheck import check_layer_gradients

from specklemon.nn import (
    Adam,
    CheckpointChecksumError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    Conv2d,
    Dense,
    Flatten,
    LayerError,
    LossError,
    MaxPool2d,
    OptimError,
    ReLU,
    ResidualBlock,
    RMSE_EPS,
    Tensor,
    read_checkpoint,
    rmse_loss,
    softmax_xent,
    write_checkpoint,
)


class TestConvForward:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((2, 1, 5, 7))
        conv = Conv2d(1, 1, 1, dtype=np.float64)
        conv.weight.data = np.ones((1, 1, 1, 1))
        conv.bias.data = np.zeros(1)
        assert np.allclose(conv.forward(x), x)

    def test_ones_kernel_constant_image(self):
        c = 2.5
        conv = Conv2d(1, 1, 3, padding=0, dtype=np.float64)
        conv.weight.data = np.ones((1, 1, 3, 3))
        conv.bias.data = np.zeros(1)
        out = conv.forward(np.full((1, 1, 6, 6), c))
        assert np.allclose(out, 9 * c)

    def test_against_naive_quadruple_loop(self, rng):
        x = rng.standard_normal((2, 3, 5, 5))
        conv = Conv2d(3, 4, 3, stride=1, padding=0, rng=rng, dtype=np.float64)
        out = conv.forward(x)
        w, b = conv.weight.data, conv.bias.data
        expected = np.zeros_like(out)
        for n in range(2):
            for o in range(4):
                for i in range(3):
                    for j in range(3):
                        expected[n, o, i, j] = b[o] + (
                            x[n, :, i: i + 3, j: j + 3] * w[o]
                        ).sum()
        assert np.abs(out - expected).max() < 1e-10

    def test_output_dims_formula(self):
        conv = Conv2d(1, 1, (3, 5), (2, 4), (1, 2))
        assert conv.out_shape(25, 255) == (13, 64)

    def test_shape_mismatch_rejected(self, rng):
        conv = Conv2d(3, 4, 3)
        with pytest.raises(LayerError, match="expected"):
            conv.forward(rng.standard_normal((1, 2, 5, 5)))

    def test_backward_without_forward_rejected(self, rng):
        conv = Conv2d(1, 1, 3)
        with pytest.raises(LayerError, match="without a forward"):
            conv.backward(rng.standard_normal((1, 1, 3, 3)))


class TestReLUAndPool:
    def test_relu_definition(self):
        relu = ReLU()
        out = relu.forward(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(out, [0.0, 0.0, 2.0])
        grad = relu.backward(np.ones(3))
        assert np.array_equal(grad, [0.0, 0.0, 1.0])  # subgradient at 0 is 0

    def test_maxpool_example(self):
        pool = MaxPool2d(2)
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        out = pool.forward(x)
        assert out.reshape(-1)[0] == 4.0
        grad = pool.backward(np.ones_like(out))
        assert np.array_equal(grad, [[[[0.0, 0.0], [0.0, 1.0]]]])

    def test_maxpool_tie_routes_to_first(self):
        pool = MaxPool2d(2)
        x = np.array([[[[5.0, 5.0], [5.0, 5.0]]]])
        pool.forward(x)
        grad = pool.backward(np.array([[[[1.0]]]]))
        assert np.array_equal(grad, [[[[1.0, 0.0], [0.0, 0.0]]]])

    def test_maxpool_window_max_property(self, rng):
        x = rng.standard_normal((2, 3, 8, 10))
        out = MaxPool2d(2).forward(x)
        assert out.max() <= x.max()
        for i in range(4):
            for j in range(5):
                windows = x[:, :, 2 * i: 2 * i + 2, 2 * j: 2 * j + 2]
                assert np.array_equal(out[:, :, i, j], windows.max(axis=(2, 3)))

    def test_maxpool_odd_size_drops_remainder(self, rng):
        x = rng.standard_normal((1, 1, 5, 7))
        out = MaxPool2d(2).forward(x)
        assert out.shape == (1, 1, 2, 3)


class TestResidualBlock:
    def test_zero_weights_pass_relu_of_input(self, rng):
        block = ResidualBlock(3, 3, rng=rng, dtype=np.float64)
        for p in block.params():
            p.data = np.zeros_like(p.data)
        x = rng.standard_normal((2, 3, 4, 6))
        assert np.array_equal(block.forward(x), np.maximum(x, 0.0))

    def test_shape_preserved(self, rng):
        block = ResidualBlock(4, 3, rng=rng)
        x = rng.standard_normal((2, 4, 5, 9)).astype(np.float32)
        assert block.forward(x).shape == x.shape


class TestGradients:
    """Central finite differences, double precision, over 10 seeds."""

    @pytest.mark.parametrize("seed", range(10))
    def test_conv_gradients(self, seed):
        r = np.random.default_rng(seed)
        x = r.standard_normal((2, 3, 6, 8)) + 0.1
        layer = Conv2d(3, 4, 3, stride=(1, 2), padding=1, rng=r, dtype=np.float64)
        check_layer_gradients(layer, x, seed=seed)

    @pytest.mark.parametrize("seed", range(10))
    def test_dense_gradients(self, seed):
        r = np.random.default_rng(seed)
        layer = Dense(12, 5, rng=r, dtype=np.float64)
        check_layer_gradients(layer, r.standard_normal((4, 12)), seed=seed)

    @pytest.mark.parametrize("seed", range(10))
    def test_residual_gradients(self, seed):
        r = np.random.default_rng(seed)
        layer = ResidualBlock(3, 3, rng=r, dtype=np.float64)
        # offset keeps test points away from the ReLU kinks
        x = r.standard_normal((2, 3, 5, 6)) + 0.5
        check_layer_gradients(layer, x, seed=seed)

    @pytest.mark.parametrize("seed", range(10))
    def test_relu_pool_flatten_gradients(self, seed):
        r = np.random.default_rng(seed)
        x = r.standard_normal((2, 2, 6, 6)) * 2.0 + 0.3
        for layer in (ReLU(), MaxPool2d(2), Flatten()):
            check_layer_gradients(layer, x, seed=seed)


class TestSoftmaxXent:
    def test_uniform_logits_is_log_k(self):
        loss, _ = softmax_xent(np.zeros((5, 3)), np.eye(3)[[0, 1, 2, 0, 1]])
        assert loss == pytest.approx(np.log(3.0), rel=1e-12)

    def test_saturated_margin_near_zero(self):
        logits = np.zeros((2, 3))
        logits[0, 1] = 100.0
        logits[1, 2] = 100.0
        loss, _ = softmax_xent(logits, np.eye(3)[[1, 2]])
        assert loss < 1e-8

    def test_gradient_matches_finite_differences(self, rng):
        logits = rng.standard_normal((4, 3))
        onehot = np.eye(3)[[0, 2, 1, 0]]
        _, grad = softmax_xent(logits, onehot)
        eps = 1e-6
        for i in range(logits.size):
            lp = logits.reshape(-1).copy()
            lp[i] += eps
            lm = logits.reshape(-1).copy()
            lm[i] -= eps
            fd = (softmax_xent(lp.reshape(4, 3), onehot)[0]
                  - softmax_xent(lm.reshape(4, 3), onehot)[0]) / (2 * eps)
            assert abs(fd - grad.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fd))

    def test_softmax_rows_sum_to_one(self, rng):
        logits = rng.standard_normal((6, 4)) * 10
        onehot = np.eye(4)[rng.integers(0, 4, size=6)]
        _, grad = softmax_xent(logits, onehot)
        probs = grad * 6 + onehot
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_rejects_single_class(self):
        with pytest.raises(LossError, match="2 classes"):
            softmax_xent(np.zeros((2, 1)), np.ones((2, 1)))

    def test_rejects_invalid_onehot(self):
        with pytest.raises(LossError, match="unit"):
            softmax_xent(np.zeros((2, 3)), np.full((2, 3), 1 / 3))


class TestRmseLoss:
    def test_zero_error_floor(self):
        t = np.array([1.0, 2.0, 3.0])
        loss, _ = rmse_loss(t, t)
        assert loss <= 1e-6

    def test_constant_offset(self):
        pred = np.zeros(5) + 0.75
        loss, _ = rmse_loss(pred, np.zeros(5))
        assert abs(loss - 0.75) < 1e-9

    def test_gradient_matches_finite_differences(self, rng):
        pred = rng.standard_normal(6) + 2.0
        target = rng.standard_normal(6)
        _, grad = rmse_loss(pred, target)
        eps = 1e-6
        for i in range(6):
            pp = pred.copy()
            pp[i] += eps
            pm = pred.copy()
            pm[i] -= eps
            fd = (rmse_loss(pp, target)[0] - rmse_loss(pm, target)[0]) / (2 * eps)
            assert abs(fd - grad[i]) < 1e-4 * max(1e-3, abs(fd))


def reference_adam(x0, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar reference implementation used as the oracle."""
    x, m, v = x0, 0.0, 0.0
    trajectory = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        trajectory.append(x)
    return trajectory


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = Tensor(np.array([1.0, -2.0]), name="p")
        opt = Adam([p])
        opt.step()
        assert np.array_equal(p.data, [1.0, -2.0])
        assert opt.t == 1

    def test_first_step_magnitude_lr(self):
        for g in (0.5, -3.0):
            p = Tensor(np.array([1.0]), name="p")
            opt = Adam([p], lr=1e-3)
            p.grad[...] = g
            opt.step()
            update = p.data[0] - 1.0
            assert np.sign(update) == -np.sign(g)
            assert abs(update) == pytest.approx(1e-3, rel=1e-4)

    def test_quadratic_descent_matches_reference(self):
        p = Tensor(np.array([1.0]), name="x")
        opt = Adam([p], lr=0.1)
        ours = []
        for _ in range(100):
            p.grad[...] = 2.0 * p.data
            opt.step()
            ours.append(float(p.data[0]))
        ref = reference_adam(1.0, lambda x: 2.0 * x, lr=0.1, steps=100)
        assert np.allclose(ours, ref, atol=1e-12)
        assert abs(ours[-1]) < 0.1
        # |x| decreases monotonically until it first dips below 0.1
        absx = np.abs([1.0] + ours)
        first_below = int(np.argmax(absx < 0.1))
        assert np.all(np.diff(absx[: first_below + 1]) < 0)

    def test_nonfinite_gradient_named(self):
        p = Tensor(np.ones(3), name="stem1.weight")
        opt = Adam([p])
        p.grad[...] = np.nan
        with pytest.raises(OptimError, match="stem1.weight"):
            opt.step()

    def test_state_roundtrip_continues_identically(self):
        def run(steps, reload_at=None):
            p = Tensor(np.array([1.0, -0.5]), name="p")
            opt = Adam([p], lr=0.05)
            for t in range(steps):
                if reload_at is not None and t == reload_at:
                    state = opt.state_dict()
                    p2 = Tensor(p.data.copy(), name="p")
                    opt = Adam([p2], lr=0.05)
                    opt.load_state_dict(state)
                    p = p2
                p.grad[...] = p.data + 0.3
                opt.step()
            return p.data.copy()
        assert np.array_equal(run(20), run(20, reload_at=11))


class TestCheckpointContainer:
    def test_roundtrip(self, tmp_path, rng):
        arrays = [("a.weight", rng.random((3, 4)).astype(np.float32)),
                  ("a.bias", rng.random(4).astype(np.float32))]
        path = tmp_path / "m.ckpt"
        write_checkpoint(path, {"kind": "test", "note": 1}, arrays)
        meta, back = read_checkpoint(path)
        assert meta["kind"] == "test"
        assert [d["name"] for d in meta["arrays"]] == ["a.weight", "a.bias"]
        for (_, a), b in zip(arrays, back):
            assert np.array_equal(a, b)

    def test_truncation(self, tmp_path):
        path = tmp_path / "m.ckpt"
        write_checkpoint(path, {}, [("w", np.zeros(10, dtype=np.float32))])
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointTruncatedError):
            read_checkpoint(path)

    def test_corruption(self, tmp_path):
        path = tmp_path / "m.ckpt"
        write_checkpoint(path, {}, [("w", np.ones(10, dtype=np.float32))])
        blob = bytearray(path.read_bytes())
        blob[-40] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointChecksumError):
            read_checkpoint(path)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"SPKLCKPT2\n" + b"\x00" * 64)
        with pytest.raises(CheckpointVersionError):
            read_checkpoint(path)
