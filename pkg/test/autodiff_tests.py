import gc
import io
import os
import sys
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

from autodiff import (
    Adam,
    Parameter,
    Tensor,
    TensorHeader,
    backward,
    bce_loss,
    bilinear_sample,
    concat,
    conv2d,
    conv_transpose2d,
    gather_rows,
    l1_loss,
    layer_norm,
    leaky_relu,
    load_tensor,
    no_grad,
    relu,
    save_tensor,
    sigmoid,
    softmax,
    tensor_from_byte_stream,
    tensor_to_byte_stream,
    upsample2x,
)
from errors import DimensionError, NumericError

FD_STEP = 1e-6


def finite_difference(fn, params, step=FD_STEP):
    """Central differences of the scalar fn() with respect to every entry of every parameter."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = fn().item()
            flat[i] = keep - step
            lo = fn().item()
            flat[i] = keep
            g.reshape(-1)[i] = (hi - lo) / (2 * step)
        grads.append(g)
    return grads


class GradientCheckTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(7)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def check(self, fn, params, rtol=1e-5, atol=1e-7):
        for p in params:
            p.zero_grad()
        backward(fn())
        analytic = [p.grad.copy() for p in params]
        numeric = finite_difference(fn, params)
        for a, n in zip(analytic, numeric):
            assert_allclose(a, n, rtol=rtol, atol=atol)

    def param(self, *shape):
        return Parameter(self.rng.standard_normal(shape))

    def test_arithmetic_and_broadcasting(self):
        a, b = self.param(3, 4), self.param(4)
        self.check(lambda: ((a * b + a / (b * b + 2.0) - b) ** 2).sum(), [a, b])

    def test_matmul_and_reductions(self):
        a, b = self.param(3, 5), self.param(5, 2)
        self.check(lambda: (a @ b).mean(axis=0).sum() + (a @ b).exp().mean(), [a, b])

    def test_reshape_transpose_index(self):
        a = self.param(2, 3, 4)
        self.check(lambda: (a.transpose(2, 0, 1).reshape(4, 6)[1:3] ** 2).sum(), [a])

    def test_activations(self):
        a = self.param(4, 6)
        self.check(lambda: (relu(a) * sigmoid(a) + leaky_relu(a, 0.2) * 3.0).sum(), [a])

    def test_softmax(self):
        a = self.param(3, 5)
        w = self.rng.standard_normal((3, 5))
        self.check(lambda: (softmax(a) * w).sum(), [a])

    def test_layer_norm_with_affine(self):
        x, gain, bias = self.param(4, 6), self.param(6), self.param(6)
        w = self.rng.standard_normal((4, 6))
        self.check(lambda: (layer_norm(x, gain, bias) * w).sum(), [x, gain, bias])

    def test_concat_and_gather(self):
        a, b = self.param(3, 2), self.param(3, 4)
        rows = np.array([0, 2, 2, 1])
        self.check(lambda: (gather_rows(concat([a, b], axis=1), rows) ** 2).sum(), [a, b])

    def test_upsample(self):
        a = self.param(3, 2, 2)
        w = self.rng.standard_normal((6, 4, 2))
        self.check(lambda: (upsample2x(a) * w).sum(), [a])

    def test_conv2d_strided_padded(self):
        x, k, bias = self.param(5, 5, 2), self.param(3, 3, 2, 3), self.param(3)
        w = self.rng.standard_normal((3, 3, 3))
        self.assertEqual(conv2d(x, k, bias, stride=2, pad=1).shape, (3, 3, 3))
        self.check(lambda: (conv2d(x, k, bias, stride=2, pad=1) * w).sum(), [x, k, bias])

    def test_conv_transpose2d(self):
        x, k, bias = self.param(3, 3, 2), self.param(4, 4, 2, 3), self.param(3)
        w = self.rng.standard_normal((6, 6, 3))
        self.assertEqual(conv_transpose2d(x, k, bias, stride=2, pad=1).shape, (6, 6, 3))
        self.check(lambda: (conv_transpose2d(x, k, bias, stride=2, pad=1) * w).sum(), [x, k, bias])

    def test_bilinear_sample_plane_and_coordinates(self):
        plane = self.param(4, 5, 3)
        uv = Parameter(self.rng.uniform(-0.9, 0.9, (6, 2)))
        w = self.rng.standard_normal((6, 3))
        self.check(lambda: (bilinear_sample(plane, uv) * w).sum(), [plane, uv])

    def test_losses(self):
        logits = self.param(8)
        labels = (self.rng.random(8) > 0.5).astype(float)
        self.check(lambda: bce_loss(sigmoid(logits), labels), [logits])
        pred = self.param(5, 3)
        target = self.rng.standard_normal((5, 3))
        self.check(lambda: l1_loss(pred, target), [pred])


class FunctionalValueTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(11)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_softmax_rows_sum_to_one(self):
        out = softmax(Tensor(self.rng.standard_normal((4, 7)) * 50.0)).numpy()
        assert_allclose(out.sum(axis=1), np.ones(4), atol=1e-12)
        self.assertTrue(np.all(out >= 0))

    def test_layer_norm_statistics(self):
        out = layer_norm(Tensor(self.rng.standard_normal((5, 16)) * 3.0 + 2.0)).numpy()
        assert_allclose(out.mean(axis=-1), np.zeros(5), atol=1e-10)
        assert_allclose(out.std(axis=-1), np.ones(5), atol=1e-4)

    def test_layer_norm_needs_two_channels(self):
        with self.assertRaises(DimensionError):
            layer_norm(Tensor(np.ones((3, 1))))

    def test_bce_of_half_is_log_two(self):
        loss = bce_loss(Tensor(np.full(10, 0.5)), self.rng.integers(0, 2, 10))
        self.assertAlmostEqual(loss.item(), np.log(2.0), places=12)

    def test_bce_logit_gradient_is_prediction_minus_label(self):
        logits = Parameter(self.rng.standard_normal(12))
        labels = self.rng.integers(0, 2, 12).astype(float)
        backward(bce_loss(sigmoid(logits), labels))
        expected = (1.0 / (1.0 + np.exp(-logits.data)) - labels) / 12
        assert_allclose(logits.grad, expected, atol=1e-10)

    def test_bce_is_finite_at_saturated_predictions(self):
        loss = bce_loss(Tensor(np.array([0.0, 1.0])), np.array([1.0, 0.0]))
        self.assertTrue(np.isfinite(loss.item()))
        self.assertAlmostEqual(loss.item(), -np.log(1e-7), places=6)

    def test_l1_rejects_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            l1_loss(Tensor(np.zeros((4, 3))), np.zeros((3, 4)))

    def test_bilinear_hits_corners_and_clamps(self):
        plane = self.rng.standard_normal((3, 4, 2))
        uv = np.array([[-1.0, -1.0], [1.0, 1.0], [1.0, -1.0], [-5.0, 9.0]])
        out = bilinear_sample(Tensor(plane), Tensor(uv)).numpy()
        assert_allclose(out[0], plane[0, 0])
        assert_allclose(out[1], plane[2, 3])
        assert_allclose(out[2], plane[0, 3])
        assert_allclose(out[3], plane[2, 0])

    def test_bilinear_midpoint_is_average(self):
        plane = self.rng.standard_normal((2, 2, 3))
        out = bilinear_sample(Tensor(plane), Tensor(np.zeros((1, 2)))).numpy()
        assert_allclose(out[0], plane.reshape(4, 3).mean(axis=0))

    def test_conv2d_rejects_untileable_stride(self):
        with self.assertRaises(DimensionError):
            conv2d(Tensor(np.zeros((6, 6, 1))), Tensor(np.zeros((3, 3, 1, 1))), stride=2)

    def test_no_grad_records_nothing(self):
        p = Parameter(np.ones(3))
        with no_grad():
            out = (p * 2.0).sum()
        self.assertFalse(out.requires_grad)
        backward(out)
        assert_array_equal(p.grad, np.zeros(3))

    def test_non_finite_raises(self):
        with self.assertRaises(NumericError):
            Tensor(np.array([0.0, 1.0])).log()
        with self.assertRaises(NumericError):
            Tensor(np.array([1.0])) / Tensor(np.array([0.0]))

    def test_backward_needs_scalar(self):
        with self.assertRaises(DimensionError):
            backward(Parameter(np.ones(3)) * 2.0)

    def test_gradients_accumulate_across_uses(self):
        p = Parameter(np.array([2.0]))
        backward((p * p + p * 3.0).sum())
        assert_allclose(p.grad, [7.0])

    def test_assign_checks_shape(self):
        p = Parameter(np.zeros((2, 2)))
        with self.assertRaises(DimensionError):
            p.assign(np.zeros(4))


class ContainerTests(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        return super().setUp()

    def tearDown(self) -> None:
        self.tmp.cleanup()
        gc.collect(2)
        return super().tearDown()

    def test_header_line_then_little_endian_payload(self):
        arr = np.arange(6, dtype=np.float64).reshape(2, 3)
        stream = tensor_to_byte_stream(arr)
        line, payload = io.BytesIO(stream).readline(), stream[stream.index(b"\n") + 1:]
        self.assertEqual(TensorHeader.from_byte_stream(line), TensorHeader(shape=[2, 3], dtype="f64"))
        self.assertEqual(payload, arr.astype("<f8").tobytes())

    def test_file_round_trip_is_bit_exact(self):
        arr = np.random.default_rng(3).standard_normal((4, 5, 2))
        path = os.path.join(self.tmp.name, "a.f64")
        save_tensor(path, arr)
        assert_array_equal(load_tensor(path), arr)

    def test_f32_payload(self):
        arr = np.linspace(0, 1, 5)
        back = tensor_from_byte_stream(tensor_to_byte_stream(arr, "f32"))
        self.assertEqual(back.dtype, np.float32)
        assert_allclose(back, arr, atol=1e-7)

    def test_truncated_payload_rejected(self):
        stream = tensor_to_byte_stream(np.zeros(4))
        with self.assertRaises(ValueError):
            tensor_from_byte_stream(stream[:-3])

    def test_bad_header_rejected(self):
        with self.assertRaises(ValueError):
            tensor_from_byte_stream(b'{"shape": [1], "dtype": "i32"}\n\x00\x00\x00\x00')


class AdamTests(unittest.TestCase):

    def test_first_step_moves_by_learning_rate(self):
        p = Parameter(np.array([1.0, -2.0, 3.0]))
        opt = Adam([p], lr=0.01)
        opt.zero_grad()
        backward((p * np.array([2.0, -1.0, 0.5])).sum())
        opt.step()
        # bias-corrected first step is lr * sign(g)
        assert_allclose(p.data, [0.99, -1.99, 2.99], atol=1e-8)
        self.assertEqual(opt.t, 1)

    def test_minimizes_quadratic(self):
        p = Parameter(np.array([4.0, -3.0]))
        opt = Adam([p], lr=0.1)
        for _ in range(300):
            opt.zero_grad()
            backward((p * p).sum())
            opt.step()
        self.assertLess(np.abs(p.data).max(), 0.5)

    def test_load_state_checks_shapes(self):
        p = Parameter(np.zeros(3))
        opt = Adam([p])
        with self.assertRaises(ValueError):
            opt.load_state(1, [np.zeros(2)], [np.zeros(3)])
        opt.load_state(5, [np.ones(3)], [np.ones(3)])
        self.assertEqual(opt.t, 5)
        assert_array_equal(opt.m[0], np.ones(3))


if __name__ == "__main__":
    unittest.main()
