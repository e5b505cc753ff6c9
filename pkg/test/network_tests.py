import gc
import os
import sys
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

from autodiff import Parameter, Tensor, backward
from encoder import Encoder, InputBundle, encode, patchify, unpatchify
from errors import ConfigError, DimensionError
from layers import CrossDecoderLayer, EncoderBlock, HourglassLite, Linear, MLPHead, MultiHeadAttention
from run_config import model_preset
from triplane_decoder import (CrossPlaneDecoder, PrincipalDecoder, PrincipalRefiner, TriPlane, decode_cross,
                              decode_principal, merge_triplane, no_refine, refine_principal, split_triplane)


def random_bundle(rng, res):
    image = rng.random((res, res, 3))
    front = rng.standard_normal((res, res, 3))
    front /= np.linalg.norm(front, axis=-1, keepdims=True)
    back = front * np.array([1.0, 1.0, -1.0])
    return InputBundle(image, front, back, np.ones((res, res), dtype=bool))


class LayerTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(5)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_attention_weights_are_row_stochastic(self):
        attn = MultiHeadAttention(8, 2, self.rng)
        out = attn(Tensor(self.rng.standard_normal((5, 8))), Tensor(self.rng.standard_normal((3, 8))))
        self.assertEqual(out.shape, (5, 8))
        self.assertEqual(attn._last_weights.shape, (2, 5, 3))
        assert_allclose(attn._last_weights.sum(axis=-1), np.ones((2, 5)), atol=1e-12)

    def test_attention_rejects_indivisible_heads(self):
        with self.assertRaises(ConfigError):
            MultiHeadAttention(10, 3, self.rng)

    def test_self_attention_block_is_permutation_equivariant(self):
        block = EncoderBlock(8, 2, 2, self.rng)
        x = self.rng.standard_normal((6, 8))
        perm = self.rng.permutation(6)
        assert_allclose(block(Tensor(x[perm])).numpy(), block(Tensor(x)).numpy()[perm], atol=1e-12)

    def test_cross_layer_reads_the_latent(self):
        layer = CrossDecoderLayer(8, 2, 2, self.rng)
        s = Tensor(self.rng.standard_normal((4, 8)))
        a = layer(s, Tensor(self.rng.standard_normal((4, 8)))).numpy()
        b = layer(s, Tensor(self.rng.standard_normal((4, 8)))).numpy()
        self.assertGreater(np.abs(a - b).max(), 1e-6)

    def test_parameter_names_follow_construction_order(self):
        head = MLPHead(5, [4, 1], self.rng)
        names = [n for n, _ in head.named_parameters()]
        self.assertEqual(names, ["layers.0.weight", "layers.0.bias", "layers.1.weight", "layers.1.bias"])
        self.assertEqual(head.num_parameters(), 5 * 4 + 4 + 4 + 1)

    def test_mlp_head_outputs_probabilities(self):
        head = MLPHead(7, [6, 3, 1], self.rng)
        out = head(Tensor(self.rng.standard_normal((10, 7)) * 10)).numpy()
        self.assertEqual(out.shape, (10, 1))
        self.assertTrue(np.all((out > 0) & (out < 1)))

    def test_hourglass_preserves_spatial_size(self):
        net = HourglassLite(3, 4, 5, self.rng, stacks=2)
        self.assertEqual(net(Tensor(self.rng.standard_normal((8, 8, 3)))).shape, (8, 8, 5))

    def test_linear_gradient_flows(self):
        lin = Linear(3, 2, self.rng)
        backward((lin(Tensor(np.ones((4, 3)))) ** 2).sum())
        self.assertGreater(np.abs(lin.weight.grad).sum(), 0)
        self.assertEqual(lin.bias.grad.shape, (2,))


class EncoderTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(9)
        self.cfg = model_preset("micro")
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_patchify_raster_order(self):
        bundle = random_bundle(self.rng, 8)
        tokens = patchify(bundle, 4)
        self.assertEqual(tokens.shape, (4, 4 * 4 * 9))
        assert_array_equal(tokens[0], bundle.stacked()[:4, :4].reshape(-1))
        assert_array_equal(tokens[1], bundle.stacked()[:4, 4:].reshape(-1))
        assert_array_equal(tokens[2], bundle.stacked()[4:, :4].reshape(-1))

    def test_unpatchify_inverts_patchify(self):
        bundle = random_bundle(self.rng, 8)
        assert_array_equal(unpatchify(patchify(bundle, 2), 2, 8, 8), bundle.stacked())

    def test_patchify_rejects_indivisible_size(self):
        with self.assertRaises(ConfigError):
            patchify(random_bundle(self.rng, 8), 3)

    def test_bundle_shape_checks(self):
        with self.assertRaises(DimensionError):
            InputBundle(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)), np.zeros((4, 4, 3)), np.zeros((8, 8)))

    def test_bundle_validate(self):
        bundle = random_bundle(self.rng, 8)
        bundle.validate()
        bundle.mask[0, 0] = False
        with self.assertRaises(ValueError):
            bundle.validate()

    def test_encoder_latent_shape(self):
        enc = Encoder(self.cfg, self.rng)
        h = encode(random_bundle(self.rng, 8), enc)
        self.assertEqual(h.shape, (self.cfg.tokens, self.cfg.dim))

    def test_zero_depth_encoder_passes_embedded_patches_through(self):
        enc = Encoder(self.cfg.replace(enc_depth=0), self.rng)
        bundle = random_bundle(self.rng, 8)
        expected = patchify(bundle, self.cfg.patch) @ enc.proj.weight.data + enc.proj.bias.data + enc.pos.data
        assert_allclose(encode(bundle, enc).numpy(), expected, atol=1e-12)

    def test_encoder_is_equivariant_to_patch_order(self):
        enc = Encoder(self.cfg, self.rng)
        patches = patchify(random_bundle(self.rng, 8), self.cfg.patch)
        pos = enc.pos.data
        perm = np.array([2, 0, 3, 1])
        moved = enc.encode_tokens(Tensor(patches[perm]), Tensor(pos[perm])).numpy()
        assert_allclose(moved, enc.encode_tokens(Tensor(patches)).numpy()[perm], atol=1e-12)

    def test_encoder_rejects_wrong_resolution(self):
        enc = Encoder(self.cfg, self.rng)
        with self.assertRaises(ConfigError):
            enc(random_bundle(self.rng, 16))


class DecoderTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(13)
        self.cfg = model_preset("micro")
        self.h = Tensor(self.rng.standard_normal((self.cfg.tokens, self.cfg.dim)))
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_plane_shapes(self):
        R, C = self.cfg.plane_res, self.cfg.channels
        f_xy = decode_principal(self.h, PrincipalDecoder(self.cfg, self.rng))
        cross = CrossPlaneDecoder(self.cfg, self.rng)
        f_yz = decode_cross(cross.z, self.h, cross)
        self.assertEqual(f_xy.shape, (R, R, C))
        self.assertEqual(f_yz.shape, (R, R, C))
        image = self.rng.random((self.cfg.image_res, self.cfg.image_res, 3))
        refined = refine_principal(image, f_xy, PrincipalRefiner(self.cfg, self.rng))
        self.assertEqual(refined.shape, (2 * R, 2 * R, C))

    def test_cross_decoder_depends_on_embedding(self):
        cross = CrossPlaneDecoder(self.cfg, self.rng)
        a = cross(self.h).numpy()
        b = cross(self.h, Tensor(self.rng.standard_normal(self.h.shape))).numpy()
        self.assertGreater(np.abs(a - b).max(), 1e-6)

    def test_cross_decoder_rejects_mismatched_embedding(self):
        cross = CrossPlaneDecoder(self.cfg, self.rng)
        with self.assertRaises(ConfigError):
            cross(self.h, Tensor(np.zeros((self.cfg.tokens + 1, self.cfg.dim))))
        with self.assertRaises(ConfigError):
            cross(self.h, Tensor(np.zeros((self.cfg.tokens, self.cfg.dim + 2))))

    def test_two_cross_decoders_are_independent(self):
        yz, xz = CrossPlaneDecoder(self.cfg, self.rng), CrossPlaneDecoder(self.cfg, self.rng)
        self.assertGreater(np.abs(yz(self.h).numpy() - xz(self.h).numpy()).max(), 1e-6)

    def test_embedding_gradient_matches_finite_differences(self):
        cross = CrossPlaneDecoder(self.cfg, self.rng)
        w = self.rng.standard_normal((self.cfg.plane_res, self.cfg.plane_res, self.cfg.channels))
        cross.zero_grad()
        backward((cross(self.h) * w).sum())
        analytic = cross.z.grad.copy()
        flat = cross.z.data.reshape(-1)
        for i in range(0, flat.size, 7):
            keep = flat[i]
            flat[i] = keep + 1e-6
            hi = (cross(self.h) * w).sum().item()
            flat[i] = keep - 1e-6
            lo = (cross(self.h) * w).sum().item()
            flat[i] = keep
            self.assertAlmostEqual(analytic.reshape(-1)[i], (hi - lo) / 2e-6, delta=1e-5 * (1 + abs(analytic.reshape(-1)[i])))

    def test_principal_plane_sees_every_token(self):
        decoder = PrincipalDecoder(self.cfg, self.rng)
        base = decode_principal(self.h, decoder).numpy()
        for i in range(self.cfg.tokens):
            h = self.h.numpy().copy()
            h[i] += 0.1 * self.rng.standard_normal(self.cfg.dim)
            diff = np.abs(decode_principal(Tensor(h), decoder).numpy() - base).max(axis=-1)
            self.assertTrue(np.all(diff > 1e-12), msg=f"token {i}")

    def test_single_key_latent_gives_a_constant_plane(self):
        cfg = self.cfg.replace(plane_patch=1, use_bias=False, use_norm=False)
        cross = CrossPlaneDecoder(cfg, self.rng)
        z = Tensor(np.tile(self.rng.standard_normal((1, cfg.dim)), (cfg.tokens, 1)))
        plane = decode_cross(z, Tensor(self.rng.standard_normal((1, cfg.dim))), cross).numpy()
        self.assertEqual(plane.shape, (cfg.plane_res, cfg.plane_res, cfg.channels))
        self.assertLess(plane.reshape(-1, cfg.channels).var(axis=0).max(), 1e-10)

    def test_split_then_merge_restores_channels(self):
        planes = TriPlane(*(Tensor(self.rng.standard_normal((4, 4, 6))) for _ in range(3)),
                          Tensor(self.rng.standard_normal((8, 8, 6))))
        pair = split_triplane(planes)
        self.assertEqual(pair.sq.channels, 3)
        assert_array_equal(pair.pq.f_yz.numpy(), planes.f_yz.numpy()[:, :, 3:])
        merged = merge_triplane(pair)
        for name, plane in planes.planes().items():
            assert_array_equal(merged.planes()[name].numpy(), plane.numpy())

    def test_triplane_rejects_bad_refined_size(self):
        base = Tensor(np.zeros((4, 4, 2)))
        with self.assertRaises(ConfigError):
            TriPlane(base, base, base, Tensor(np.zeros((4, 4, 2))))

    def test_no_refine_doubles_nearest(self):
        f = self.rng.standard_normal((2, 2, 1))
        out = no_refine(Tensor(f)).numpy()
        self.assertEqual(out.shape, (4, 4, 1))
        assert_array_equal(out[2:, :2], np.full((2, 2, 1), f[1, 0]))


if __name__ == "__main__":
    unittest.main()
