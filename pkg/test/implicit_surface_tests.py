import gc
import os
import sys
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

from autodiff import Tensor
from errors import DimensionError, NumericError
from feature_query import FusedFeature
from implicit_surface import (EVAL_BLOCK, FieldHeads, HeadsField, blocked_apply, colorize, evaluate, evaluate_grid,
                              extract_surface, grid_coordinates, reconstruct_mesh)
from isosurface import marching_cubes
from mesh_geometry import MeshQuery, euler_characteristic, face_normals, is_watertight
from utils.settings import Settings


def signed_volume(vertices, faces):
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    return float((a * np.cross(b, c)).sum() / 6.0)


class SphereField:
    """Occupancy falls linearly through 0.5 on a sphere; colour is the point mapped to [0, 1]."""

    def __init__(self, radius=0.3, center=(0.0, 0.0, 0.0)):
        self.radius = radius
        self.center = np.asarray(center)
        self.calls = 0

    def occupancy(self, points):
        self.calls += 1
        return 0.5 - (np.linalg.norm(points - self.center, axis=1) - self.radius)

    def color(self, points):
        return points + 0.5


class ImplicitSurfaceTests(unittest.TestCase):

    def setUp(self) -> None:
        self.budget = Settings.get_memory_budget_mb()
        return super().setUp()

    def tearDown(self) -> None:
        Settings.set_memory_budget_mb(self.budget)
        gc.collect(2)
        return super().tearDown()

    def test_grid_is_corner_aligned(self):
        axis = grid_coordinates(5)
        assert_allclose(axis, [-0.5, -0.25, 0.0, 0.25, 0.5])

    def test_volume_index_order_is_xyz(self):
        field = SphereField(0.2, center=(0.3, -0.1, 0.0))
        vol = evaluate_grid(field, 9, chunk_size=EVAL_BLOCK)
        i, j, k = np.unravel_index(np.argmax(vol), vol.shape)
        axis = grid_coordinates(9)
        assert_allclose([axis[i], axis[j], axis[k]], [0.25, -0.125, 0.0])

    def test_sphere_reconstruction(self):
        R = 64
        mesh = reconstruct_mesh(SphereField(0.3), R, chunk_size=4096)
        cell = 1.0 / (R - 1)
        radii = np.linalg.norm(mesh.vertices, axis=1)
        self.assertLess(np.abs(radii - 0.3).max(), 1.5 * cell)
        self.assertTrue(is_watertight(mesh.faces))
        self.assertEqual(euler_characteristic(mesh), 2)

    def test_normals_point_outwards(self):
        mesh = extract_surface(evaluate_grid(SphereField(0.3), 24))
        self.assertAlmostEqual(signed_volume(mesh.vertices, mesh.faces), 4.0 / 3.0 * np.pi * 0.3 ** 3, delta=0.006)

    def test_higher_iso_levels_are_nested_inside(self):
        vol = evaluate_grid(SphereField(0.3), 32)
        outer = extract_surface(vol, 0.4)
        inner = extract_surface(vol, 0.6)
        self.assertFalse(outer.is_empty or inner.is_empty)
        self.assertLess(np.linalg.norm(inner.vertices, axis=1).max(), np.linalg.norm(outer.vertices, axis=1).min())
        self.assertTrue(MeshQuery(outer.vertices, outer.faces).inside(inner.vertices).all())
        self.assertFalse(MeshQuery(inner.vertices, inner.faces).inside(outer.vertices).any())

    def test_chunk_size_does_not_change_the_volume(self):
        a = evaluate_grid(SphereField(0.3), 20, chunk_size=1)
        b = evaluate_grid(SphereField(0.3), 20, chunk_size=5000)
        assert_array_equal(a, b)

    def test_chunks_are_rounded_to_whole_blocks(self):
        field = SphereField(0.3)
        evaluate_grid(field, 16, chunk_size=100)
        self.assertEqual(field.calls, 16 ** 3 // EVAL_BLOCK)

    def test_empty_volume_gives_empty_mesh(self):
        mesh = extract_surface(np.zeros((8, 8, 8)))
        self.assertTrue(mesh.is_empty)
        self.assertTrue(colorize(mesh, SphereField()).is_empty)

    def test_bad_volumes_are_rejected(self):
        with self.assertRaises(DimensionError):
            extract_surface(np.zeros((4, 4, 5)))
        vol = np.zeros((4, 4, 4))
        vol[0, 0, 0] = np.nan
        with self.assertRaises(NumericError):
            extract_surface(vol)
        with self.assertRaises(DimensionError):
            evaluate_grid(SphereField(), 1)

    def test_memory_budget(self):
        Settings.set_memory_budget_mb(1)
        with self.assertRaises(MemoryError):
            evaluate_grid(SphereField(), 128)

    def test_colors_are_sampled_at_vertices(self):
        mesh = reconstruct_mesh(SphereField(0.3), 16)
        assert_allclose(mesh.vertex_colors, np.clip(mesh.vertices + 0.5, 0.0, 1.0))


class MarchingCubesTests(unittest.TestCase):

    def test_flipped_field_reverses_faces(self):
        axis = grid_coordinates(20)
        x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
        vol = 0.5 - (np.sqrt(x ** 2 + (1.3 * y) ** 2 + z ** 2) - 0.3)
        v1, f1 = marching_cubes(vol, 0.5, np.zeros(3), 1.0)
        v2, f2 = marching_cubes(1.0 - vol, 0.5, np.zeros(3), 1.0)
        assert_allclose(v1, v2)
        self.assertTrue(is_watertight(f1))
        self.assertTrue(is_watertight(f2))
        self.assertGreater(signed_volume(v1, f1), 0)
        self.assertAlmostEqual(signed_volume(v2, f2), -signed_volume(v1, f1), delta=1e-3 * signed_volume(v1, f1))

    def test_single_corner_case(self):
        vol = np.zeros((2, 2, 2))
        vol[0, 0, 0] = 1.0
        verts, faces = marching_cubes(vol, 0.5, np.zeros(3), 1.0)
        self.assertEqual(faces.shape, (1, 3))
        assert_allclose(np.sort(verts.sum(axis=1)), [0.5, 0.5, 0.5])
        normal = face_normals(verts, faces)[0]
        # set corner sits behind the face
        self.assertLess(normal @ (np.zeros(3) - verts.mean(axis=0)), 0)

    def test_tiny_grid(self):
        verts, faces = marching_cubes(np.ones((1, 4, 4)), 0.5, np.zeros(3), 1.0)
        self.assertEqual(len(verts), 0)
        self.assertEqual(len(faces), 0)


class HeadsTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(2)
        self.heads = FieldHeads(5, [6, 4, 1], self.rng)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def features(self, points):
        return FusedFeature(Tensor(points[:, :1]), Tensor(points[:, 1:2]), Tensor(points[:, 2:3]),
                            Tensor(np.sin(points[:, :2])))

    def test_output_shapes_and_ranges(self):
        o, c = evaluate(self.heads, self.features(self.rng.uniform(-0.5, 0.5, (10, 3))))
        self.assertEqual(o.shape, (10, 1))
        self.assertEqual(c.shape, (10, 3))
        self.assertTrue(np.all((o.numpy() > 0) & (o.numpy() < 1)))
        self.assertTrue(np.all((c.numpy() > 0) & (c.numpy() < 1)))

    def test_widths_must_end_in_one(self):
        with self.assertRaises(DimensionError):
            FieldHeads(5, [6, 2], self.rng)

    def test_width_mismatch(self):
        with self.assertRaises(DimensionError):
            self.heads(Tensor(np.zeros((2, 4))))

    def test_field_values_do_not_depend_on_batching(self):
        field = HeadsField(self.heads, self.features)
        pts = self.rng.uniform(-0.5, 0.5, (EVAL_BLOCK + 37, 3))
        whole = field.occupancy(pts)
        parts = np.concatenate([field.occupancy(pts[:EVAL_BLOCK]), field.occupancy(pts[EVAL_BLOCK:])])
        assert_array_equal(whole, parts)
        self.assertEqual(field.color(pts).shape, (len(pts), 3))

    def test_occupancy_grid_skips_the_colour_head(self):
        spy = mock.Mock(wraps=self.heads.color)
        self.heads.color = spy
        field = HeadsField(self.heads, self.features)
        evaluate_grid(field, 8)
        spy.assert_not_called()
        self.assertEqual(field.color(self.rng.uniform(-0.5, 0.5, (4, 3))).shape, (4, 3))
        spy.assert_called_once()

    def test_blocked_apply_pads_the_tail(self):
        seen = []

        def fn(rows):
            seen.append(len(rows))
            return rows[:, 0] * 2

        pts = np.arange(30, dtype=float).reshape(10, 3)
        assert_allclose(blocked_apply(fn, pts, block=4), pts[:, 0] * 2)
        self.assertEqual(seen, [4, 4, 4])


if __name__ == "__main__":
    unittest.main()
