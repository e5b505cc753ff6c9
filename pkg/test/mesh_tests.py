import gc
import os
import sys
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

from errors import MeshError
from mesh_geometry import (MeshQuery, TriMesh, closest_barycentric, euler_characteristic, face_areas, is_watertight,
                           read_obj, read_ply, sample_surface, uv_sphere, vertex_normals, write_obj, write_ply)


def exhaustive_closest(points, vertices, faces):
    a, b, c = (vertices[faces[:, i]][None] for i in range(3))
    bc = closest_barycentric(points[:, None, :], a, b, c)
    q = bc[..., 0:1] * a + bc[..., 1:2] * b + bc[..., 2:3] * c
    d = np.linalg.norm(points[:, None, :] - q, axis=-1)
    return d.min(axis=1), d.argmin(axis=1)


class MeshGeometryTests(unittest.TestCase):

    def setUp(self) -> None:
        self.rng = np.random.default_rng(31)
        self.sphere = uv_sphere(0.3, 10, 20)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_sphere_is_closed(self):
        self.assertTrue(is_watertight(self.sphere.faces))
        self.assertEqual(euler_characteristic(self.sphere), 2)

    def test_reversed_face_breaks_watertightness(self):
        faces = self.sphere.faces.copy()
        faces[0] = faces[0][::-1]
        self.assertFalse(is_watertight(faces))
        self.assertFalse(is_watertight(self.sphere.faces[1:]))

    def test_vertex_normals_are_radial(self):
        normals = vertex_normals(self.sphere.vertices, self.sphere.faces)
        radial = self.sphere.vertices / np.linalg.norm(self.sphere.vertices, axis=1, keepdims=True)
        self.assertGreater((normals * radial).sum(axis=1).min(), 0.95)

    def test_closest_matches_exhaustive_search(self):
        query = MeshQuery(self.sphere.vertices, self.sphere.faces)
        pts = self.rng.uniform(-0.6, 0.6, (300, 3))
        dist, face, bary, closest = query.closest(pts)
        ref_dist, _ = exhaustive_closest(pts, self.sphere.vertices, self.sphere.faces)
        assert_allclose(dist, ref_dist, atol=1e-12)
        tri = self.sphere.vertices[self.sphere.faces[face]]
        assert_allclose(np.einsum("pk,pkd->pd", bary, tri), closest, atol=1e-12)
        assert_allclose(bary.sum(axis=1), np.ones(len(pts)))

    def test_closest_barycentric_regions(self):
        a, b, c = np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
        cases = {
            (0.2, 0.2, 1.0): [0.6, 0.2, 0.2],
            (-1.0, -1.0, 0.0): [1.0, 0.0, 0.0],
            (2.0, -0.5, 0.0): [0.0, 1.0, 0.0],
            (0.5, -1.0, 0.0): [0.5, 0.5, 0.0],
            (1.0, 1.0, 0.0): [0.0, 0.5, 0.5],
        }
        for p, expected in cases.items():
            assert_allclose(closest_barycentric(np.array(p), a, b, c), expected, atol=1e-12)

    def test_winding_number_and_sign(self):
        query = MeshQuery(self.sphere.vertices, self.sphere.faces)
        w = query.winding_number(np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0]]))
        assert_allclose(w, [1.0, 0.0], atol=1e-9)
        sd = query.signed_distance(np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]))
        self.assertLess(sd[0], -0.28)
        self.assertAlmostEqual(sd[1], 0.2, places=9)

    def test_degenerate_faces_are_skipped(self):
        vertices = np.vstack([self.sphere.vertices, self.sphere.vertices[:1]])
        faces = np.vstack([self.sphere.faces, [[0, 0, len(vertices) - 1]]])
        query = MeshQuery(vertices, faces, warn=False)
        self.assertEqual(query.n_faces, len(self.sphere.faces))
        with self.assertRaises(MeshError):
            MeshQuery(np.zeros((3, 3)), np.array([[0, 1, 2]]), warn=False)
        with self.assertRaises(MeshError):
            MeshQuery(np.zeros((3, 3)), np.zeros((0, 3)))

    def test_surface_samples_lie_on_the_surface(self):
        pts, face, bary = sample_surface(self.sphere, 500, self.rng)
        query = MeshQuery(self.sphere.vertices, self.sphere.faces)
        dist, _, _, _ = query.closest(pts)
        self.assertLess(dist.max(), 1e-12)
        self.assertTrue(np.all(bary >= 0))
        assert_allclose(bary.sum(axis=1), np.ones(500))
        self.assertEqual(face.shape, (500,))

    def test_surface_samples_follow_area(self):
        mesh = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [3, 0, 1], [0, 3, 1]], dtype=float),
                       np.array([[0, 1, 2], [3, 4, 5]]))
        self.assertEqual(face_areas(mesh.vertices, mesh.faces)[1], 9 * face_areas(mesh.vertices, mesh.faces)[0])
        _, face, _ = sample_surface(mesh, 20000, self.rng)
        self.assertAlmostEqual(np.mean(face == 1), 0.9, delta=0.02)

    def test_face_hits_pass_a_chi_square_check(self):
        mesh = uv_sphere(0.3, 12, 24)
        areas = face_areas(mesh.vertices, mesh.faces)
        n = 100000
        _, face, _ = sample_surface(mesh, n, self.rng)
        observed = np.bincount(face, minlength=len(areas))
        expected = n * areas / areas.sum()
        stat = float(((observed - expected) ** 2 / expected).sum())
        dof = len(areas) - 1
        self.assertLess(stat, dof + 3.0 * np.sqrt(2.0 * dof))

    def test_empty_mesh_cannot_be_sampled(self):
        with self.assertRaises(MeshError):
            sample_surface(TriMesh(np.zeros((0, 3)), np.zeros((0, 3))), 5, self.rng)


class MeshFileTests(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.mesh = uv_sphere(0.25, 6, 8)
        self.mesh.vertex_colors = np.random.default_rng(1).random((len(self.mesh.vertices), 3))
        return super().setUp()

    def tearDown(self) -> None:
        self.tmp.cleanup()
        gc.collect(2)
        return super().tearDown()

    def test_obj_keeps_topology_and_colors(self):
        path = os.path.join(self.tmp.name, "m.obj")
        write_obj(path, self.mesh)
        back = read_obj(path)
        assert_array_equal(back.faces, self.mesh.faces)
        assert_allclose(back.vertices, self.mesh.vertices, atol=1e-9)
        assert_allclose(back.vertex_colors, self.mesh.vertex_colors, atol=1e-6)

    def test_ply_is_binary_little_endian(self):
        path = os.path.join(self.tmp.name, "m.ply")
        write_ply(path, self.mesh)
        with open(path, "rb") as ip:
            self.assertIn(b"format binary_little_endian 1.0", ip.read(200))
        back = read_ply(path)
        assert_array_equal(back.faces, self.mesh.faces)
        assert_allclose(back.vertices, self.mesh.vertices, atol=1e-7)
        assert_allclose(back.vertex_colors, self.mesh.vertex_colors, atol=0.5 / 255 + 1e-12)

    def test_obj_rejects_bad_faces(self):
        path = os.path.join(self.tmp.name, "bad.obj")
        with open(path, "w") as op:
            op.write("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n")
        with self.assertRaises(MeshError):
            read_obj(path)
        with open(path, "w") as op:
            op.write("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n")
        with self.assertRaises(MeshError):
            read_obj(path)

    def test_ply_rejects_other_files(self):
        path = os.path.join(self.tmp.name, "x.ply")
        with open(path, "wb") as op:
            op.write(b"not a ply")
        with self.assertRaises(MeshError):
            read_ply(path)


if __name__ == "__main__":
    unittest.main()
