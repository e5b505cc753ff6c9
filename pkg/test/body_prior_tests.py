import gc
import json
import os
import sys
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from pyparsing import ParseException
from scipy.spatial.transform import Rotation

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

from body_prior import (JOINT_INDEX, NUM_BETAS, NUM_JOINTS, PART_INDEX, PART_NAMES, BodyParams, PriorConfig,
                        build_template, load_prior, normalize_to_box, parse_part_ids, pose_mesh, random_params,
                        save_prior, signed_distance)
from errors import ConfigError, DimensionError
from mesh_geometry import is_watertight
from pose_parser import parse_modes, parse_parts, parse_theta
from run_config import ABLATION_MODES


class BodyPriorTests(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.template = build_template(PriorConfig())

    def setUp(self) -> None:
        self.rng = np.random.default_rng(4)
        return super().setUp()

    def tearDown(self) -> None:
        gc.collect(2)
        return super().tearDown()

    def test_template_is_closed_and_near_budget(self):
        self.assertTrue(is_watertight(self.template.faces))
        self.assertLess(abs(len(self.template.vertices) / PriorConfig().vertices - 1.0), 0.25)

    def test_template_fits_the_unit_box(self):
        self.assertLess(np.abs(self.template.vertices).max(), 0.5)

    def test_skin_weights_are_a_partition_of_unity(self):
        w = self.template.skin_weights
        self.assertEqual(w.shape, (len(self.template.vertices), NUM_JOINTS))
        self.assertTrue(np.all(w >= 0))
        assert_allclose(w.sum(axis=1), np.ones(len(w)), atol=1e-12)

    def test_every_part_is_labelled(self):
        labels = self.template.part_labels
        self.assertEqual(set(np.unique(labels)), set(range(len(PART_NAMES))))

    def test_rest_pose_is_identity(self):
        posed = pose_mesh(self.template, BodyParams())
        assert_array_equal(posed.vertices, self.template.vertices)
        assert_array_equal(posed.faces, self.template.faces)

    def test_root_rotation_is_rigid(self):
        theta = np.zeros(3 * NUM_JOINTS)
        theta[:3] = [0.0, 0.7, 0.0]
        posed = pose_mesh(self.template, BodyParams(theta=theta))
        R = Rotation.from_rotvec([0.0, 0.7, 0.0]).as_matrix()
        assert_allclose(posed.vertices, self.template.vertices @ R.T, atol=1e-12)

    def test_elbow_rotation_leaves_the_legs(self):
        theta = np.zeros(3 * NUM_JOINTS)
        j = JOINT_INDEX["l_elbow"]
        theta[3 * j + 2] = 1.0
        posed = pose_mesh(self.template, BodyParams(theta=theta))
        feet = self.template.part_labels == PART_INDEX["feet"]
        hands = self.template.part_labels == PART_INDEX["hands"]
        assert_allclose(posed.vertices[feet], self.template.vertices[feet], atol=1e-12)
        self.assertGreater(np.abs(posed.vertices[hands] - self.template.vertices[hands]).max(), 0.01)

    def test_elbow_bend_rotates_rigid_forearm_vertices(self):
        j = JOINT_INDEX["l_elbow"]
        theta = np.zeros(3 * NUM_JOINTS)
        theta[3 * j + 2] = np.pi / 6
        posed = pose_mesh(self.template, BodyParams(theta=theta))
        rigid = self.template.skin_weights[:, j] == 1.0
        self.assertGreater(rigid.sum(), 0)
        R = Rotation.from_rotvec([0.0, 0.0, np.pi / 6]).as_matrix()
        pivot = self.template.joints[j]
        expected = (self.template.vertices[rigid] - pivot) @ R.T + pivot
        assert_allclose(posed.vertices[rigid], expected, atol=1e-9)
        assert_allclose(posed.joints[j], pivot, atol=1e-9)

    def test_signed_distance_crosses_zero_once_along_outward_rays(self):
        starts = {"spine2": [0.0, 0.0, 1.0], "pelvis": [0.0, 0.0, -1.0], "head": [0.0, 1.0, 0.0]}
        for name, direction in starts.items():
            origin = self.template.joints[JOINT_INDEX[name]]
            steps = np.arange(0.0, 0.5, 1e-3)[:, None]
            ray = origin + steps * np.asarray(direction)
            sd = signed_distance(ray, self.template)
            self.assertLess(sd[0], 0.0, msg=name)
            self.assertGreater(sd[-1], 0.0, msg=name)
            self.assertEqual(np.count_nonzero(np.diff(np.sign(sd)) != 0), 1, msg=name)

    def test_height_coefficient_stretches_the_body(self):
        beta = np.zeros(NUM_BETAS)
        beta[0] = 2.0
        posed = pose_mesh(self.template, BodyParams(beta=beta))
        span = np.ptp(posed.vertices[:, 1])
        self.assertGreater(span, np.ptp(self.template.vertices[:, 1]))

    def test_params_validation(self):
        with self.assertRaises(DimensionError):
            BodyParams(theta=np.zeros(10))
        with self.assertRaises(ConfigError):
            BodyParams(theta=np.full(3 * NUM_JOINTS, np.nan))
        self.assertEqual(BodyParams(beta=np.full(NUM_BETAS, 10.0)).beta.max(), 3.0)

    def test_params_dict_round_trip(self):
        p = BodyParams(beta=self.rng.standard_normal(NUM_BETAS), theta=self.rng.standard_normal(3 * NUM_JOINTS) * 0.1)
        back = BodyParams.from_dict(json.loads(json.dumps(p.to_dict())))
        assert_array_equal(back.beta, p.beta)
        assert_array_equal(back.theta, p.theta)

    def test_random_params(self):
        self.assertTrue(random_params(self.rng, 0.0).is_rest)
        a = random_params(np.random.default_rng(8), 0.5)
        b = random_params(np.random.default_rng(8), 0.5)
        assert_array_equal(a.theta, b.theta)
        assert_array_equal(a.theta[:3], np.zeros(3))
        self.assertFalse(a.is_rest)

    def test_normalize_to_box(self):
        pts = self.rng.uniform(-3, 5, (100, 3))
        center, scale = normalize_to_box(pts, margin=0.02)
        mapped = (pts - center) * scale
        self.assertLessEqual(np.abs(mapped).max(), 0.48 + 1e-12)
        center, scale = normalize_to_box(pts * 0.01, margin=0.02)
        self.assertEqual(scale, 1.0)

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            params = BodyParams(theta=np.full(3 * NUM_JOINTS, 0.01))
            save_prior(os.path.join(tmp, "prior.obj"), self.template, params)
            mesh, back = load_prior(os.path.join(tmp, "prior.obj"))
        assert_array_equal(mesh.faces, self.template.faces)
        assert_allclose(mesh.vertices, self.template.vertices, atol=1e-8)
        assert_allclose(mesh.skin_weights, self.template.skin_weights, atol=1e-11)
        assert_array_equal(mesh.part_labels, self.template.part_labels)
        assert_array_equal(back.theta, params.theta)

    def test_part_ids(self):
        self.assertEqual(parse_part_ids(["torso", "head", "torso"]), [0, 1])
        with self.assertRaises(ConfigError):
            parse_part_ids(["tail"])


class PoseParserTests(unittest.TestCase):

    def test_single_component_in_degrees(self):
        theta = parse_theta("l_shoulder.z=90deg")
        j = JOINT_INDEX["l_shoulder"]
        self.assertAlmostEqual(theta[3 * j + 2], np.pi / 2)
        self.assertEqual(np.count_nonzero(theta), 1)

    def test_vector_assignment_from_rest(self):
        base = np.ones(3 * NUM_JOINTS)
        theta = parse_theta("rest, r_elbow=(0,-0.5,0)rad", base)
        j = JOINT_INDEX["r_elbow"]
        assert_allclose(theta[3 * j:3 * j + 3], [0.0, -0.5, 0.0])
        self.assertEqual(np.count_nonzero(theta), 1)

    def test_assignments_overwrite_the_base(self):
        base = np.full(3 * NUM_JOINTS, 0.2)
        theta = parse_theta("neck.x=0.1, head.y=-0.3", base)
        self.assertAlmostEqual(theta[3 * JOINT_INDEX["neck"]], 0.1)
        self.assertAlmostEqual(theta[3 * JOINT_INDEX["head"] + 1], -0.3)
        self.assertAlmostEqual(theta[0], 0.2)
        self.assertAlmostEqual(base[3 * JOINT_INDEX["neck"]], 0.2)

    def test_malformed_assignments(self):
        for text in ("l_knee=0.3", "l_knee.x=(1,2,3)", "tail.x=1", "l_knee.w=1", "l_knee.x=1 grad"):
            with self.assertRaises(ParseException, msg=text):
                parse_theta(text)

    def test_json_pose_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "pose.json")
            with open(path, "w") as op:
                json.dump({"theta": list(np.linspace(0, 1, 3 * NUM_JOINTS))}, op)
            assert_allclose(parse_theta(path), np.linspace(0, 1, 3 * NUM_JOINTS))
            with open(path, "w") as op:
                json.dump([0.0] * 5, op)
            with self.assertRaises(DimensionError):
                parse_theta(path)

    def test_parts(self):
        self.assertEqual(parse_parts("torso, l_upper_arm, torso"), [1, 2])
        self.assertEqual(parse_parts("all"), list(range(len(PART_NAMES))))
        self.assertEqual(parse_parts("none"), [])
        with self.assertRaises(ParseException):
            parse_parts("torso, wings")

    def test_modes(self):
        self.assertEqual(parse_modes("no_refine, hybrid, no_refine"), ["no_refine", "hybrid"])
        self.assertEqual(parse_modes("all"), list(ABLATION_MODES))
        with self.assertRaises(ParseException):
            parse_modes("hybrid, turbo")


if __name__ == "__main__":
    unittest.main()
