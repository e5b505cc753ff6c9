import gc
import os
import sys
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose, assert_array_equal

sys.path.append(os.path.dirname(os.path.realpath(__file__)) + "/../src")

import trainer
from autodiff import Tensor
from errors import ConfigError, NumericError
from avatar_model import SampleField, build_model, load_checkpoint
from point_sampling import sample_color, sample_occupancy
from run_config import RunConfig
from synthetic_data import synth_sample
from trainer import LOG_COLUMNS, LOG_FILE, loss_color, loss_occupancy, occupancy_accuracy, plan_step, train
from utils.settings import Settings

CONFIG = RunConfig(model_scale="micro").with_overrides({
    "train.steps": 3, "train.batch_size": 2, "train.pool_size": 2, "train.points": 12,
    "train.checkpoint_every": 1, "train.lr": 1e-3,
})


def params_of(model):
    return [p.data.copy() for p in model.parameters()]


class TrainerTests(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        m = CONFIG.model
        cls.dataset = [synth_sample(8, "rest", i, m.image_res, m.prior_vertices) for i in range(2)]
        Settings.set_verbose(False)

    @classmethod
    def tearDownClass(cls) -> None:
        Settings.set_verbose(True)

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        return super().setUp()

    def tearDown(self) -> None:
        self.tmp.cleanup()
        gc.collect(2)
        return super().tearDown()

    def out(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def test_loss_values(self):
        half = Tensor(np.full((4, 1), 0.5))
        self.assertAlmostEqual(loss_occupancy(half, np.array([0.0, 1.0, 1.0, 0.0])).item(), np.log(2.0), places=12)
        colors = np.random.default_rng(0).uniform(size=(5, 3))
        self.assertEqual(loss_color(Tensor(colors), colors).item(), 0.0)
        self.assertAlmostEqual(loss_color(Tensor(colors + 0.1), colors).item(), 0.1, places=12)

    def test_step_plan_is_a_function_of_seed_and_step(self):
        a = plan_step(4, 10, n_samples=5, batch_size=3, pool_size=2, dropout=0.5)
        b = plan_step(4, 10, n_samples=5, batch_size=3, pool_size=2, dropout=0.5)
        assert_array_equal(a.samples, b.samples)
        assert_array_equal(a.slots, b.slots)
        assert_array_equal(a.drop_sq, b.drop_sq)
        self.assertEqual(len(set(a.samples.tolist())), 3)
        self.assertFalse(plan_step(4, 10, 5, 3, 2, 0.0).drop_sq.any())
        # fewer samples than the batch draws with replacement
        self.assertEqual(len(plan_step(4, 0, 1, 3, 2, 0.0).samples), 3)

    def test_training_is_deterministic(self):
        a = train(CONFIG, self.dataset)
        b = train(CONFIG, self.dataset)
        self.assertEqual(a.step, 3)
        for x, y in zip(params_of(a.model), params_of(b.model)):
            assert_array_equal(x, y)
        assert_array_equal(a.log["L_GTA"].to_numpy(), b.log["L_GTA"].to_numpy())
        assert_allclose(a.log["L_GTA"], a.log["L_o"] + a.log["L_c"], rtol=1e-12)

    def test_resume_matches_an_uninterrupted_run(self):
        whole = train(CONFIG, self.dataset, self.out("whole"))
        train(CONFIG.with_overrides({"train.steps": 1}), self.dataset, self.out("first"))
        resumed = train(CONFIG, self.dataset, self.out("rest"), resume=self.out("first"))
        self.assertEqual(resumed.step, 3)
        for x, y in zip(params_of(whole.model), params_of(resumed.model)):
            assert_array_equal(x, y)
        self.assertEqual(resumed.log["step"].tolist(), [1, 2, 3])
        assert_allclose(resumed.log["L_GTA"], whole.log["L_GTA"], rtol=1e-12)

    def test_outputs_on_disk(self):
        result = train(CONFIG, self.dataset, self.out("run"))
        log = pd.read_csv(os.path.join(self.out("run"), LOG_FILE))
        self.assertEqual(list(log.columns), LOG_COLUMNS)
        self.assertEqual(log["step"].tolist(), [1, 2, 3])
        ckpt = load_checkpoint(self.out("run"))
        self.assertEqual(ckpt.step, 3)
        self.assertEqual(ckpt.optimizer.t, 3)
        for x, y in zip(params_of(result.model), params_of(ckpt.model)):
            assert_array_equal(x, y)

    def test_zero_steps_keeps_the_initial_model(self):
        result = train(CONFIG.with_overrides({"train.steps": 0}), self.dataset, self.out("zero"))
        self.assertEqual(result.step, 0)
        self.assertEqual(len(result.log), 0)
        self.assertEqual(load_checkpoint(self.out("zero")).step, 0)
        for x, y in zip(params_of(result.model), params_of(build_model(CONFIG))):
            assert_array_equal(x, y)

    def test_empty_dataset(self):
        with self.assertRaises(ConfigError):
            train(CONFIG, [])

    def test_numeric_failure_keeps_the_last_good_state(self):
        real = trainer.batch_losses
        calls = []

        def failing(*args, **kwargs):
            calls.append(1)
            if len(calls) == 3:
                raise NumericError("injected overflow", "test")
            return real(*args, **kwargs)

        with mock.patch.object(trainer, "batch_losses", side_effect=failing):
            with self.assertRaises(NumericError):
                train(CONFIG, self.dataset, self.out("broken"))
        one_step = train(CONFIG.with_overrides({"train.steps": 1}), self.dataset)
        ckpt = load_checkpoint(self.out("broken"))
        self.assertEqual(ckpt.step, 1)
        for x, y in zip(params_of(one_step.model), params_of(ckpt.model)):
            assert_array_equal(x, y)

    def test_fixed_batch_loss_goes_down(self):
        cfg = CONFIG.with_overrides({"train.steps": 25, "train.batch_size": 1, "train.pool_size": 1,
                                     "train.sq_dropout": 0.0, "train.lr": 5e-3})
        result = train(cfg, self.dataset[:1])
        self.assertLess(result.log["L_GTA"].iloc[-1], result.log["L_GTA"].iloc[0])
        sample = self.dataset[0]
        points = np.random.default_rng(3).uniform(-0.5, 0.5, (50, 3))
        accuracy = occupancy_accuracy(result.model, sample, points, sample.gt_occupancy(points))
        self.assertTrue(0.0 <= accuracy <= 1.0)


@unittest.skipUnless(os.environ.get("TRIAVATAR_LONG_TESTS"), "set TRIAVATAR_LONG_TESTS=1 for the desk overfit run")
class OverfitTests(unittest.TestCase):

    def test_desk_model_overfits_one_sample(self):
        Settings.set_verbose(False)
        cfg = RunConfig(model_scale="desk").with_overrides({
            "train.steps": 2000, "train.batch_size": 1, "train.pool_size": 4, "train.lr": 5e-4,
            "train.sq_dropout": 0.0,
        })
        sample = synth_sample(0, "easy", 0, cfg.model.image_res, cfg.model.prior_vertices)
        result = train(cfg, [sample])
        log = result.log["L_GTA"]
        self.assertLessEqual(log.iloc[-1], 0.2 * log.iloc[0])

        rng = np.random.default_rng(99)
        points, labels = sample_occupancy(sample, 10000, rng)
        self.assertGreaterEqual(occupancy_accuracy(result.model, sample, points, labels), 0.95)
        color_points, colors = sample_color(sample, 2000, rng)
        field = SampleField(result.model, sample.bundle, sample.prior)
        self.assertLessEqual(np.abs(field.color(color_points) - colors).mean(), 0.10)
        Settings.set_verbose(True)


if __name__ == "__main__":
    unittest.main()
