import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from favs import fixtures, spectral
from favs.errors import ValidationError
from favs.spectral import ThresholdLadder


class TestGenScene(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.scene = fixtures.gen_scene(42, frames=2, height=64, width=64, channels=32)

    def test_shapes(self):
        s = self.scene
        self.assertEqual(s.frames.shape, (2, 3, 64, 64))
        self.assertEqual(s.spectrogram.shape, (2, 96, 64))
        self.assertEqual(s.gt_masks.shape, (2, 64, 64))
        self.assertEqual([p.shape for p in s.stage_features], [(2, 32, 16, 16), (2, 32, 8, 8), (2, 32, 4, 4)])
        self.assertEqual(s.audio_features.shape, (2, 32, 4, 4))

    def test_masks_are_binary_and_nonempty(self):
        m = self.scene.gt_masks
        self.assertTrue(np.all((m == 0) | (m == 1)))
        self.assertTrue(np.all(m.sum(axis=(1, 2)) == 16 * 16))

    def test_deterministic(self):
        again = fixtures.gen_scene(42, frames=2, height=64, width=64, channels=32)
        for name, value in self.scene.to_tensors().items():
            assert_array_equal(again.to_tensors()[name], value)
        self.assertEqual(again.manifest, self.scene.manifest)

    def test_seed_changes_scene(self):
        other = fixtures.gen_scene(43, frames=2, height=64, width=64, channels=32)
        self.assertFalse(np.array_equal(other.frames, self.scene.frames))

    def test_linear_motion_moves_the_object(self):
        self.assertFalse(np.array_equal(self.scene.gt_masks[0], self.scene.gt_masks[1]))
        static = fixtures.gen_scene(42, frames=3, height=32, width=32, channels=4, motion="static")
        assert_array_equal(static.gt_masks[0], static.gt_masks[2])

    def test_invalid_arguments(self):
        for kwargs in ({"height": 33}, {"width": 16}, {"frames": 0}, {"texture": "stripes"}, {"noise": -1.0}):
            with self.assertRaises(ValidationError, msg=str(kwargs)):
                fixtures.gen_scene(1, **kwargs)


class TestTextures(unittest.TestCase):
    def test_checkerboard_matches_mask(self):
        for t, (r0, c0) in enumerate(fixtures.object_positions(5, 4, 64, 64, "linear")):
            layer = fixtures.render_object("checkerboard", r0, c0, 64, 64)
            mask = np.zeros((64, 64), dtype=bool)
            mask[r0 : r0 + 16, c0 : c0 + 16] = True
            assert_array_equal(layer != 0, mask)

    def test_checkerboard_energy_sits_at_high_radius(self):
        patch = fixtures.render_object("checkerboard", 8, 8, 32, 32)
        spectrum = spectral.naive_dft2(patch)
        r = spectral.radial_grid(32, 32).magnitudes
        power = np.abs(spectrum) ** 2
        self.assertGreater(power[r > 0.6].sum() / power.sum(), 0.5)

    def test_smooth_object_has_little_high_band_energy(self):
        layer = fixtures.render_object("smooth", 20, 24, 64, 64)
        energies = spectral.residual_decompose(spectral.fft2(layer), ThresholdLadder()).energies()
        self.assertLess(energies["high"] / sum(energies.values()), 0.1)


class TestMelProxy(unittest.TestCase):
    def test_shape(self):
        self.assertEqual(fixtures.mel_proxy(10, 0.1, 1, 3).shape, (3, 96, 64))

    def test_noise_free_energy_only_on_ridge(self):
        spec = fixtures.mel_proxy(10, 0.0, 1, 2)
        ridge = np.zeros(64, dtype=bool)
        ridge[9:12] = True
        self.assertTrue(np.all(spec[:, :, ~ridge] == 0))
        self.assertTrue(np.all(spec[:, :, ridge] > 0))

    def test_noise_scales_linearly(self):
        one = fixtures.mel_proxy(10, 0.1, 7, 2)[:, :, 48:].sum()
        two = fixtures.mel_proxy(10, 0.2, 7, 2)[:, :, 48:].sum()
        self.assertAlmostEqual(two / one, 2.0, places=12)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            fixtures.mel_proxy(10, -0.1, 1, 1)
        with self.assertRaises(ValidationError):
            fixtures.mel_proxy(64, 0.1, 1, 1)


class TestFixtureFiles(unittest.TestCase):
    def test_write_and_load(self):
        scene = fixtures.gen_scene(3, frames=1, height=32, width=32, channels=8, stages=2)
        with tempfile.TemporaryDirectory() as tmp:
            paths = fixtures.write_fixture(Path(tmp) / "scene.ften", scene)
            self.assertEqual([p.name for p in paths], ["scene.ften", "scene.manifest"])
            back = fixtures.load_fixture(paths[0])
        self.assertEqual(len(back.stage_features), 2)
        for name, value in scene.to_tensors().items():
            assert_array_equal(back.to_tensors()[name], value)
        self.assertEqual(back.manifest["seed"], "3")
        self.assertEqual(back.manifest["texture"], "checkerboard")

    def test_missing_tensors(self):
        with self.assertRaises(ValidationError):
            fixtures.SceneFixture.from_tensors({"frames": np.zeros((1, 3, 32, 32))})


if __name__ == "__main__":
    unittest.main()
