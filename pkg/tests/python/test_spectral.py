import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from favs import spectral
from favs.errors import ShapeError, ValidationError
from favs.spectral import ThresholdLadder


def random_ladder(rng) -> ThresholdLadder:
    inner = np.sort(rng.uniform(0.0, 0.99, 3))[::-1]
    return ThresholdLadder((1.0, *inner))


class TestTransforms(unittest.TestCase):
    def test_fft_matches_naive_dft(self):
        rng = np.random.default_rng(1)
        for shape in ((8, 8), (15, 17), (16, 16), (31, 9)):
            x = rng.standard_normal(shape)
            err = np.max(np.abs(spectral.fft2(x) - spectral.naive_dft2(x)))
            self.assertLess(err, 1e-6, shape)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        for shape in ((8, 8), (15, 17), (3, 2, 16, 16)):
            x = rng.standard_normal(shape)
            y = spectral.ifft2(spectral.fft2(x)).real
            assert_allclose(y, x, rtol=1e-9, atol=1e-12)

    def test_energy_convention(self):
        x = np.random.default_rng(3).standard_normal((8, 12))
        spectral_energy = spectral.band_energy(spectral.fft2(x))
        self.assertAlmostEqual(spectral_energy / (np.sum(x**2) * 96), 1.0, places=10)

    def test_naive_dft_limit(self):
        with self.assertRaises(ValidationError):
            spectral.naive_dft2(np.zeros((65, 64)))

    def test_rejects_vectors(self):
        with self.assertRaises(ShapeError):
            spectral.fft2(np.zeros(8))

    def test_impulse_has_flat_spectrum(self):
        x = np.zeros((6, 10))
        x[0, 0] = 1.0
        assert_allclose(spectral.naive_dft2(x), np.ones((6, 10)), rtol=0, atol=1e-12)

    def test_cosine_lands_on_two_bins(self):
        h, w, k0 = 8, 16, 3
        x = np.tile(np.cos(2.0 * np.pi * k0 * np.arange(w) / w), (h, 1))
        expected = np.zeros((h, w), dtype=complex)
        expected[0, k0] = expected[0, w - k0] = h * w / 2.0
        assert_allclose(spectral.naive_dft2(x), expected, rtol=0, atol=1e-9)
        assert_allclose(spectral.fft2(x), expected, rtol=0, atol=1e-9)


class TestLadder(unittest.TestCase):
    def test_default(self):
        self.assertEqual(ThresholdLadder().taus, (1.0, 0.6, 0.3, 0.1))

    def test_parse_and_format(self):
        ladder = ThresholdLadder.parse("1.0, 0.5,0.25,0")
        self.assertEqual(ladder.taus, (1.0, 0.5, 0.25, 0.0))
        self.assertEqual(ThresholdLadder.parse(str(ladder)), ladder)

    def test_invalid_ladders(self):
        for taus in ((1.0, 0.6, 0.6, 0.1), (0.9, 0.6, 0.3, 0.1), (1.0, 0.6, 0.3), (1.0, 0.6, 0.3, -0.1)):
            with self.assertRaises(ValidationError, msg=str(taus)):
                ThresholdLadder(taus)
        with self.assertRaises(ValidationError):
            ThresholdLadder.parse("1.0,a,0.3,0.1")


class TestRadialGrid(unittest.TestCase):
    def test_dc_and_nyquist_corner(self):
        r = spectral.radial_grid(8, 8).magnitudes
        self.assertEqual(r[0, 0], 0.0)
        self.assertAlmostEqual(r[4, 4], 1.0)
        self.assertTrue(np.all(r <= 1.0))

    def test_symmetric_under_negation(self):
        r = spectral.radial_grid(8, 6).magnitudes
        assert_array_equal(r, np.roll(r[::-1, ::-1], (1, 1), axis=(0, 1)))

    def test_masks_are_disjoint(self):
        high, mid, low = spectral.band_masks(16, 16, ThresholdLadder())
        self.assertFalse(np.any(high & mid) or np.any(mid & low) or np.any(high & low))
        self.assertTrue(high[8, 8])
        self.assertFalse(high[0, 0] or mid[0, 0] or low[0, 0])


class TestResidualDecompose(unittest.TestCase):
    def test_partition_is_exact(self):
        rng = np.random.default_rng(4)
        ladders = [ThresholdLadder()] + [random_ladder(rng) for _ in range(9)]
        for n in range(100):
            shape = (int(rng.integers(2, 17)), int(rng.integers(2, 17)))
            X = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            for ladder in ladders:
                bands = spectral.residual_decompose(X, ladder)
                assert_array_equal(bands.total(), X)
                total = spectral.band_energy(X)
                self.assertLess(abs(sum(bands.energies().values()) - total) / total, 1e-9)

    def test_dc_only_input(self):
        X = spectral.fft2(np.full((8, 8), 3.0))
        energies = spectral.residual_decompose(X, ThresholdLadder()).energies()
        total = sum(energies.values())
        self.assertAlmostEqual(energies["residual"] / total, 1.0, places=12)
        for name in ("high", "mid", "low"):
            self.assertLess(energies[name] / total, 1e-20)

    def test_bands_keep_their_annulus(self):
        X = np.ones((16, 16), dtype=complex)
        ladder = ThresholdLadder()
        bands = spectral.residual_decompose(X, ladder)
        masks = spectral.band_masks(16, 16, ladder)
        for band, mask in zip(bands.bands(), masks):
            assert_array_equal(band != 0, mask)

    def test_mid_frequency_sinusoid(self):
        # bins (0, +-10) of a 32x32 grid sit at radius 10 / 16 / sqrt(2) ~ 0.44
        x = np.tile(np.sin(2.0 * np.pi * 10 * np.arange(32) / 32), (32, 1))
        energies = spectral.residual_decompose(spectral.fft2(x), ThresholdLadder()).energies()
        total = sum(energies.values())
        self.assertAlmostEqual(energies["mid"] / total, 1.0, places=12)
        for name in ("high", "low", "residual"):
            self.assertLess(energies[name] / total, 1e-12)

    def test_raising_tau1_shrinks_the_high_band(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        previous = None
        for tau1 in (0.4, 0.5, 0.6, 0.7, 0.8):
            ladder = ThresholdLadder((1.0, tau1, 0.3, 0.1))
            high = spectral.band_masks(16, 16, ladder)[0]
            energy = spectral.residual_decompose(X, ladder).energies()["high"]
            if previous is not None:
                self.assertFalse(np.any(high & ~previous[0]))
                self.assertLessEqual(energy, previous[1] * (1.0 + 1e-12))
            previous = (high, energy)

    def test_replace_high_checks_shape(self):
        bands = spectral.residual_decompose(np.ones((4, 4), dtype=complex), ThresholdLadder())
        with self.assertRaises(ShapeError):
            bands.replace_high(np.zeros((4, 5)))


if __name__ == "__main__":
    unittest.main()
