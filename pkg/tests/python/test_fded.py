import copy
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from favs import fded, spectral
from favs.errors import ShapeError, ValidationError
from favs.spectral import ThresholdLadder


def loop_dft(x, sign):
    h, w = x.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            for i in range(h):
                for j in range(w):
                    out[u, v] += x[i, j] * np.exp(sign * 2j * np.pi * (u * i / h + v * j / w))
    return out


def step_by_step_visual(x, p):
    """Independent loop evaluation of the visual decomposer on a tiny input."""
    t_n, c_n, h, w = x.shape
    b = p.visual
    dwc = np.zeros(x.shape)
    for t in range(t_n):
        for c in range(c_n):
            for i in range(h):
                for j in range(w):
                    for a in range(3):
                        for bb in range(3):
                            ii, jj = i + a - 1, j + bb - 1
                            if 0 <= ii < h and 0 <= jj < w:
                                dwc[t, c, i, j] += b.dwc[c, a, bb] * x[t, c, ii, jj]
    group = np.zeros(x.shape)
    n = c_n // b.group.shape[0]
    for t in range(t_n):
        for c in range(c_n):
            g = c // n
            for k in range(n):
                group[t, c] += b.group[g, c % n, k] * dwc[t, g * n + k]
    spectrum = np.zeros(x.shape, dtype=complex)
    for t in range(t_n):
        for c in range(c_n):
            spectrum[t, c] = loop_dft(group[t, c], -1)

    fu = np.array([k if k <= h / 2 else k - h for k in range(h)]) / max(h // 2, 1)
    fv = np.array([k if k <= w / 2 else k - w for k in range(w)]) / max(w // 2, 1)
    r = np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2) / np.sqrt(2)
    taus = p.ladder.taus
    masks = [(r > taus[i]) & (r <= taus[i - 1]) for i in (1, 2, 3)]
    bands = [spectrum * m for m in masks]
    bands.append(spectrum * ~(masks[0] | masks[1] | masks[2]))

    high = bands[0].copy()
    enhanced = np.zeros(x.shape, dtype=complex)
    for t in range(t_n):
        for c in range(c_n):
            for i in range(h):
                for j in range(w):
                    acc = 0j
                    for dt in range(3):
                        for a in range(3):
                            for bb in range(3):
                                tt, ii, jj = t + dt - 1, i + a - 1, j + bb - 1
                                if 0 <= tt < t_n and 0 <= ii < h and 0 <= jj < w:
                                    acc += p.conv3d[c, dt, a, bb] * high[tt, c, ii, jj]
                    enhanced[t, c, i, j] = acc + high[t, c, i, j]
    bands[0] = enhanced * masks[0]

    out = np.zeros(x.shape)
    for weight, band in zip(b.band_weights, bands):
        for t in range(t_n):
            for c in range(c_n):
                out[t, c] += weight * (loop_dft(band[t, c], 1) / (h * w)).real
    return out


class TestIdentityClosure(unittest.TestCase):
    def test_identity_params_reproduce_input(self):
        rng = np.random.default_rng(5)
        p = fded.identity_params(8, groups=4, reduction=4)
        for _ in range(20):
            x = rng.standard_normal((2, 8, 8, 8))
            for modality in ("visual", "audio"):
                y = fded.fded_forward(x, modality, p).features
                assert_allclose(y, x, rtol=1e-9, atol=1e-12)

    def test_zero_conv3d_keeps_visual_identity_with_enhancement(self):
        p = fded.identity_params(4, groups=2, reduction=2, enhance=True)
        x = np.random.default_rng(6).standard_normal((3, 4, 8, 8))
        assert_allclose(fded.fded_forward(x, "visual", p).features, x, rtol=1e-9, atol=1e-12)


class TestHighBandIsolation(unittest.TestCase):
    def test_only_high_band_changes(self):
        rng = np.random.default_rng(7)
        p = fded.init_params(3, 8, groups=4, reduction=4)
        ladder = p.ladder
        high_mask = spectral.band_masks(16, 16, ladder)[0]
        for modality in ("visual", "audio"):
            x = rng.standard_normal((2, 8, 16, 16))
            out = fded.fded_forward(x, modality, p)
            assert_array_equal(out.enhanced_high[..., ~high_mask], 0)
            after = spectral.residual_decompose(spectral.fft2(out.features), ladder)
            scale = np.max(np.abs(out.bands.total()))
            for name in ("mid", "low", "residual"):
                assert_allclose(getattr(after, name), getattr(out.bands, name), rtol=0, atol=1e-9 * scale)
            self.assertFalse(np.allclose(after.high, out.bands.high))

    def test_bands_before_enhancement_partition_preprocessed_spectrum(self):
        p = fded.init_params(4, 8)
        x = np.random.default_rng(8).standard_normal((1, 8, 8, 8))
        _, spectrum = fded.preprocess(x, p, "visual")
        out = fded.fded_forward(x, "visual", p)
        assert_array_equal(out.bands.total(), spectrum)


class TestModalities(unittest.TestCase):
    def setUp(self):
        self.p = fded.init_params(11, 8)
        self.p.audio = copy.deepcopy(self.p.visual)
        self.x = np.random.default_rng(9).standard_normal((2, 8, 16, 16))

    def test_paths_differ_only_in_high_band(self):
        v = fded.fded_forward(self.x, "visual", self.p).features
        a = fded.fded_forward(self.x, "audio", self.p).features
        self.assertFalse(np.allclose(v, a))
        for b in (self.p.visual, self.p.audio):
            b.band_weights = np.array([0.0, 1.0, 1.0, 1.0])
        v = fded.fded_forward(self.x, "visual", self.p).features
        a = fded.fded_forward(self.x, "audio", self.p).features
        assert_array_equal(v, a)

    def test_channel_gate_range(self):
        bands = spectral.residual_decompose(fded.preprocess(self.x, self.p, "audio")[1], self.p.ladder)
        gate = fded.channel_gate(bands.high, self.p)
        self.assertEqual(gate.shape, (2, 8))
        self.assertTrue(np.all((gate > 0) & (gate < 1)))

    def test_unknown_modality(self):
        with self.assertRaises(ValueError):
            fded.fded_forward(self.x, "text", self.p)


class TestComposition(unittest.TestCase):
    def test_tiny_input_matches_loop_evaluation(self):
        p = fded.init_params(21, 2, groups=1, reduction=2)
        x = np.random.default_rng(10).standard_normal((1, 2, 2, 2))
        expected = step_by_step_visual(x, p)
        assert_allclose(fded.fded_forward(x, "visual", p).features, expected, rtol=0, atol=1e-12)

    def test_audio_gate_by_hand(self):
        p = fded.init_params(22, 2, groups=1, reduction=2)
        x = np.random.default_rng(11).standard_normal((1, 2, 2, 2))
        _, spectrum = fded.preprocess(x, p, "audio")
        high = spectral.residual_decompose(spectrum, p.ladder).high
        squeezed = np.abs(high).mean(axis=(2, 3))
        hidden = np.maximum(squeezed @ p.ca_w1, 0.0)
        gate = 1.0 / (1.0 + np.exp(-(hidden @ p.ca_w2)))
        assert_allclose(fded.channel_gate(high, p), gate, rtol=0, atol=1e-12)


class TestErrors(unittest.TestCase):
    def test_wrong_channels(self):
        p = fded.identity_params(4, groups=2, reduction=2)
        with self.assertRaises(ShapeError):
            fded.fded_forward(np.zeros((1, 3, 4, 4)), "visual", p)

    def test_recompose_needs_four_weights(self):
        bands = spectral.residual_decompose(np.ones((1, 1, 4, 4), dtype=complex), ThresholdLadder())
        with self.assertRaises(ShapeError):
            fded.recompose(bands, [1.0, 1.0, 1.0])

    def test_tensor_round_trip(self):
        p = fded.init_params(5, 8)
        q = fded.FdedParams.from_tensors(p.to_tensors("stage1.fded"), p.ladder, "stage1.fded")
        for name, value in p.to_tensors().items():
            assert_array_equal(q.to_tensors()[name], value)

    def test_malformed_kernels(self):
        edits = {
            "fded.v.conv3d": lambda m: m[:, 0],
            "fded.v.dwc": lambda m: m[:, :2, :2],
            "fded.a.dwc": lambda m: m[0],
            "fded.a.group": lambda m: m[:, :1],
        }
        for name, edit in edits.items():
            with self.subTest(name=name):
                tensors = fded.init_params(6, 8).to_tensors()
                tensors[name] = np.ascontiguousarray(edit(tensors[name]))
                with self.assertRaises((ShapeError, ValidationError)):
                    fded.FdedParams.from_tensors(tensors, ThresholdLadder())


class TestRecompose(unittest.TestCase):
    def setUp(self):
        x = np.random.default_rng(23).standard_normal((2, 3, 8, 8))
        self.x = x
        self.bands = spectral.residual_decompose(spectral.fft2(x), ThresholdLadder())

    def test_doubled_high_band(self):
        expected = self.x + spectral.ifft2(self.bands.high).real
        assert_allclose(fded.recompose(self.bands, [2.0, 1.0, 1.0, 1.0]), expected, rtol=0, atol=1e-12)

    def test_zero_weights(self):
        assert_array_equal(fded.recompose(self.bands, np.zeros(4)), np.zeros(self.x.shape))

    def test_linear_in_weights(self):
        w = np.array([0.3, -1.2, 0.7, 2.0])
        assert_allclose(fded.recompose(self.bands, 2.0 * w), 2.0 * fded.recompose(self.bands, w), rtol=0, atol=1e-12)
