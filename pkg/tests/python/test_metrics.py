import unittest

import numpy as np

from favs import metrics
from favs.errors import ShapeError


def brute_force(pred, gt, beta2=0.3):
    jaccard, fscore = [], []
    for p, g in zip(pred, gt):
        ps = {i for i, v in enumerate(p.ravel()) if v > 0.5}
        gs = {i for i, v in enumerate(g.ravel()) if v > 0.5}
        union = ps | gs
        jaccard.append(len(ps & gs) / len(union) if union else 1.0)
        precision = len(ps & gs) / len(ps) if ps else 0.0
        recall = len(ps & gs) / len(gs) if gs else 0.0
        if precision + recall > 0:
            fscore.append((1 + beta2) * precision * recall / (beta2 * precision + recall))
        else:
            fscore.append(0.0)
    return sum(jaccard) / len(jaccard), sum(fscore) / len(fscore)


class TestJaccard(unittest.TestCase):
    def test_identical(self):
        m = np.zeros((2, 4, 4))
        m[:, 1:3, 1:3] = 1
        self.assertEqual(metrics.metric_jaccard(m, m), 1.0)

    def test_disjoint(self):
        a = np.zeros((1, 4, 4))
        b = np.zeros((1, 4, 4))
        a[0, 0, 0] = 1
        b[0, 3, 3] = 1
        self.assertEqual(metrics.metric_jaccard(a, b), 0.0)

    def test_half_coverage(self):
        gt = np.zeros((1, 4, 4))
        gt[0, :2, :] = 1
        pred = np.zeros((1, 4, 4))
        pred[0, 0, :] = 1
        self.assertEqual(metrics.metric_jaccard(pred, gt), 0.5)

    def test_empty_union_scores_one(self):
        z = np.zeros((3, 2, 2))
        self.assertEqual(metrics.metric_jaccard(z, z), 1.0)

    def test_symmetric(self):
        rng = np.random.default_rng(20)
        a = rng.integers(0, 2, (3, 5, 5))
        b = rng.integers(0, 2, (3, 5, 5))
        self.assertEqual(metrics.metric_jaccard(a, b), metrics.metric_jaccard(b, a))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            metrics.metric_jaccard(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))


class TestFscore(unittest.TestCase):
    def test_identical(self):
        m = np.ones((1, 3, 3))
        self.assertAlmostEqual(metrics.metric_fscore(m, m), 1.0, places=12)

    def test_empty_prediction(self):
        gt = np.zeros((1, 3, 3))
        gt[0, 1, 1] = 1
        self.assertEqual(metrics.metric_fscore(np.zeros((1, 3, 3)), gt), 0.0)

    def test_half_precision_full_recall(self):
        gt = np.zeros((1, 4, 4))
        gt[0, 0, :2] = 1
        pred = np.zeros((1, 4, 4))
        pred[0, 0, :] = 1
        self.assertAlmostEqual(metrics.metric_fscore(pred, gt), 1.3 * 0.5 / 1.15, places=12)
        self.assertAlmostEqual(metrics.metric_fscore(pred, gt), 0.5652, places=4)

    def test_single_frame_masks(self):
        m = np.eye(3)
        self.assertEqual(metrics.metric_jaccard(m, m), 1.0)


class TestRandomized(unittest.TestCase):
    def test_against_set_arithmetic(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            density = rng.uniform(0.0, 1.0)
            pred = (rng.uniform(size=shape) < density).astype(float)
            gt = (rng.uniform(size=shape) < density).astype(float)
            jaccard, fscore = brute_force(pred, gt)
            self.assertAlmostEqual(metrics.metric_jaccard(pred, gt), jaccard, delta=1e-12)
            self.assertAlmostEqual(metrics.metric_fscore(pred, gt), fscore, delta=1e-12)
            self.assertTrue(0.0 <= metrics.metric_jaccard(pred, gt) <= 1.0)
            self.assertTrue(0.0 <= metrics.metric_fscore(pred, gt) <= 1.0)


if __name__ == "__main__":
    unittest.main()
