import numpy as np
import pytest

from dpnet.losses import (aux_coefficient, box_mean, pixel_weights, total_loss, weighted_bce,
                          weighted_iou)
from dpnet.metrics import THRESHOLDS, f_beta, f_measure_curve, mae, precision_recall
from dpnet.tensor import Tensor, backward
from oracles import box_mean_loops, precision_recall_loops, wbce_loops, wiou_loops


def blob_gt(n=2, hw=20, seed=0):
    r = np.random.default_rng(seed)
    gt = np.zeros((n, 1, hw, hw))
    for i in range(n):
        y, x = r.integers(2, hw // 2, size=2)
        gt[i, 0, y:y + hw // 3, x:x + hw // 4] = 1
    return gt


class TestWeights:
    def test_constant_masks(self):
        np.testing.assert_array_equal(pixel_weights(np.zeros((1, 1, 9, 9))), 1.0)
        np.testing.assert_allclose(pixel_weights(np.ones((1, 1, 9, 9))), 1.0, atol=1e-12)

    def test_step_edge_peaks_next_to_edge(self):
        gt = np.zeros((30, 30))
        gt[:, 15:] = 1
        w = pixel_weights(gt)
        np.testing.assert_allclose(w, 1 + 5 * np.abs(box_mean_loops(gt) - gt), atol=1e-12)
        row = w[10]
        assert set(np.argsort(row)[-2:]) == {14, 15}

    def test_box_mean_oracle(self):
        x = np.random.default_rng(0).random((13, 17))
        np.testing.assert_allclose(box_mean(x), box_mean_loops(x), atol=1e-12)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            pixel_weights(np.full((4, 4), 0.5))


class TestLosses:
    def test_wbce_saturated(self):
        gt = blob_gt()
        logits = Tensor(np.where(gt > 0, 40.0, -40.0))
        assert weighted_bce(logits, gt, pixel_weights(gt)).item() < 1e-10

    def test_wbce_zero_logits(self):
        gt = blob_gt()
        assert weighted_bce(Tensor(np.zeros_like(gt)), gt, np.ones_like(gt)).item() == pytest.approx(np.log(2), abs=1e-15)

    def test_wiou_perfect_and_inverted(self):
        gt = blob_gt()
        w = pixel_weights(gt)
        assert weighted_iou(Tensor(np.where(gt > 0, 40.0, -40.0)), gt, w).item() < 1e-9
        assert weighted_iou(Tensor(np.where(gt > 0, -40.0, 40.0)), gt, w).item() == pytest.approx(1.0, abs=1e-9)

    def test_wiou_doubly_empty(self):
        gt = np.zeros((1, 1, 4, 4))
        assert weighted_iou(Tensor(np.full_like(gt, -800.0)), gt, pixel_weights(gt)).item() == 0.0

    def test_loop_oracles(self):
        gt = blob_gt(seed=3)
        logits = np.random.default_rng(4).standard_normal(gt.shape) * 3
        w = pixel_weights(gt)
        assert abs(weighted_bce(Tensor(logits), gt, w).item() - wbce_loops(logits, gt)) < 1e-12
        assert abs(weighted_iou(Tensor(logits), gt, w).item() - wiou_loops(logits, gt)) < 1e-12

    def test_aux_coefficients(self):
        assert [aux_coefficient(j) for j in (2, 3, 4, 5)] == [0.5, 0.25, 0.125, 0.0625]

    def test_total_perfect(self):
        gt = blob_gt()
        sat = Tensor(np.where(gt > 0, 40.0, -40.0))
        assert total_loss([sat, sat], [sat] * 4, gt).total.item() < 1e-8

    def test_total_is_mean_over_final_maps(self):
        gt = blob_gt()
        z = Tensor(np.random.default_rng(0).standard_normal(gt.shape))
        sat = Tensor(np.where(gt > 0, 40.0, -40.0))
        one = total_loss([z], [sat] * 4, gt).total.item()
        two = total_loss([z, z], [sat] * 4, gt).total.item()
        assert two == pytest.approx(one, abs=1e-12)

    def test_total_composition(self):
        gt = blob_gt()
        r = np.random.default_rng(1)
        finals = [Tensor(r.standard_normal(gt.shape)) for _ in range(2)]
        aux = [Tensor(r.standard_normal(gt.shape)) for _ in range(4)]
        w = pixel_weights(gt)
        parts = [weighted_bce(t, gt, w).item() + weighted_iou(t, gt, w).item() for t in finals + aux]
        expected = (parts[0] + parts[1]) / 2 + sum(c * p for c, p in zip((0.5, 0.25, 0.125, 0.0625), parts[2:]))
        assert total_loss(finals, aux, gt).total.item() == pytest.approx(expected, abs=1e-12)

    def test_total_requires_maps(self):
        gt = blob_gt()
        z = Tensor(np.zeros_like(gt))
        with pytest.raises(ValueError):
            total_loss([], [z] * 4, gt)
        with pytest.raises(ValueError):
            total_loss([z], [z] * 3, gt)

    def test_gradient_flows(self):
        gt = blob_gt()
        z = Tensor(np.zeros_like(gt), requires_grad=True)
        backward(total_loss([z], [Tensor(np.zeros_like(gt))] * 4, gt).total)
        assert z.grad is not None and np.any(z.grad != 0)


class TestMetrics:
    def test_mae(self):
        gt = blob_gt()[:, 0]
        assert mae(gt, gt) == 0
        assert mae(1 - gt, gt) == 1
        assert mae(np.full_like(gt, 0.5), gt) == 0.5

    def test_four_pixel_table(self):
        gt = np.array([1.0, 1, 0, 0])
        pred = np.array([0.9, 0.4, 0.6, 0.1])
        # hand enumeration: positives change at 0.1, 0.4, 0.6, 0.9 (inclusive >=)
        expected_p, expected_r = np.zeros(256), np.zeros(256)
        for k in range(256):
            if k <= 25:
                expected_p[k], expected_r[k] = 2 / 4, 1.0
            elif k <= 102:
                expected_p[k], expected_r[k] = 2 / 3, 1.0
            elif k <= 153:
                expected_p[k], expected_r[k] = 1 / 2, 1 / 2
            elif k <= 229:
                expected_p[k], expected_r[k] = 1.0, 1 / 2
            else:
                expected_p[k], expected_r[k] = 1.0, 0.0
        p, r = precision_recall(pred, gt)
        np.testing.assert_array_equal(p, expected_p)
        np.testing.assert_array_equal(r, expected_r)

    def test_pr_loop_oracle(self):
        r = np.random.default_rng(0)
        pred = np.round(r.random((12, 12)) * 255) / 255
        gt = (r.random((12, 12)) > 0.6).astype(float)
        lp, lr = precision_recall_loops(pred, gt)
        p, rc = precision_recall(pred, gt)
        np.testing.assert_allclose(p, lp, atol=1e-15)
        np.testing.assert_allclose(rc, lr, atol=1e-15)

    def test_perfect_and_inverted(self):
        gt = blob_gt()[:, 0]
        assert f_measure_curve(list(gt), list(gt)).max_f == pytest.approx(1.0)
        rep = f_measure_curve(list(1 - gt), list(gt))
        assert np.all(rep.f[1:] == 0)

    def test_f_beta(self):
        assert f_beta(np.array([1.0]), np.array([1.0]))[0] == pytest.approx(1.0)
        assert f_beta(np.array([0.0]), np.array([0.0]))[0] == 0.0
        assert f_beta(np.array([0.5]), np.array([1.0]), 0.3)[0] == pytest.approx(1.3 * 0.5 / (0.15 + 1))

    def test_aggregation_skips_empty_gt_for_pr(self):
        gt = blob_gt(3)[:, 0]
        gt[2] = 0
        rep = f_measure_curve(list(gt), list(gt))
        assert rep.images == 3 and rep.images_with_foreground == 2 and rep.mae == 0

    def test_csv(self):
        gt = blob_gt()[:, 0]
        text = f_measure_curve(list(gt), list(gt)).to_csv()
        lines = text.splitlines()
        assert lines[0] == "threshold,precision,recall,f"
        assert len(lines) == 258 and lines[-1].startswith("summary,")
        assert len(THRESHOLDS) == 256
