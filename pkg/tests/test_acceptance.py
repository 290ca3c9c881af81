"""Acceptance criteria 1-10, one recorded PASS/FAIL line each."""

import csv
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_criterion
from oracles import conv2d_loops, wbce_loops, wiou_loops
from dpnet import ops
from dpnet.data.synthetic import DatasetSpec, generate_synthetic, load_dataset, save_dataset
from dpnet.dpconv import DPConvSpec, check_lightweight, count_params_pyramid, count_params_standard
from dpnet.harness import gradcheck_suite
from dpnet.harness.checkpoint import load_checkpoint
from dpnet.harness.config import ABLATION_BICFM, ABLATION_KERNEL_SETS, ablation_overrides, load_config
from dpnet.harness.evaluate import evaluate
from dpnet.harness.paramcount import count_report
from dpnet.harness.routing import direction_check, routing_report, rows_to_csv
from dpnet.harness.train import train
from dpnet.losses import aux_coefficient, pixel_weights, total_loss, weighted_bce, weighted_iou
from dpnet.model import DPNet
from dpnet.tensor import Tensor, no_grad
from test_dpconv import random_lightweight_spec

ARTIFACTS = Path(os.environ.get("DPNET_ARTIFACT_DIR", Path(__file__).resolve().parent.parent / "artifacts"))
QUIET = dict(progress=lambda msg: None)


def test_criterion_01_proposition():
    start = time.perf_counter()
    r = np.random.default_rng(1)
    specs = [random_lightweight_spec(r) for _ in range(1000)]
    ok = all(check_lightweight(s) for s in specs)
    ok &= all(count_params_pyramid(s) <= count_params_standard(s.c_in, s.c_out, s.reference_k) for s in specs)
    worked = DPConvSpec(64, 64, (3, 5, 7, 9), (4, 4, 8, 16))
    pair = (count_params_pyramid(worked), count_params_standard(64, 64, 3))
    elapsed = time.perf_counter() - start
    passed = ok and pair == (20160, 36864) and elapsed < 1.0
    record_criterion(1, passed, f"1000 specs bounded={ok}, worked instance {pair[0]} vs {pair[1]}, {elapsed:.2f}s")
    assert passed


def test_criterion_02_param_counts():
    start = time.perf_counter()
    rows = count_report(load_config().model_config())
    bad = [r.layer for r in rows if r.analytic != r.enumerated]
    elapsed = time.perf_counter() - start
    passed = not bad and elapsed < 1.0
    record_criterion(2, passed, f"{len(rows)} rows, mismatches={bad[:3]}, {elapsed:.2f}s")
    assert passed


def test_criterion_03_gradients():
    start = time.perf_counter()
    rows = [row for scope in gradcheck_suite.SCOPES for row in gradcheck_suite.run_scope(scope)]
    elapsed = time.perf_counter() - start
    worst = {s: max(r.max_rel_error for r in rows if r.scope == s) for s in gradcheck_suite.SCOPES}
    passed = all(r.passed for r in rows) and elapsed < 120
    detail = ", ".join(f"{s} {worst[s]:.1e}<{gradcheck_suite.THRESHOLDS[s]:g}" for s in worst)
    record_criterion(3, passed, f"{detail}, {elapsed:.1f}s")
    assert passed, gradcheck_suite.rows_to_csv(rows)


def test_criterion_04_routing_simplex():
    net = DPNet(load_config().model_config())
    r = np.random.default_rng(4)
    worst_sum, inside = 0.0, True
    with no_grad():
        for i in range(10):
            x = r.random((10, 3, 32, 32)) * r.uniform(0.2, 1.0)
            net(x)
            for _, _, block in net.encoder.dpconv_blocks():
                a = block.last_alpha.reshape(10, -1, block.spec.m)
                worst_sum = max(worst_sum, np.abs(a.sum(-1) - 1).max())
                inside &= bool(np.all((a > 0) & (a < 1)))
            w = net.decoder.dwf.last_omega[2].reshape(10, -1, 4)
            worst_sum = max(worst_sum, np.abs(w.sum(-1) - 1).max())
            inside &= bool(np.all((w > 0) & (w < 1)))
    passed = worst_sum < 1e-9 and inside
    record_criterion(4, passed, f"100 inputs, max |sum-1| = {worst_sum:.1e}, entries in (0,1): {inside}")
    assert passed


def test_criterion_05_conv_oracle():
    r = np.random.default_rng(5)
    worst, seen = 0.0, set()
    for _ in range(200):
        groups = int(r.choice([1, 2, 4]))
        cg, cog = int(r.integers(1, 3)), int(r.integers(1, 3))
        k = int(r.choice([1, 3, 5]))
        stride, pad = int(r.integers(1, 3)), int(r.integers(0, 3))
        h, w = int(r.integers(k, 9)), int(r.integers(k, 9))
        x = r.standard_normal((int(r.integers(1, 3)), cg * groups, h, w))
        wt = r.standard_normal((cog * groups, cg, k, k))
        b = r.standard_normal(cog * groups) if r.random() < 0.5 else None
        got = ops.conv2d(Tensor(x), Tensor(wt), None if b is None else Tensor(b), stride, pad, groups).data
        worst = max(worst, np.abs(got - conv2d_loops(x, wt, b, stride, pad, groups)).max())
        seen |= {"grouped"} if groups > 1 else set()
        seen |= {"strided"} if stride > 1 else set()
        seen |= {"padded"} if pad > 0 else set()
    passed = worst <= 1e-12 and seen == {"grouped", "strided", "padded"}
    record_criterion(5, passed, f"200 instances ({', '.join(sorted(seen))}), max abs diff {worst:.1e}")
    assert passed


def test_criterion_06_loss_composition():
    coeffs = [aux_coefficient(j) for j in (2, 3, 4, 5)]
    r = np.random.default_rng(6)
    gt = np.zeros((2, 1, 24, 24))
    gt[0, 0, 5:15, 4:12] = 1
    gt[1, 0, 10:22, 8:20] = 1
    sat = Tensor(np.where(gt > 0, 40.0, -40.0))
    perfect = total_loss([sat, sat], [sat] * 4, gt).total.item()
    logits = r.standard_normal(gt.shape) * 2
    w = pixel_weights(gt)
    d_bce = abs(weighted_bce(Tensor(logits), gt, w).item() - wbce_loops(logits, gt))
    d_iou = abs(weighted_iou(Tensor(logits), gt, w).item() - wiou_loops(logits, gt))
    passed = coeffs == [1 / 2, 1 / 4, 1 / 8, 1 / 16] and perfect < 1e-8 and d_bce <= 1e-12 and d_iou <= 1e-12
    record_criterion(6, passed, f"aux {coeffs}, perfect loss {perfect:.1e}, oracle diffs {d_bce:.1e}/{d_iou:.1e}")
    assert passed


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    for name, count, seed in (("train", 512, 1), ("val", 64, 2), ("eval", 128, 3)):
        save_dataset(generate_synthetic(DatasetSpec(count, image_hw=64, master_seed=seed)), root / name)
    cfg = load_config(overrides={"train_root": str(root / "train"), "val_root": str(root / "val"),
                                 "out_dir": str(root / "run")})
    start = time.perf_counter()
    result = train(cfg, **QUIET)
    return root, cfg, result, time.perf_counter() - start


@pytest.mark.slow
def test_criterion_07_learnability(desk_run):
    root, cfg, result, elapsed = desk_run
    first, last = result.epochs[0]["loss"], result.epochs[-1]["loss"]
    ckpt = load_checkpoint(root / "run" / "last.ckpt")
    report = evaluate(ckpt.model, cfg.image_size, root / "eval").overall
    ratio = last / first
    passed = elapsed <= 900 and ratio <= 0.30 and report.mae < 0.15 and report.max_f > 0.80
    record_criterion(7, passed, f"train {elapsed:.0f}s, loss {first:.3f}->{last:.3f} (ratio {ratio:.3f}), "
                                f"eval MAE {report.mae:.4f}, maxF {report.max_f:.4f}")
    assert passed


@pytest.mark.slow
def test_criterion_08_scale_routing(desk_run):
    root, _, _, _ = desk_run
    ckpt = load_checkpoint(root / "run" / "last.ckpt")
    images = np.concatenate([s.image for s in load_dataset(root / "eval")])
    rows = routing_report(ckpt.model, images)
    check = direction_check(rows)
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    (ARTIFACTS / "routing_report.csv").write_text(rows_to_csv(rows))
    warning = ARTIFACTS / "routing_warning.txt"
    detail = (f"K9 up in {check.large_up_stages}/4 stages, K3 non-increasing in {check.small_down_stages}/4 "
              f"stages (soft)")
    if check.holds:
        warning.unlink(missing_ok=True)
    else:
        warning.write_text("WARNING: scale-routing direction not observed on the desk model\n" + detail + "\n")
        detail += f"; warning written to {warning}"
    record_criterion(8, check.holds, detail)
    # soft criterion: recorded, never fails the suite


def test_criterion_09_determinism(tmp_path, tiny_dataset):
    def run(sub):
        cfg = load_config(overrides={"train_root": str(tiny_dataset), "out_dir": str(tmp_path / sub),
                                     "epochs": 2, "image_size": 32})
        train(cfg, **QUIET)
        return {n: (tmp_path / sub / n).read_bytes() for n in ("log.csv", "steps.csv", "last.ckpt", "best.ckpt")}

    a, b = run("a"), run("b")
    same = [n for n in a if a[n] == b[n]]
    passed = len(same) == len(a)
    record_criterion(9, passed, f"byte-identical: {', '.join(same)}")
    assert passed


def test_criterion_10_ablation_plumbing(tmp_path, tiny_dataset):
    variants = [("N", n, ablation_overrides(num_bicfm=n)) for n in ABLATION_BICFM]
    variants += [("K", "/".join(map(str, k)), ablation_overrides(kernel_sizes=k)) for k in ABLATION_KERNEL_SETS]
    results = []
    for i, (kind, label, over) in enumerate(variants):
        cfg = load_config(overrides={**over, "train_root": str(tiny_dataset), "out_dir": str(tmp_path / str(i)),
                                     "epochs": 1, "image_size": 32})
        rows = count_report(cfg.model_config())
        counts_ok = all(r.analytic == r.enumerated for r in rows)
        loss = train(cfg, **QUIET).epochs[0]["loss"]
        results.append((f"{kind}={label}", counts_ok and math.isfinite(loss)))
    passed = all(ok for _, ok in results)
    record_criterion(10, passed, f"{sum(ok for _, ok in results)}/{len(results)} variants: "
                                 + " ".join(name for name, _ in results))
    assert passed
