"""Seeded finite-difference checks grouped by granularity: ops, block, model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import ops
from ..backbone import EncoderConfig
from ..decoder import BiCFM, CFM, DWF, PredictHead
from ..dpconv import DPConvBlock, DPConvSpec
from ..gradcheck import grad_check_detailed
from ..losses import total_loss
from ..model import DPNet, ModelConfig
from ..tensor import Tensor

THRESHOLDS = {"ops": 1e-6, "block": 1e-5, "model": 1e-4}
SCOPES = tuple(THRESHOLDS)


@dataclass
class CheckRow:
    scope: str
    name: str
    max_rel_error: float
    checked: int
    threshold: float
    kinks: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


def _t(rng, *shape, lo=None):
    data = rng.standard_normal(shape)
    if lo is not None:
        # keep values away from kinks and poles
        data = np.sign(data) * (np.abs(data) + lo)
    return Tensor(data, requires_grad=True)


def _project(out: Tensor, rng) -> Callable[[Tensor], Tensor]:
    """Scalar probe ``sum(out * R)`` with a fixed random ``R``."""
    r = rng.standard_normal(out.shape)
    return lambda y: ops.sum(y * r)


def _probe(rng, build, inputs):
    proj = _project(build(), rng)
    return lambda: proj(build()), inputs


def _op_checks():
    checks = {}

    def add(name, make):
        checks[name] = make

    add("add", lambda r: (lambda a, b: _probe(r, lambda: ops.add(a, b), [a, b]))(_t(r, 3, 4), _t(r, 4)))
    add("sub", lambda r: (lambda a, b: _probe(r, lambda: ops.sub(a, b), [a, b]))(_t(r, 3, 4), _t(r, 3, 1)))
    add("mul", lambda r: (lambda a, b: _probe(r, lambda: ops.mul(a, b), [a, b]))(_t(r, 2, 3, 4), _t(r, 3, 1)))
    add("div", lambda r: (lambda a, b: _probe(r, lambda: ops.div(a, b), [a, b]))(_t(r, 3, 4), _t(r, 3, 4, lo=0.5)))
    add("relu", lambda r: (lambda a: _probe(r, lambda: ops.relu(a), [a]))(_t(r, 4, 5, lo=0.1)))
    add("sigmoid", lambda r: (lambda a: _probe(r, lambda: ops.sigmoid(a), [a]))(_t(r, 4, 5)))
    add("bce_with_logits", lambda r: (lambda a, t: _probe(r, lambda: ops.bce_with_logits(a, t), [a]))(
        _t(r, 2, 1, 4, 4), (r.random((2, 1, 4, 4)) > 0.5).astype(float)))
    add("sum", lambda r: (lambda a: _probe(r, lambda: ops.sum(a, axis=(1, 2), keepdims=True), [a]))(_t(r, 2, 3, 4)))
    add("mean", lambda r: (lambda a: _probe(r, lambda: ops.mean(a, axis=0), [a]))(_t(r, 2, 3, 4)))
    add("reshape", lambda r: (lambda a: _probe(r, lambda: ops.reshape(a, (4, 6)), [a]))(_t(r, 2, 3, 4)))
    add("transpose", lambda r: (lambda a: _probe(r, lambda: ops.transpose(a, (2, 0, 1)), [a]))(_t(r, 2, 3, 4)))
    add("concat", lambda r: (lambda a, b: _probe(r, lambda: ops.concat([a, b], axis=1), [a, b]))(
        _t(r, 2, 3, 4), _t(r, 2, 2, 4)))
    add("channels", lambda r: (lambda a: _probe(r, lambda: ops.channels(a, 1, 3), [a]))(_t(r, 2, 4, 3, 3)))
    add("global_avg_pool", lambda r: (lambda a: _probe(r, lambda: ops.global_avg_pool(a), [a]))(_t(r, 2, 3, 5, 4)))
    add("linear", lambda r: (lambda x, w, b: _probe(r, lambda: ops.linear(x, w, b), [x, w, b]))(
        _t(r, 3, 5), _t(r, 4, 5), _t(r, 4)))
    add("segment_softmax", lambda r: (lambda a: _probe(
        r, lambda: ops.add(ops.segment_softmax(a, 4, "segment"), ops.segment_softmax(a, 4, "whole")), [a]))(
        _t(r, 2, 12)))
    add("conv2d", lambda r: (lambda x, w, b: _probe(
        r, lambda: ops.conv2d(x, w, b, stride=2, padding=1, groups=2), [x, w, b]))(
        _t(r, 2, 4, 7, 6), _t(r, 6, 2, 3, 3), _t(r, 6)))
    add("resize_bilinear", lambda r: (lambda a: _probe(
        r, lambda: ops.add(ops.sum(ops.resize_bilinear(a, 7, 9)), ops.sum(ops.resize_bilinear(a, 2, 3))), [a]))(
        _t(r, 1, 2, 4, 5)))
    return checks


def _params(module) -> list[Tensor]:
    return module.parameters()


def _block_checks():
    def dpconv(c_in, c_out, stride, hw):
        def make(r):
            block = DPConvBlock(DPConvSpec(c_in, c_out, (3, 5, 7, 9), stride=stride), r)
            x = Tensor(r.random((1, c_in, hw, hw)), requires_grad=True)
            return _probe(r, lambda: block(x), [x] + _params(block))
        return make

    def cfm(r):
        mod = CFM(8, r)
        lat, ver = _t(r, 1, 8, 8, 8), _t(r, 1, 8, 8, 8)
        return _probe(r, lambda: mod(lat, ver), [lat, ver] + _params(mod))

    def pyramid(r, d=8, hw=16):
        return {lvl: Tensor(r.random((1, d, hw >> (lvl - 2), hw >> (lvl - 2))), requires_grad=True)
                for lvl in (2, 3, 4, 5)}

    def bicfm(r):
        mod = BiCFM(8, r)
        pyr = pyramid(r)
        build = lambda: ops.concat([ops.reshape(t, (1, -1)) for t in mod(pyr)[0].values()], axis=1)
        return _probe(r, build, list(pyr.values()) + _params(mod))

    def dwf(r):
        mod = DWF(8, r)
        pyr = pyramid(r)
        return _probe(r, lambda: mod(pyr, 2), list(pyr.values()) + _params(mod))

    def head(r):
        mod = PredictHead(8, r)
        x = _t(r, 1, 8, 8, 8)
        return _probe(r, lambda: mod(x, (32, 32)), [x] + _params(mod))

    return {
        "dpconv_block": dpconv(3, 8, 2, 32),
        "dpconv_block_identity": dpconv(16, 16, 1, 8),
        "cfm": cfm,
        "bicfm": bicfm,
        "dwf": dwf,
        "predict_head": head,
    }


def _model_checks():
    def model(r):
        net = DPNet(ModelConfig(EncoderConfig(), seed=int(r.integers(1 << 31))))
        x = Tensor(r.random((1, 3, 32, 32)), requires_grad=True)
        gt = np.zeros((1, 1, 32, 32))
        gt[..., 8:22, 10:26] = 1.0

        def loss():
            out = net(x)
            return total_loss(out.final_maps, out.aux_maps, gt).total
        return loss, [x] + net.parameters()
    return {"model": model}


CHECKS = {"ops": _op_checks, "block": _block_checks, "model": _model_checks}
# coordinates sampled per input tensor; None checks every coordinate
COORDS = {"ops": None, "block": 6, "model": 2}


def run_scope(scope: str, seed: int = 0, only=None) -> list[CheckRow]:
    if scope not in CHECKS:
        raise ValueError(f"unknown gradcheck scope {scope!r}; choose from {SCOPES}")
    rows = []
    for i, (name, make) in enumerate(CHECKS[scope]().items()):
        if only and name not in only:
            continue
        rng = np.random.default_rng([seed, i])
        fn, inputs = make(rng)
        res = grad_check_detailed(fn, inputs, max_coords=COORDS[scope], rng=rng)
        rows.append(CheckRow(scope, name, res.max_rel_error, res.checked, THRESHOLDS[scope], res.kinks))
    return rows


def rows_to_csv(rows) -> str:
    lines = ["scope,name,max_rel_error,checked,kinks,threshold,passed"]
    lines += [f"{r.scope},{r.name},{r.max_rel_error:.3e},{r.checked},{r.kinks},{r.threshold:g},{str(r.passed).lower()}"
              for r in rows]
    return "\n".join(lines) + "\n"
