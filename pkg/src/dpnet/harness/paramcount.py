"""Per-layer parameter counts: closed form from layer hyper-parameters vs enumerated buffers."""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..dpconv import DPConvBlock, DPConvSpec, check_lightweight
from ..model import DPNet, ModelConfig
from ..nn import Conv2d, Linear


@dataclass
class CountRow:
    layer: str
    kind: str
    analytic: int
    enumerated: int
    lightweight: Optional[bool] = None
    standard: Optional[int] = None


def conv_params(c_in: int, c_out: int, k: int, groups: int = 1, bias: bool = True) -> int:
    return c_out * (c_in // groups) * k * k + (c_out if bias else 0)


def layer_rows(model: DPNet) -> list[CountRow]:
    rows = []
    for name, mod in model.named_modules():
        if isinstance(mod, Conv2d):
            bias = mod.bias is not None
            enumerated = mod.weight.data.size + (mod.bias.data.size if bias else 0)
            rows.append(CountRow(name, "conv", conv_params(mod.c_in, mod.c_out, mod.k, mod.groups, bias),
                                 enumerated))
        elif isinstance(mod, Linear):
            rows.append(CountRow(name, "linear", mod.n_in * mod.n_out + mod.n_out,
                                 mod.weight.data.size + mod.bias.data.size))
    return rows


def pyramid_row(name: str, spec: DPConvSpec, enumerated: int) -> CountRow:
    verdict = check_lightweight(spec)
    return CountRow(name, "dpconv_pyramid", verdict.pyramid, enumerated, verdict.holds, verdict.standard)


def dpconv_rows(model: DPNet) -> list[CountRow]:
    return [pyramid_row(name, mod.spec, mod.weight_count())
            for name, mod in model.named_modules() if isinstance(mod, DPConvBlock)]


def static_baseline(config: ModelConfig) -> DPNet:
    return DPNet(replace(config, encoder=replace(config.encoder, block_type="static")))


def count_report(config: ModelConfig) -> list[CountRow]:
    """Layer rows, DPConv pyramid rows with the lightweight verdict, then model totals.

    Total rows hold the summed closed-form counts and the enumerated totals;
    pyramid rows are summaries of their branch convs and are not added again.
    """
    model = DPNet(config)
    rows = layer_rows(model)
    total = CountRow("total_dpconv_model", "total", sum(r.analytic for r in rows), model.num_parameters())
    rows += dpconv_rows(model)
    baseline = static_baseline(config)
    base_rows = layer_rows(baseline)
    rows.append(total)
    rows.append(CountRow("total_static_baseline", "total", sum(r.analytic for r in base_rows),
                         baseline.num_parameters()))
    return rows


def block_report(spec: DPConvSpec) -> list[CountRow]:
    block = DPConvBlock(spec, np.random.default_rng(0))
    return [pyramid_row("block", spec, block.weight_count())]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("layer,kind,analytic,enumerated,lightweight,standard\n")
    for r in rows:
        light = "" if r.lightweight is None else str(r.lightweight).lower()
        std = "" if r.standard is None else r.standard
        buf.write(f"{r.layer},{r.kind},{r.analytic},{r.enumerated},{light},{std}\n")
    return buf.getvalue()

