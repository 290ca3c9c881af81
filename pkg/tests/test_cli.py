import subprocess
import sys

import numpy as np
import pytest

from dpnet.harness import cli
from dpnet.harness.cli import main, split_overrides
from dpnet.data.netpbm import write_image


@pytest.fixture(scope="module")
def trained(tmp_path_factory, tiny_dataset):
    out = tmp_path_factory.mktemp("cli") / "run"
    code = main(["train", "--train_root", str(tiny_dataset), "--out_dir", str(out), "--epochs", "1",
                 "--image-size", "32", "--out", str(out / "report.csv")])
    assert code == 0
    return out


def test_overrides():
    assert split_overrides(["--epochs", "3", "--batch-size=2"]) == {"epochs": "3", "batch_size": "2"}
    with pytest.raises(cli.UsageError):
        split_overrides(["--epochs"])
    with pytest.raises(cli.UsageError):
        split_overrides(["--warp", "9"])
    with pytest.raises(cli.UsageError):
        split_overrides(["stray"])


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["fly"]) == 1
    assert main(["paramcount", "--bogus", "1"]) == 1
    assert main(["infer", "--checkpoint", "x"]) == 1
    assert main(["paramcount", "--block", "64"]) == 1


def test_validation_errors(tmp_path):
    assert main(["paramcount", "--kernel_sizes", "3,5,7", "--stage_channels", "16,32,64,64"]) == 2
    assert main(["paramcount", "--epochs", "zero"]) == 2
    assert main(["gen-data", "--out", str(tmp_path / "d"), "--mix", "0.5,0.6,0.1", "--count", "3"]) == 2


def test_io_errors(tmp_path):
    assert main(["train", "--train_root", str(tmp_path / "missing"), "--out_dir", str(tmp_path / "o")]) == 3
    (tmp_path / "bad.ckpt").write_bytes(b"garbage")
    assert main(["infer", "--checkpoint", str(tmp_path / "bad.ckpt"), "--input", "x", "--output", "y"]) == 3
    assert main(["eval", "--checkpoint", str(tmp_path / "bad.ckpt"), "--data", str(tmp_path)]) == 3
    assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 3


def test_paramcount_csv(capsys):
    assert main(["paramcount"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "layer,kind,analytic,enumerated,lightweight,standard"
    assert any(l.startswith("total_static_baseline") for l in lines)
    assert main(["paramcount", "--block", "64,64", "--groups", "4,4,8,16"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "block,dpconv_pyramid,20160,20160,true,36864"


def test_gradcheck_ops(capsys):
    assert main(["gradcheck", "--scope", "ops"]) == 0
    out = capsys.readouterr().out
    assert "conv2d" in out and "false" not in out


def test_gradcheck_reports_offender(monkeypatch, capsys):
    from dpnet import ops
    original = ops.relu

    def broken(x):
        out = original(x)
        inner = out.backward_fn
        out.backward_fn = lambda g: tuple(2 * v for v in inner(g))
        return out

    monkeypatch.setattr(ops, "relu", broken)
    assert main(["gradcheck", "--scope", "ops"]) == 2
    assert "ops/relu" in capsys.readouterr().err


def test_gen_data(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path / "d"), "--count", "4", "--size", "32"]) == 0
    assert len(list((tmp_path / "d" / "img").glob("*.ppm"))) == 4


def test_train_eval_infer_routing(trained, tiny_val, tmp_path, capsys):
    assert (trained / "report.csv").read_text().startswith("epoch,loss")
    ck = str(trained / "last.ckpt")
    assert main(["eval", "--checkpoint", ck, "--data", str(tiny_val), "--curves", str(tmp_path / "c.csv")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("subset,images,mae,max_f,mean_f\nall,12,")
    assert (tmp_path / "c.csv").read_text().startswith("subset,threshold,precision,recall,f")
    assert main(["eval", "--checkpoint", ck, "--data", str(tiny_val), "--max-mae", "0.0"]) == 2

    write_image(tmp_path / "im.ppm", np.random.default_rng(0).random((1, 3, 20, 30)))
    assert main(["infer", "--checkpoint", ck, "--input", str(tmp_path / "im.ppm"),
                 "--output", str(tmp_path / "o.pgm")]) == 0
    assert (tmp_path / "o.pgm").read_bytes().startswith(b"P5\n30 20\n")
    (tmp_path / "bad.ppm").write_bytes(b"P6\n2 2\n255\n")
    assert main(["infer", "--checkpoint", ck, "--input", str(tmp_path / "bad.ppm"),
                 "--output", str(tmp_path / "o2.pgm")]) == 3

    capsys.readouterr()
    warn = tmp_path / "warn.txt"
    assert main(["routing-report", "--checkpoint", ck, "--data", str(tiny_val), "--limit", "4",
                 "--warn-file", str(warn)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "stage,kernel,scale,mean_weight" and len(lines) == 1 + 4 * 4 * 3
    assert main(["routing-report", "--checkpoint", ck, "--data", str(tiny_val), "--scales", "a,b"]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dpnet", "paramcount", "--block", "64,64",
                           "--groups", "4,4,8,16"], capture_output=True, text=True)
    assert proc.returncode == 0 and "20160" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "dpnet", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 1
