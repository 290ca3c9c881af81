import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpnet.data.synthetic import DatasetSpec, generate_synthetic, save_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny") / "train"
    save_dataset(generate_synthetic(DatasetSpec(32, image_hw=32, master_seed=7)), root)
    return root


@pytest.fixture(scope="session")
def tiny_val(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinyval") / "val"
    save_dataset(generate_synthetic(DatasetSpec(12, image_hw=32, master_seed=8)), root)
    return root


ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
