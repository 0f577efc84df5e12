import sys
from pathlib import Path

import pytest

from ovre_eval.dataset import sample_fixture_path
from ovre_eval.embeddings import HashedNgramProvider

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def sample_path():
    return sample_fixture_path()


@pytest.fixture
def toy_gt_path():
    return DATA / "toy_gt.jsonl"


@pytest.fixture
def toy_pred_path():
    return DATA / "toy_pred.jsonl"


@pytest.fixture
def hashed():
    return HashedNgramProvider(256, seed=0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
