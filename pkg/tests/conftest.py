import json
import sys
from pathlib import Path

import pytest

from ruleseeker.cli import main as cli_main

TESTS_DIR = Path(__file__).parent

TOY_CSV = """age,income,y
25,1000,no
32,2000,no
41,3000,yes
58,4000,yes
23,1500,no
37,2500,yes
44,3500,yes
51,4500,yes
"""

TOY_MANIFEST = {
    "target": "y",
    "bin_count": 3,
    "strategy": "quantile",
    "split_ratio": 0.75,
    "split_seed": 0,
}


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(TOY_CSV)
    return path


@pytest.fixture
def toy_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(TOY_MANIFEST))
    return path


@pytest.fixture
def prepared_dir(tmp_path, toy_csv, toy_manifest):
    out = tmp_path / "prepared"
    code = cli_main(["prepare", str(toy_csv), str(toy_manifest), "--out", str(out)])
    assert code == 0
    return out


def stub_oracle_cmd(*extra):
    return [sys.executable, str(TESTS_DIR / "stub_oracle.py"), *extra]
