import json
import sys
from pathlib import Path

import pytest

from ruleseeker.cli import main as ruleseeker_cli


def write_iris_csv(tmp: Path) -> Path:
    from sklearn.datasets import load_iris

    data = load_iris()
    cols = [c.replace(" (cm)", "").replace(" ", "_") for c in data.feature_names]
    lines = [",".join(cols + ["species"])]
    for row, t in zip(data.data, data.target):
        lines.append(",".join(f"{v:.6g}" for v in row) + f",c{t}")
    csv = tmp / "iris.csv"
    csv.write_text("\n".join(lines) + "\n")
    return csv


@pytest.fixture(scope="session")
def prepared_dataset(tmp_path_factory) -> Path:
    """Dataset artifacts produced by the primary toolchain's prepare command."""
    tmp = tmp_path_factory.mktemp("artifacts")
    csv = write_iris_csv(tmp)
    manifest = tmp / "manifest.json"
    manifest.write_text(
        json.dumps({"target": "species", "bin_count": 3, "split_ratio": 0.7, "split_seed": 0})
    )
    out = tmp / "prepared"
    assert ruleseeker_cli(["prepare", str(csv), str(manifest), "--out", str(out)]) == 0
    return out


def sidecar_cmd(dataset: Path, hidden: str = "16", seed: int = 0):
    return [
        sys.executable,
        "-m",
        "sklearn_oracle",
        str(dataset),
        "--hidden",
        hidden,
        "--seed",
        str(seed),
    ]
