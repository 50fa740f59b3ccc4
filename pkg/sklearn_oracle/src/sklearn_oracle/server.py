"""MLP oracle sidecar: train once at startup, then answer protocol requests.

Protocol (one JSON object per line, one request in flight at a time):
    {"op":"hello"}                     -> {"op":"hello","dim":d}
    {"op":"predict","x":[[0,1,...]]}   -> {"op":"labels","y":[...]}
    {"op":"bye"}                       -> process exits 0
Malformed requests get {"op":"error","msg":...} and the server keeps going.

Labels served are already binary: the prepared artifacts carry the
one-vs-rest mapping chosen at preparation time.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TextIO, Tuple

import numpy as np
from sklearn.neural_network import MLPClassifier


@dataclass
class OracleSession:
    model: MLPClassifier
    dimension: int
    train_accuracy: float
    test_accuracy: Optional[float]

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return self.model.predict(Z).astype(int)


def load_artifacts(dataset_dir: Path):
    dataset = json.loads((dataset_dir / "dataset.json").read_text())
    d = int(dataset["dimension"])
    X = np.array([[int(c) for c in row] for row in dataset["instances"]], dtype=np.uint8)
    if X.size == 0:
        X = X.reshape(0, d)
    y = np.array(dataset["labels"], dtype=int)
    train = np.array(dataset["split"]["train"], dtype=int)
    test = np.array(dataset["split"]["test"], dtype=int)
    return d, X, y, train, test


def train_session(
    dataset_dir: Path, hidden: Tuple[int, ...], seed: int, log: TextIO
) -> OracleSession:
    d, X, y, train, test = load_artifacts(dataset_dir)
    if train.size == 0:
        raise SystemExit("dataset artifacts have an empty train split")
    model = MLPClassifier(hidden_layer_sizes=hidden, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # convergence chatter is not a protocol event
        model.fit(X[train], y[train])
    train_acc = float(model.score(X[train], y[train]))
    test_acc = float(model.score(X[test], y[test])) if test.size else None
    print(
        f"sklearn-oracle: trained on {train.size} rows, dim={d}, "
        f"train_accuracy={train_acc:.4f}, "
        f"test_accuracy={'n/a' if test_acc is None else f'{test_acc:.4f}'}",
        file=log,
    )
    # full effective hyperparameters, since library defaults drift by version
    print(f"sklearn-oracle: hyperparameters={model.get_params()}", file=log)
    log.flush()
    return OracleSession(
        model=model, dimension=d, train_accuracy=train_acc, test_accuracy=test_acc
    )


def _error(msg: str) -> str:
    return json.dumps({"op": "error", "msg": msg})


def handle_request(session: OracleSession, line: str) -> Tuple[Optional[str], bool]:
    """Process one request line; returns (reply or None, keep_running)."""
    try:
        req = json.loads(line)
        if not isinstance(req, dict):
            raise ValueError("request is not a JSON object")
    except ValueError as e:
        return _error(f"bad request: {e}"), True
    op = req.get("op")
    if op == "hello":
        return json.dumps({"op": "hello", "dim": session.dimension}), True
    if op == "bye":
        return None, False
    if op == "predict":
        rows = req.get("x")
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            return _error("predict needs x: a list of 0/1 rows"), True
        if not rows:
            return json.dumps({"op": "labels", "y": []}), True
        Z = np.zeros((len(rows), session.dimension), dtype=np.uint8)
        for i, row in enumerate(rows):
            if len(row) != session.dimension:
                return _error(
                    f"row {i} has {len(row)} entries, expected {session.dimension}"
                ), True
            for j, val in enumerate(row):
                if val not in (0, 1):
                    return _error(f"row {i} entry {j} is {val!r}, expected 0 or 1"), True
                Z[i, j] = val
        y = session.predict(Z)
        return json.dumps({"op": "labels", "y": [int(v) for v in y]}), True
    return _error(f"unknown op {op!r}"), True


def serve(session: OracleSession, stdin: TextIO, stdout: TextIO) -> int:
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        reply, keep_running = handle_request(session, line)
        if reply is not None:
            stdout.write(reply + "\n")
            stdout.flush()
        if not keep_running:
            return 0
    return 0  # EOF is a clean shutdown


def parse_hidden(spec: str) -> Tuple[int, ...]:
    try:
        hidden = tuple(int(part) for part in spec.split(",") if part.strip() != "")
    except ValueError:
        raise SystemExit(f"bad hidden-layer spec {spec!r}; expected e.g. 100 or 64,32")
    if not hidden or any(h < 1 for h in hidden):
        raise SystemExit(f"bad hidden-layer spec {spec!r}")
    return hidden


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sklearn-oracle",
        description="Serve a scikit-learn MLP over oracle wire protocol v1.",
    )
    parser.add_argument("dataset", help="prepared dataset directory (from ruleseeker prepare)")
    parser.add_argument("--hidden", default="100", help="hidden layer sizes, e.g. 100 or 64,32")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    session = train_session(Path(args.dataset), parse_hidden(args.hidden), args.seed, sys.stderr)
    return serve(session, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
