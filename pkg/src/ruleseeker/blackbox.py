"""Black-box classifiers and the example oracle.

A classifier is reached only through an OracleHandle: a predict function over
0/1 vectors plus a membership-query counter. Built-in models (trainable and
synthetic) keep experiments hermetic; the external kind wraps a child process
speaking wire protocol v1 (see protocol.py). Any vector in {0,1}^d is a legal
query, one-hot structure is not enforced.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .core import ContractViolation, Instance, LabeledSample
from .data import BinaryDataset
from .protocol import ExternalOracleProcess, ProtocolError


class ConditioningInfeasibleError(RuntimeError):
    """No sample satisfying the conditioning constraint could be produced."""

    def __init__(self, message: str, coverage: int = 0):
        super().__init__(message)
        self.coverage = coverage


class OracleHandle:
    """Uniform front for a black-box classifier f: {0,1}^d -> {0,1}.

    The query counter counts individual instances, not batches. Built-in
    predictors are pure functions and tolerate concurrent readers; access to
    an external process is serialized internally.
    """

    def __init__(
        self,
        kind: str,
        dimension: int,
        predictor: Callable[[np.ndarray], np.ndarray],
        *,
        name: str = "",
        train_accuracy: Optional[float] = None,
        test_accuracy: Optional[float] = None,
        warning: Optional[str] = None,
        closer: Optional[Callable[[], None]] = None,
    ):
        if kind not in ("builtin", "external"):
            raise ContractViolation(f"oracle kind must be builtin or external, got {kind!r}")
        self.kind = kind
        self.dimension = dimension
        self.name = name or kind
        self.train_accuracy = train_accuracy
        self.test_accuracy = test_accuracy
        self.warning = warning
        self._predictor = predictor
        self._closer = closer
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    def predict_matrix(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.uint8)
        if Z.ndim != 2 or Z.shape[1] != self.dimension:
            raise ContractViolation(
                f"expected (n, {self.dimension}) query matrix, got shape {Z.shape}"
            )
        labels = np.asarray(self._predictor(Z), dtype=np.uint8)
        if labels.shape != (Z.shape[0],):
            raise ProtocolError(
                f"predictor returned {labels.shape}, expected ({Z.shape[0]},)"
            )
        with self._count_lock:
            self._count += int(Z.shape[0])
        return labels

    def predict(self, batch: Sequence[Instance]) -> List[int]:
        if not batch:
            return []
        for z in batch:
            if z.dimension != self.dimension:
                raise ContractViolation(
                    f"instance dimension {z.dimension} != oracle dimension {self.dimension}"
                )
        Z = np.array([z.bits for z in batch], dtype=np.uint8)
        return [int(y) for y in self.predict_matrix(Z)]

    def predict_one(self, x: Instance) -> int:
        return self.predict([x])[0]

    def close(self) -> None:
        if self._closer is not None:
            self._closer()


# ---------------------------------------------------------------------------
# Synthetic built-in models
# ---------------------------------------------------------------------------


def constant_model(dimension: int, label: int) -> OracleHandle:
    lab = int(label)
    return OracleHandle(
        "builtin",
        dimension,
        lambda Z: np.full(Z.shape[0], lab, dtype=np.uint8),
        name=f"constant:{lab}",
    )


def monomial_model(dimension: int, variables: Iterable[int]) -> OracleHandle:
    idx = sorted(int(j) for j in variables)
    for j in idx:
        if not 0 <= j < dimension:
            raise ContractViolation(f"variable {j} out of range for dimension {dimension}")

    def predict(Z: np.ndarray) -> np.ndarray:
        if not idx:
            return np.ones(Z.shape[0], dtype=np.uint8)
        return Z[:, idx].all(axis=1).astype(np.uint8)

    return OracleHandle("builtin", dimension, predict, name=f"monomial:{idx}")


def parity_model(dimension: int) -> OracleHandle:
    return OracleHandle(
        "builtin",
        dimension,
        lambda Z: (Z.sum(axis=1) % 2).astype(np.uint8),
        name="parity",
    )


def dictator_model(dimension: int, j: int) -> OracleHandle:
    j = int(j)
    if not 0 <= j < dimension:
        raise ContractViolation(f"dictator index {j} out of range")
    return OracleHandle(
        "builtin", dimension, lambda Z: Z[:, j].astype(np.uint8), name=f"dictator:{j}"
    )


def random_tree_model(dimension: int, depth: int, seed: int) -> OracleHandle:
    """A random complete binary decision tree: random feature per internal
    node, random leaf labels. A cheap structured black box for experiments."""
    if depth < 1:
        raise ContractViolation("tree depth must be >= 1")
    rng = np.random.default_rng(seed)
    n_internal = 2**depth - 1
    feats = rng.integers(0, dimension, size=n_internal)
    leaves = rng.integers(0, 2, size=2**depth).astype(np.uint8)

    def predict(Z: np.ndarray) -> np.ndarray:
        node = np.zeros(Z.shape[0], dtype=np.int64)
        for _ in range(depth):
            f = feats[node]
            bit = Z[np.arange(Z.shape[0]), f]
            node = 2 * node + 1 + bit
        return leaves[node - n_internal]

    return OracleHandle("builtin", dimension, predict, name=f"random-tree:{depth}:{seed}")


# ---------------------------------------------------------------------------
# Trainable built-in models
# ---------------------------------------------------------------------------


def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _train_logistic(X: np.ndarray, y: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    n, d = X.shape
    Xf = X.astype(np.float64)
    yf = y.astype(np.float64)
    lam = 1e-4

    def loss_grad(wb):
        w, b = wb[:d], wb[d]
        t = Xf @ w + b
        p = _sigmoid(t)
        eps = 1e-12
        ll = -np.mean(yf * np.log(p + eps) + (1 - yf) * np.log(1 - p + eps))
        reg = 0.5 * lam * (w @ w)
        g_t = (p - yf) / n
        gw = Xf.T @ g_t + lam * w
        gb = g_t.sum()
        return ll + reg, np.concatenate([gw, [gb]])

    res = minimize(loss_grad, np.zeros(d + 1), jac=True, method="L-BFGS-B")
    w, b = res.x[:d], res.x[d]

    def predict(Z: np.ndarray) -> np.ndarray:
        return (Z.astype(np.float64) @ w + b >= 0).astype(np.uint8)

    return predict


def _train_mlp(
    X: np.ndarray, y: np.ndarray, hidden: int, seed: int
) -> Callable[[np.ndarray], np.ndarray]:
    """One hidden tanh layer trained by seeded mini-batch gradient descent."""
    rng = np.random.default_rng(seed)
    n, d = X.shape
    Xf = X.astype(np.float64)
    yf = y.astype(np.float64)
    W1 = rng.normal(0, 1.0 / np.sqrt(max(d, 1)), size=(d, hidden))
    b1 = np.zeros(hidden)
    W2 = rng.normal(0, 1.0 / np.sqrt(hidden), size=hidden)
    b2 = 0.0
    lr = 0.5
    epochs = 300
    batch = min(32, n)
    for epoch in range(epochs):
        order = rng.permutation(n)
        step = lr / (1.0 + 0.01 * epoch)
        for lo in range(0, n, batch):
            sel = order[lo : lo + batch]
            xb, yb = Xf[sel], yf[sel]
            h = np.tanh(xb @ W1 + b1)
            p = _sigmoid(h @ W2 + b2)
            g_out = (p - yb) / len(sel)
            gW2 = h.T @ g_out
            gb2 = g_out.sum()
            g_h = np.outer(g_out, W2) * (1 - h * h)
            gW1 = xb.T @ g_h
            gb1 = g_h.sum(axis=0)
            W2 -= step * gW2
            b2 -= step * gb2
            W1 -= step * gW1
            b1 -= step * gb1

    def predict(Z: np.ndarray) -> np.ndarray:
        h = np.tanh(Z.astype(np.float64) @ W1 + b1)
        return (h @ W2 + b2 >= 0).astype(np.uint8)

    return predict


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def _train_tree(X: np.ndarray, y: np.ndarray, max_depth: int) -> Callable[[np.ndarray], np.ndarray]:
    """Depth-bounded greedy tree on binary features; deterministic splits."""

    def build(rows: np.ndarray, depth: int):
        labels = y[rows]
        ones = int(labels.sum())
        majority = 1 if 2 * ones > len(rows) else 0
        if depth == 0 or ones == 0 or ones == len(rows):
            return ("leaf", majority)
        parent_gini = _gini(np.array([len(rows) - ones, ones]))
        best = None
        for j in range(X.shape[1]):
            col = X[rows, j]
            right = col == 1
            nr = int(right.sum())
            nl = len(rows) - nr
            if nr == 0 or nl == 0:
                continue
            ones_r = int(y[rows[right]].sum())
            ones_l = ones - ones_r
            g = (
                nl * _gini(np.array([nl - ones_l, ones_l]))
                + nr * _gini(np.array([nr - ones_r, ones_r]))
            ) / len(rows)
            gain = parent_gini - g
            if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
                best = (gain, j)
        if best is None:
            return ("leaf", majority)
        j = best[1]
        col = X[rows, j]
        left = build(rows[col == 0], depth - 1)
        right = build(rows[col == 1], depth - 1)
        return ("split", j, left, right)

    root = build(np.arange(X.shape[0]), max_depth)

    def predict(Z: np.ndarray) -> np.ndarray:
        out = np.zeros(Z.shape[0], dtype=np.uint8)

        def walk(node, rows):
            if node[0] == "leaf":
                out[rows] = node[1]
                return
            _, j, left, right = node
            mask = Z[rows, j] == 1
            walk(left, rows[~mask])
            walk(right, rows[mask])

        walk(root, np.arange(Z.shape[0]))
        return out

    return predict


def parse_model_spec(spec: Union[str, dict]) -> dict:
    """Model spec strings: logistic | mlp[:hidden] | tree[:depth]."""
    if isinstance(spec, dict):
        return dict(spec)
    parts = spec.split(":")
    kind = parts[0]
    if kind == "logistic":
        return {"kind": "logistic"}
    if kind == "mlp":
        return {"kind": "mlp", "hidden": int(parts[1]) if len(parts) > 1 else 16}
    if kind == "tree":
        return {"kind": "tree", "depth": int(parts[1]) if len(parts) > 1 else 4}
    raise ContractViolation(f"unknown builtin model spec {spec!r}")


def train_builtin(ds: BinaryDataset, spec: Union[str, dict], seed: int = 0) -> OracleHandle:
    """Train a built-in classifier on the train split of a prepared dataset."""
    cfg = parse_model_spec(spec)
    train = ds.train_indices
    if train.size == 0:
        raise ContractViolation("cannot train on an empty train split")
    X = ds.instances[train]
    y = ds.labels[train]
    warning = None
    if len(set(int(t) for t in y)) == 1:
        lab = int(y[0])
        handle = constant_model(ds.dimension, lab)
        handle.warning = "single-class training data; trained a constant model"
        handle.train_accuracy = 1.0
        return handle

    if cfg["kind"] == "logistic":
        predict = _train_logistic(X, y)
        name = "logistic"
    elif cfg["kind"] == "mlp":
        predict = _train_mlp(X, y, int(cfg.get("hidden", 16)), seed)
        name = f"mlp:{cfg.get('hidden', 16)}"
    elif cfg["kind"] == "tree":
        predict = _train_tree(X, y, int(cfg.get("depth", 4)))
        name = f"tree:{cfg.get('depth', 4)}"
    else:
        raise ContractViolation(f"unknown builtin model kind {cfg['kind']!r}")

    handle = OracleHandle("builtin", ds.dimension, predict, name=name, warning=warning)
    handle.train_accuracy = float((predict(X) == y).mean())
    test = ds.test_indices
    if test.size:
        handle.test_accuracy = float(
            (predict(ds.instances[test]) == ds.labels[test]).mean()
        )
    return handle


def external_oracle(command: Union[str, Sequence[str]], *, timeout: float = 120.0) -> OracleHandle:
    """Spawn an external oracle process and wrap it in a handle."""
    proc = ExternalOracleProcess(command, timeout=timeout)
    return OracleHandle(
        "external",
        proc.dimension,
        proc.predict_matrix,
        name="external",
        closer=proc.close,
    )


# ---------------------------------------------------------------------------
# Distributions over {0,1}^d
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Distribution:
    """A sampling distribution over {0,1}^d, reproducible from its seed."""

    kind: str  # uniform | product | empirical | hamming
    dimension: int
    seed: int = 0
    p: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: int = 0

    @classmethod
    def uniform(cls, dimension: int, seed: int = 0) -> "Distribution":
        return cls(kind="uniform", dimension=dimension, seed=seed)

    @classmethod
    def product_bernoulli(cls, p: Sequence[float], seed: int = 0) -> "Distribution":
        arr = np.asarray(p, dtype=np.float64)
        if ((arr < 0) | (arr > 1)).any():
            raise ContractViolation("Bernoulli parameters must lie in [0,1]")
        return cls(kind="product", dimension=arr.size, seed=seed, p=arr)

    @classmethod
    def empirical(cls, rows: np.ndarray, seed: int = 0) -> "Distribution":
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ContractViolation("empirical distribution needs a nonempty (n, d) matrix")
        return cls(kind="empirical", dimension=rows.shape[1], seed=seed, rows=rows)

    @classmethod
    def hamming_ball(cls, center: Instance, radius: int, seed: int = 0) -> "Distribution":
        arr = center.to_array()
        if not 0 <= radius <= arr.size:
            raise ContractViolation(f"radius must be in [0, {arr.size}]")
        return cls(
            kind="hamming", dimension=arr.size, seed=seed, center=arr, radius=radius
        )

    @property
    def is_product_form(self) -> bool:
        return self.kind in ("uniform", "product")

    def _rng(self, seed: Optional[int]) -> np.random.Generator:
        return np.random.default_rng(self.seed if seed is None else seed)

    def sample_matrix(self, m: int, seed: Optional[int] = None) -> np.ndarray:
        if m < 0:
            raise ContractViolation(f"sample count must be >= 0, got {m}")
        rng = self._rng(seed)
        d = self.dimension
        if m == 0:
            return np.zeros((0, d), dtype=np.uint8)
        if self.kind == "uniform":
            return rng.integers(0, 2, size=(m, d), dtype=np.uint8)
        if self.kind == "product":
            return (rng.random((m, d)) < self.p).astype(np.uint8)
        if self.kind == "empirical":
            idx = rng.integers(0, self.rows.shape[0], size=m)
            return self.rows[idx].copy()
        if self.kind == "hamming":
            # uniform over the ball: radius t with probability proportional to C(d, t)
            from math import comb

            weights = np.array([comb(d, t) for t in range(self.radius + 1)], dtype=np.float64)
            weights /= weights.sum()
            ts = rng.choice(self.radius + 1, size=m, p=weights)
            Z = np.tile(self.center, (m, 1))
            for i, t in enumerate(ts):
                if t:
                    flip = rng.choice(d, size=int(t), replace=False)
                    Z[i, flip] ^= 1
            return Z.astype(np.uint8)
        raise ContractViolation(f"unknown distribution kind {self.kind!r}")

    def sample_conditioned_matrix(
        self, x: np.ndarray, features: Sequence[int], m: int, seed: Optional[int] = None
    ) -> np.ndarray:
        """m samples agreeing with x on `features` exactly.

        Product-form: free coordinates are drawn independently. Empirical:
        draws uniformly among the covered dataset rows; infeasible when no row
        is covered.
        """
        feats = sorted(set(int(j) for j in features))
        for j in feats:
            if not 0 <= j < self.dimension:
                raise ContractViolation(f"feature {j} out of range")
        if self.kind == "hamming":
            raise ContractViolation(
                "conditioned sampling needs a product-form or empirical distribution"
            )
        if self.kind == "empirical":
            if feats:
                covered = np.nonzero((self.rows[:, feats] == x[feats]).all(axis=1))[0]
            else:
                covered = np.arange(self.rows.shape[0])
            if covered.size == 0:
                raise ConditioningInfeasibleError(
                    f"no dataset row agrees with the anchor on {len(feats)} fixed features",
                    coverage=0,
                )
            rng = self._rng(seed)
            idx = covered[rng.integers(0, covered.size, size=m)]
            return self.rows[idx].copy()
        Z = self.sample_matrix(m, seed)
        if feats:
            Z[:, feats] = x[feats]
        return Z


# ---------------------------------------------------------------------------
# Example oracle
# ---------------------------------------------------------------------------


def sample_oracle_matrix(
    h: OracleHandle, dist: Distribution, m: int, seed: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    if dist.dimension != h.dimension:
        raise ContractViolation(
            f"distribution dimension {dist.dimension} != oracle dimension {h.dimension}"
        )
    Z = dist.sample_matrix(m, seed)
    if m == 0:
        return Z, np.zeros(0, dtype=np.uint8)
    y = h.predict_matrix(Z)
    return Z, y


def sample_oracle(
    h: OracleHandle, dist: Distribution, m: int, seed: Optional[int] = None
) -> List[LabeledSample]:
    """Draw m labeled samples (z, f(z)) with z from the distribution."""
    Z, y = sample_oracle_matrix(h, dist, m, seed)
    return [
        LabeledSample(instance=Instance.from_iterable(row), label=int(lab))
        for row, lab in zip(Z, y)
    ]


def sample_conditioned_matrix(
    h: OracleHandle,
    dist: Distribution,
    x: np.ndarray,
    features: Sequence[int],
    m: int,
    seed: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    Z = dist.sample_conditioned_matrix(x, features, m, seed)
    if m == 0:
        return Z, np.zeros(0, dtype=np.uint8)
    return Z, h.predict_matrix(Z)


def sample_conditioned(
    h: OracleHandle,
    dist: Distribution,
    x: Instance,
    features: Sequence[int],
    m: int,
    seed: Optional[int] = None,
) -> List[LabeledSample]:
    """Draw m labeled samples conditioned on agreement with x over `features`."""
    Z, y = sample_conditioned_matrix(h, dist, x.to_array(), features, m, seed)
    return [
        LabeledSample(instance=Instance.from_iterable(row), label=int(lab))
        for row, lab in zip(Z, y)
    ]


def parse_oracle_spec(spec: str) -> Tuple[str, str]:
    """Split an oracle spec into (kind, rest): builtin:... or exec:..."""
    if ":" not in spec:
        raise ContractViolation(
            f"oracle spec must look like builtin:<model> or exec:<command>, got {spec!r}"
        )
    kind, rest = spec.split(":", 1)
    if kind not in ("builtin", "exec"):
        raise ContractViolation(f"unknown oracle kind {kind!r}")
    return kind, rest


def build_oracle(
    spec: str,
    *,
    dataset: Optional[BinaryDataset] = None,
    dimension: Optional[int] = None,
    seed: int = 0,
) -> OracleHandle:
    """Build an oracle from a CLI-style spec string.

    builtin specs: logistic, mlp[:hidden], tree[:depth] (need a dataset), and
    synthetic ones: constant:<label>, monomial:<j,j,...>, parity,
    dictator:<j>, random-tree:<depth> (need a dimension).
    """
    kind, rest = parse_oracle_spec(spec)
    if kind == "exec":
        return external_oracle(rest)
    parts = rest.split(":")
    head = parts[0]
    if head in ("logistic", "mlp", "tree"):
        if dataset is None:
            raise ContractViolation(f"builtin model {head!r} needs a prepared dataset")
        return train_builtin(dataset, rest, seed)
    d = dimension if dimension is not None else (dataset.dimension if dataset else None)
    if d is None:
        raise ContractViolation(f"synthetic model {head!r} needs a dimension")
    if head == "constant":
        return constant_model(d, int(parts[1]) if len(parts) > 1 else 1)
    if head == "monomial":
        vars_ = [int(t) for t in parts[1].split(",")] if len(parts) > 1 and parts[1] else []
        return monomial_model(d, vars_)
    if head == "parity":
        return parity_model(d)
    if head == "dictator":
        return dictator_model(d, int(parts[1]) if len(parts) > 1 else 0)
    if head == "random-tree":
        depth = int(parts[1]) if len(parts) > 1 else 4
        return random_tree_model(d, depth, seed)
    raise ContractViolation(f"unknown builtin oracle {rest!r}")
