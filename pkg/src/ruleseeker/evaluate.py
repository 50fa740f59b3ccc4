"""Estimators, sample-size bounds, the explain pipeline, and the benchmark.

Precision error of a feature set S at an anchor x is the probability that the
black box labels a conditioned sample (agreeing with x on S) differently from
x. The default estimator fixes the S-coordinates and draws the free ones from
the distribution; a compatibility mode instead draws unconditioned samples and
keeps the covered ones, which is much noisier but matches the literal
uniform-sampling protocol.
"""
from __future__ import annotations

import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .blackbox import (
    ConditioningInfeasibleError,
    Distribution,
    OracleHandle,
    build_oracle,
    sample_conditioned_matrix,
    sample_oracle_matrix,
)
from .core import (
    ContractViolation,
    Explanation,
    Instance,
    Rule,
    SolveStats,
    rule_from_explanation,
)
from .data import BinaryDataset, load_prepared
from .seeding import SCHEME, derive_seed
from .solver import SolveInstance, SolveReport, solve
from .transform import agreement_matrices


@dataclass(frozen=True)
class PrecisionEstimate:
    errors: int
    samples_used: int
    conditioning: str  # "exact-conditional" | "rejection"

    @property
    def value(self) -> Fraction:
        return Fraction(self.errors, self.samples_used)

    @property
    def value_float(self) -> float:
        return self.errors / self.samples_used

    @property
    def stderr(self) -> float:
        v = self.value_float
        return math.sqrt(v * (1.0 - v) / self.samples_used)


@dataclass(frozen=True)
class PacBudget:
    epsilon: float
    delta: float
    k: int
    d: int
    m: int


def pac_bound_raw(epsilon: float, delta: float, k: int, d: int) -> float:
    """Sample-size bound before rounding: (2/eps^2)(k ln d + ln(2/delta))."""
    return (2.0 / (epsilon * epsilon)) * (k * math.log(d) + math.log(2.0 / delta))


def pac_sample_size(epsilon: float, delta: float, k: int, d: int) -> PacBudget:
    """Samples sufficient for an agnostic guarantee over size-<=k conjunctions."""
    if not (0 < epsilon < 1) or not (0 < delta < 1):
        raise ContractViolation("epsilon and delta must lie in (0,1)")
    if not 1 <= k <= d:
        raise ContractViolation(f"need 1 <= k <= d, got k={k}, d={d}")
    m = math.ceil(pac_bound_raw(epsilon, delta, k, d))
    return PacBudget(epsilon=epsilon, delta=delta, k=k, d=d, m=int(m))


def estimate_precision(
    h: OracleHandle,
    dist: Distribution,
    x: Instance,
    features: Sequence[int],
    m: int,
    *,
    seed: Optional[int] = None,
    conditioning: str = "exact",
) -> PrecisionEstimate:
    """Monte Carlo estimate of the precision error of `features` at anchor x."""
    if m < 1:
        raise ContractViolation(f"need at least one sample, got {m}")
    if conditioning not in ("exact", "reject"):
        raise ContractViolation(f"conditioning must be exact or reject, got {conditioning!r}")
    x_arr = x.to_array()
    fx = int(h.predict_matrix(x_arr[None, :])[0])
    if conditioning == "exact":
        Z, y = sample_conditioned_matrix(h, dist, x_arr, features, m, seed)
        errors = int((y != fx).sum())
        return PrecisionEstimate(errors=errors, samples_used=m, conditioning="exact-conditional")
    # literal protocol: unconditioned draws, estimate over the covered subset
    Z, y = sample_oracle_matrix(h, dist, m, seed)
    feats = sorted(set(int(j) for j in features))
    if feats:
        mask = (Z[:, feats] == x_arr[feats]).all(axis=1)
    else:
        mask = np.ones(Z.shape[0], dtype=bool)
    used = int(mask.sum())
    if used == 0:
        raise ConditioningInfeasibleError(
            f"none of {m} unconditioned samples agreed with the anchor on {len(feats)} features",
            coverage=0,
        )
    errors = int((y[mask] != fx).sum())
    return PrecisionEstimate(errors=errors, samples_used=used, conditioning="rejection")


def estimate_loss(
    h: OracleHandle,
    dist: Distribution,
    rule: Rule,
    m: int,
    *,
    seed: Optional[int] = None,
) -> Fraction:
    """Monte Carlo estimate of the rule's disagreement probability with f."""
    if m < 1:
        raise ContractViolation(f"need at least one sample, got {m}")
    Z, y = sample_oracle_matrix(h, dist, m, seed)
    preds = rule.predict_matrix(Z)
    return Fraction(int((preds != y).sum()), m)


def explain_instance(
    h: OracleHandle,
    dist: Distribution,
    x: Instance,
    k: int,
    variant: str,
    m: int,
    *,
    time_limit: float = 60.0,
    seed: int = 0,
    beam_width: int = 1,
    node_limit: Optional[int] = None,
) -> Tuple[Explanation, SolveReport]:
    """Full pipeline: sample the oracle, transform, solve, package the result."""
    if x.dimension != h.dimension:
        raise ContractViolation(
            f"anchor dimension {x.dimension} != oracle dimension {h.dimension}"
        )
    x_arr = x.to_array()
    fx = int(h.predict_matrix(x_arr[None, :])[0])
    Z, y = sample_oracle_matrix(h, dist, m, seed)
    U, v = agreement_matrices(x_arr, fx, Z, y)
    inst = SolveInstance.from_matrices(
        U,
        v,
        k,
        variant,
        time_limit=time_limit,
        seed=seed,
        node_limit=node_limit,
        beam_width=beam_width,
    )
    report = solve(inst)
    explanation = Explanation(
        features=report.chosen,
        budget=k,
        anchor=x,
        anchor_label=fx,
        objective=report.objective,
        optimal=report.optimal,
        solve_stats=SolveStats(
            elapsed=report.elapsed, nodes=report.nodes_explored, variant=variant
        ),
    )
    return explanation, report


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkConfig:
    dataset_dir: str
    oracle: str
    k_values: Tuple[int, ...] = (5,)
    m_values: Tuple[int, ...] = (1000,)
    variants: Tuple[str, ...] = ("cop",)
    instance_count: int = 100
    eval_samples: int = 1000
    time_limit: float = 60.0
    seed: int = 0
    conditioning: str = "exact"
    jobs: Optional[int] = None  # None: one worker per processor
    beam_width: int = 1
    train_distribution: str = "uniform"  # uniform | empirical
    anchor_source: str = "test"  # test | distribution
    node_limit: Optional[int] = None
    dataset_name: str = ""

    _KEYS = {
        "dataset": "dataset_dir",
        "dataset_dir": "dataset_dir",
        "oracle": "oracle",
        "k": "k_values",
        "k_values": "k_values",
        "m": "m_values",
        "m_values": "m_values",
        "variants": "variants",
        "instance_count": "instance_count",
        "eval_samples": "eval_samples",
        "time_limit": "time_limit",
        "seed": "seed",
        "conditioning": "conditioning",
        "jobs": "jobs",
        "beam_width": "beam_width",
        "train_distribution": "train_distribution",
        "anchor_source": "anchor_source",
        "node_limit": "node_limit",
        "dataset_name": "dataset_name",
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchmarkConfig":
        if not isinstance(raw, dict):
            raise ValueError("benchmark config must be a JSON object")
        kwargs = {}
        for key, value in raw.items():
            if key not in cls._KEYS:
                raise ValueError(f"unknown benchmark config key {key!r}")
            name = cls._KEYS[key]
            if name in ("k_values", "m_values"):
                value = tuple(int(v) for v in (value if isinstance(value, list) else [value]))
            elif name == "variants":
                value = tuple(value if isinstance(value, list) else [value])
            kwargs[name] = value
        if "dataset_dir" not in kwargs:
            raise ValueError("benchmark config needs a 'dataset' path")
        if "oracle" not in kwargs:
            raise ValueError("benchmark config needs an 'oracle' spec")
        cfg = cls(**kwargs)
        for variant in cfg.variants:
            if variant not in ("cop", "sat", "greedy"):
                raise ValueError(f"unknown variant {variant!r}")
        if cfg.conditioning not in ("exact", "reject"):
            raise ValueError(f"conditioning must be exact or reject, got {cfg.conditioning!r}")
        return cfg

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_dir,
            "oracle": self.oracle,
            "k": list(self.k_values),
            "m": list(self.m_values),
            "variants": list(self.variants),
            "instance_count": self.instance_count,
            "eval_samples": self.eval_samples,
            "time_limit": self.time_limit,
            "seed": self.seed,
            "conditioning": self.conditioning,
            "jobs": self.jobs,
            "beam_width": self.beam_width,
            "train_distribution": self.train_distribution,
            "anchor_source": self.anchor_source,
            "node_limit": self.node_limit,
            "dataset_name": self.dataset_name,
            "seed_scheme": SCHEME,
        }


@dataclass
class RowRecord:
    dataset: str
    instance_id: int
    anchor_bits: str
    k: int
    m: int
    variant: str
    status: str = "pending"
    error: str = ""
    features: Tuple[int, ...] = ()
    objective: int = -1
    full_objective: int = -1
    optimal: bool = False
    nodes: int = 0
    anchor_label: int = 0
    precision_errors: int = -1
    precision_samples: int = 0
    loss_errors: int = -1
    loss_samples: int = 0
    solve_seconds: float = 0.0
    total_seconds: float = 0.0

    @property
    def key(self) -> Tuple:
        return (self.dataset, self.instance_id, self.k, self.m, self.variant)

    @property
    def precision(self) -> Optional[float]:
        if self.precision_samples <= 0:
            return None
        return self.precision_errors / self.precision_samples

    @property
    def rule_loss(self) -> Optional[float]:
        if self.loss_samples <= 0:
            return None
        return self.loss_errors / self.loss_samples

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "instance_id": self.instance_id,
            "anchor_bits": self.anchor_bits,
            "k": self.k,
            "m": self.m,
            "variant": self.variant,
            "status": self.status,
            "error": self.error,
            "features": list(self.features),
            "objective": self.objective,
            "full_objective": self.full_objective,
            "optimal": self.optimal,
            "nodes": self.nodes,
            "anchor_label": self.anchor_label,
            "precision_errors": self.precision_errors,
            "precision_samples": self.precision_samples,
            "loss_errors": self.loss_errors,
            "loss_samples": self.loss_samples,
            "solve_seconds": self.solve_seconds,
            "total_seconds": self.total_seconds,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "RowRecord":
        raw = dict(raw)
        raw["features"] = tuple(raw.get("features", ()))
        return cls(**raw)


ROWS_CSV_FIELDS = [
    "dataset",
    "instance_id",
    "k",
    "m",
    "variant",
    "status",
    "anchor_label",
    "features",
    "objective",
    "full_objective",
    "optimal",
    "nodes",
    "precision_errors",
    "precision_samples",
    "precision",
    "stderr",
    "loss_errors",
    "loss_samples",
    "rule_loss",
    "error",
]


@dataclass
class EvalReport:
    config: BenchmarkConfig
    rows: List[RowRecord] = field(default_factory=list)

    def sorted_rows(self) -> List[RowRecord]:
        return sorted(self.rows, key=lambda r: r.key)

    def rows_csv(self) -> str:
        lines = [",".join(ROWS_CSV_FIELDS)]
        for r in self.sorted_rows():
            precision = "" if r.precision is None else f"{r.precision:.6f}"
            if r.precision is None:
                stderr = ""
            else:
                v = r.precision
                stderr = f"{math.sqrt(v * (1 - v) / r.precision_samples):.6f}"
            cells = [
                r.dataset,
                str(r.instance_id),
                str(r.k),
                str(r.m),
                r.variant,
                r.status,
                str(r.anchor_label),
                ";".join(str(j) for j in r.features),
                str(r.objective),
                str(r.full_objective),
                str(int(r.optimal)),
                str(r.nodes),
                str(r.precision_errors),
                str(r.precision_samples),
                precision,
                stderr,
                str(r.loss_errors),
                str(r.loss_samples),
                "" if r.rule_loss is None else f"{r.rule_loss:.6f}",
                r.error.replace(",", ";").replace("\n", " "),
            ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def aggregates(self) -> List[dict]:
        groups: Dict[Tuple, List[RowRecord]] = {}
        for r in self.rows:
            groups.setdefault((r.dataset, r.variant, r.k, r.m), []).append(r)
        out = []
        for (dataset, variant, k, m), rows in sorted(groups.items()):
            ok = [r for r in rows if r.status == "ok" and r.precision is not None]
            values = np.array([r.precision for r in ok], dtype=np.float64)
            losses = np.array(
                [r.rule_loss for r in ok if r.rule_loss is not None], dtype=np.float64
            )
            entry = {
                "dataset": dataset,
                "variant": variant,
                "k": k,
                "m": m,
                "rows_ok": len(ok),
                "rows_failed": len(rows) - len(ok),
                "mean_precision": float(values.mean()) if values.size else float("nan"),
                "std_precision": float(values.std(ddof=1)) if values.size > 1 else 0.0,
                "mean_rule_loss": float(losses.mean()) if losses.size else float("nan"),
                "std_rule_loss": float(losses.std(ddof=1)) if losses.size > 1 else 0.0,
                "mean_solve_seconds": float(np.mean([r.solve_seconds for r in ok])) if ok else 0.0,
            }
            out.append(entry)
        return out

    SUMMARY_FIELDS = (
        "dataset,variant,k,m,rows_ok,rows_failed,"
        "mean_precision,std_precision,mean_rule_loss,std_rule_loss"
    )

    def _summary_line(self, a: dict) -> str:
        return (
            f"{a['dataset']},{a['variant']},{a['k']},{a['m']},{a['rows_ok']},"
            f"{a['rows_failed']},{a['mean_precision']:.6f},{a['std_precision']:.6f},"
            f"{a['mean_rule_loss']:.6f},{a['std_rule_loss']:.6f}"
        )

    def summary_csv(self) -> str:
        lines = [self.SUMMARY_FIELDS]
        for a in self.aggregates():
            lines.append(self._summary_line(a))
        return "\n".join(lines) + "\n"

    def timing_csv(self) -> str:
        # Wall-clock column lives in its own file: the deterministic outputs
        # above must be byte-identical across reruns, timings are not.
        lines = [self.SUMMARY_FIELDS + ",mean_solve_seconds"]
        for a in self.aggregates():
            lines.append(self._summary_line(a) + f",{a['mean_solve_seconds']:.3f}")
        return "\n".join(lines) + "\n"


def _anchor_set(
    cfg: BenchmarkConfig, bds: BinaryDataset, dist: Distribution
) -> List[Tuple[int, Instance]]:
    rng = np.random.default_rng(derive_seed(cfg.seed, "anchors"))
    if cfg.anchor_source == "distribution":
        Z = dist.sample_matrix(cfg.instance_count, derive_seed(cfg.seed, "anchors", 1))
        return [(i, Instance.from_iterable(row)) for i, row in enumerate(Z)]
    pool = bds.test_indices if bds.test_indices.size else np.arange(bds.n_rows)
    count = min(cfg.instance_count, pool.size)
    chosen = rng.choice(pool, size=count, replace=False)
    return [(int(i), bds.instance(int(i))) for i in np.sort(chosen)]


def _run_row(
    cfg: BenchmarkConfig,
    oracle: OracleHandle,
    dist: Distribution,
    anchor_id: int,
    anchor: Instance,
    k: int,
    m: int,
    variant: str,
) -> RowRecord:
    row = RowRecord(
        dataset=cfg.dataset_name or cfg.dataset_dir,
        instance_id=anchor_id,
        anchor_bits=anchor.to_bitstring(),
        k=k,
        m=m,
        variant=variant,
    )
    t0 = time.perf_counter()
    try:
        sample_seed = derive_seed(cfg.seed, "sample", anchor_id, m)
        explanation, report = explain_instance(
            oracle,
            dist,
            anchor,
            k,
            variant,
            m,
            time_limit=cfg.time_limit,
            seed=sample_seed,
            beam_width=cfg.beam_width,
            node_limit=cfg.node_limit,
        )
        variant_idx = cfg.variants.index(variant)
        eval_seed = derive_seed(cfg.seed, "eval", anchor_id, k, m, variant_idx)
        estimate = estimate_precision(
            oracle,
            dist,
            anchor,
            explanation.features,
            cfg.eval_samples,
            seed=eval_seed,
            conditioning=cfg.conditioning,
        )
        # second metric: unconditioned disagreement rate of the induced rule
        loss = estimate_loss(
            oracle,
            dist,
            rule_from_explanation(explanation),
            cfg.eval_samples,
            seed=derive_seed(cfg.seed, "eval", anchor_id, k, m, variant_idx, 1),
        )
        row.status = "ok"
        row.features = explanation.features
        row.objective = report.objective
        row.full_objective = report.full_objective
        row.optimal = report.optimal
        row.nodes = report.nodes_explored
        row.anchor_label = explanation.anchor_label
        row.precision_errors = estimate.errors
        row.precision_samples = estimate.samples_used
        row.loss_errors = int(loss * cfg.eval_samples)  # exact: loss is errors/m
        row.loss_samples = cfg.eval_samples
        row.solve_seconds = report.elapsed
    except Exception as e:  # row failures are recorded, the run continues
        row.status = "failed"
        row.error = f"{type(e).__name__}: {e}"
    row.total_seconds = time.perf_counter() - t0
    return row


def run_benchmark(
    cfg: BenchmarkConfig,
    *,
    checkpoint_path: Optional[Union[str, Path]] = None,
    event_log_path: Optional[Union[str, Path]] = None,
    oracle: Optional[OracleHandle] = None,
) -> EvalReport:
    """Run the full sweep; resumable through the row checkpoint file."""
    bds, _ = load_prepared(cfg.dataset_dir)
    own_oracle = oracle is None
    if oracle is None:
        oracle = build_oracle(
            cfg.oracle, dataset=bds, dimension=bds.dimension, seed=derive_seed(cfg.seed, "model")
        )
    try:
        if cfg.train_distribution == "empirical":
            dist = Distribution.empirical(bds.instances, seed=cfg.seed)
        else:
            dist = Distribution.uniform(bds.dimension, seed=cfg.seed)

        done: Dict[Tuple, RowRecord] = {}
        checkpoint = Path(checkpoint_path) if checkpoint_path else None
        if checkpoint and checkpoint.exists():
            for line in checkpoint.read_text().splitlines():
                if line.strip():
                    row = RowRecord.from_json(json.loads(line))
                    done[row.key] = row

        anchors = _anchor_set(cfg, bds, dist)
        tasks = []
        for anchor_id, anchor in anchors:
            for k in cfg.k_values:
                for m in cfg.m_values:
                    for variant in cfg.variants:
                        tasks.append((anchor_id, anchor, k, m, variant))

        report = EvalReport(config=cfg)
        lock = threading.Lock()
        event_fh = open(event_log_path, "a") if event_log_path else None

        def finish(row: RowRecord) -> None:
            with lock:
                report.rows.append(row)
                if checkpoint:
                    with checkpoint.open("a") as fh:
                        fh.write(json.dumps(row.to_json(), sort_keys=True) + "\n")
                if event_fh:
                    event = {
                        "event": "row_done",
                        "key": list(row.key),
                        "status": row.status,
                        "total_seconds": row.total_seconds,
                        "time": time.time(),
                    }
                    event_fh.write(json.dumps(event, sort_keys=True) + "\n")
                    event_fh.flush()

        pending = []
        for anchor_id, anchor, k, m, variant in tasks:
            key = (cfg.dataset_name or cfg.dataset_dir, anchor_id, k, m, variant)
            if key in done:
                report.rows.append(done[key])
            else:
                pending.append((anchor_id, anchor, k, m, variant))

        jobs = cfg.jobs if cfg.jobs is not None else (os.cpu_count() or 1)
        if jobs > 1 and oracle.kind == "builtin":
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [
                    pool.submit(_run_row, cfg, oracle, dist, aid, a, k, m, var)
                    for aid, a, k, m, var in pending
                ]
                for fut in futures:
                    finish(fut.result())
        else:
            for aid, a, k, m, var in pending:
                finish(_run_row(cfg, oracle, dist, aid, a, k, m, var))

        if event_fh:
            event_fh.close()
        return report
    finally:
        if own_oracle:
            oracle.close()
