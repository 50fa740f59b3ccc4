"""Command-line interface.

Subcommands: prepare (CSV -> binary feature artifacts), explain (one anchor),
evaluate (precision of a stored or inline explanation), benchmark (full
sweep), export-model (solver instance dump + integer-linear model text).

stdout carries human-readable text only; machine-readable artifacts are files
in the --out directory, and every output directory receives an echo of the
effective configuration. Exit codes: 1 config errors, 2 data errors, 3 oracle
failures, 4 solver contract violations, 5 benchmark with zero surviving rows.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from .blackbox import (
    ConditioningInfeasibleError,
    Distribution,
    build_oracle,
)
from .core import ContractViolation, Instance, rule_from_explanation
from .data import DataError, load_manifest, load_prepared, prepare, save_prepared
from .evaluate import (
    BenchmarkConfig,
    estimate_precision,
    explain_instance,
)
from .protocol import OracleUnavailableError, ProtocolError
from .seeding import SCHEME, derive_seed, root_seed_default
from .solver import SolveInstance, dump_instance, export_model_text
from .transform import agreement_matrices
from .blackbox import sample_oracle_matrix
from . import evaluate as evaluate_mod


class ConfigError(Exception):
    pass


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n")


def _echo_config(out_dir: Path, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "effective_config.json", dict(config, seed_scheme=SCHEME))


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return root_seed_default()


def _resolve_instance(bds, selector: str):
    """Instance selector: a dataset row index, or bits:0101... inline."""
    if selector.startswith("bits:"):
        bits = selector[len("bits:") :]
        inst = Instance.from_bitstring(bits)
        if inst.dimension != bds.dimension:
            raise ContractViolation(
                f"inline instance has {inst.dimension} bits, dataset dimension is {bds.dimension}"
            )
        return -1, inst
    try:
        idx = int(selector)
    except ValueError:
        raise ConfigError(f"instance selector must be a row index or bits:<0/1 string>, got {selector!r}")
    if not 0 <= idx < bds.n_rows:
        raise ConfigError(f"row index {idx} out of range (dataset has {bds.n_rows} rows)")
    return idx, bds.instance(idx)


def cmd_prepare(args) -> int:
    manifest = load_manifest(args.manifest)
    bds, binarizer = prepare(args.csv, manifest)
    out = Path(args.out)
    effective = {
        "command": "prepare",
        "csv": str(args.csv),
        "manifest": manifest,
    }
    save_prepared(out, bds, binarizer, dict(effective, seed_scheme=SCHEME))
    print(f"prepared dataset: {bds.n_rows} rows, dimension {bds.dimension}")
    print(f"train/test split: {bds.train_indices.size}/{bds.test_indices.size}")
    print(f"positive class: {bds.positive_class!r} (of {list(bds.class_names)})")
    print(f"artifacts written to {out}")
    return 0


def _make_distribution(name: str, bds, seed: int) -> Distribution:
    if name == "empirical":
        return Distribution.empirical(bds.instances, seed=seed)
    return Distribution.uniform(bds.dimension, seed=seed)


def cmd_explain(args) -> int:
    bds, _ = load_prepared(args.dataset)
    root = _resolve_seed(args)
    instance_id, anchor = _resolve_instance(bds, args.instance)
    oracle = build_oracle(
        args.oracle, dataset=bds, dimension=bds.dimension, seed=derive_seed(root, "model")
    )
    try:
        dist = _make_distribution(args.distribution, bds, root)
        sample_seed = derive_seed(root, "sample", max(instance_id, 0), args.m)
        t0 = time.perf_counter()
        explanation, report = explain_instance(
            oracle,
            dist,
            anchor,
            args.k,
            args.variant,
            args.m,
            time_limit=args.time_limit,
            seed=sample_seed,
            beam_width=args.beam_width,
            node_limit=args.node_limit,
        )
        elapsed = time.perf_counter() - t0
    finally:
        oracle.close()

    rule = rule_from_explanation(explanation)
    print(rule.render(bds.feature_names))
    print(f"features: {list(explanation.features)}")
    print(
        f"objective: {explanation.objective} of {args.m} samples"
        f" | optimal: {explanation.optimal} | nodes: {report.nodes_explored}"
        f" | elapsed: {elapsed:.3f}s"
    )
    if args.out:
        out = Path(args.out)
        record = {
            "dataset": str(args.dataset),
            "instance_id": instance_id,
            "anchor": anchor.to_bitstring(),
            "anchor_label": explanation.anchor_label,
            "k": args.k,
            "m": args.m,
            "variant": args.variant,
            "features": list(explanation.features),
            "feature_names": [bds.feature_names[j] for j in explanation.features],
            "objective": explanation.objective,
            "full_objective": report.full_objective,
            "optimal": explanation.optimal,
            "nodes": report.nodes_explored,
            "rule": {
                "body": sorted([j, int(v)] for j, v in rule.body),
                "head": rule.head,
            },
            "seed": root,
            "sample_seed": sample_seed,
        }
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "explain.json", record)
        _echo_config(out, _explain_effective(args, root))
        print(f"record written to {out / 'explain.json'}")
    return 0


def _explain_effective(args, root: int) -> dict:
    return {
        "command": "explain",
        "dataset": str(args.dataset),
        "oracle": args.oracle,
        "instance": args.instance,
        "k": args.k,
        "m": args.m,
        "variant": args.variant,
        "time_limit": args.time_limit,
        "distribution": args.distribution,
        "beam_width": args.beam_width,
        "node_limit": args.node_limit,
        "seed": root,
    }


def cmd_evaluate(args) -> int:
    bds, _ = load_prepared(args.dataset)
    root = _resolve_seed(args)
    if args.explanation:
        record = json.loads(Path(args.explanation).read_text())
        anchor = Instance.from_bitstring(record["anchor"])
        features = [int(j) for j in record["features"]]
        instance_id = int(record.get("instance_id", -1))
    elif args.instance is not None and args.features is not None:
        instance_id, anchor = _resolve_instance(bds, args.instance)
        features = [int(t) for t in args.features.split(",") if t != ""]
    else:
        raise ConfigError("evaluate needs --explanation FILE or --instance plus --features")

    oracle = build_oracle(
        args.oracle, dataset=bds, dimension=bds.dimension, seed=derive_seed(root, "model")
    )
    try:
        dist = _make_distribution(args.distribution, bds, root)
        estimate = estimate_precision(
            oracle,
            dist,
            anchor,
            features,
            args.eval_samples,
            seed=derive_seed(root, "eval", max(instance_id, 0)),
            conditioning=args.conditioning,
        )
    finally:
        oracle.close()
    print(
        f"precision error: {estimate.value_float:.4f}"
        f" ({estimate.errors}/{estimate.samples_used} samples, ±{estimate.stderr:.4f})"
        f" [{estimate.conditioning}]"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(
            out / "evaluation.json",
            {
                "dataset": str(args.dataset),
                "instance_id": instance_id,
                "anchor": anchor.to_bitstring(),
                "features": list(features),
                "errors": estimate.errors,
                "samples_used": estimate.samples_used,
                "precision_error": estimate.value_float,
                "conditioning": estimate.conditioning,
                "seed": root,
            },
        )
        _echo_config(
            out,
            {
                "command": "evaluate",
                "dataset": str(args.dataset),
                "oracle": args.oracle,
                "eval_samples": args.eval_samples,
                "conditioning": args.conditioning,
                "seed": root,
            },
        )
    return 0


def cmd_benchmark(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse benchmark config: {e}")
    # flags override the config file
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = BenchmarkConfig.from_dict(raw)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(out, dict(cfg.to_dict(), command="benchmark"))
    report = evaluate_mod.run_benchmark(
        cfg,
        checkpoint_path=out / "rows.jsonl",
        event_log_path=out / "events.jsonl",
    )
    (out / "rows.csv").write_text(report.rows_csv())
    (out / "summary.csv").write_text(report.summary_csv())
    (out / "summary_timing.csv").write_text(report.timing_csv())
    ok = sum(1 for r in report.rows if r.status == "ok")
    failed = len(report.rows) - ok
    print(f"benchmark finished: {ok} rows ok, {failed} failed")
    for a in report.aggregates():
        print(
            f"  {a['dataset']} {a['variant']} k={a['k']} m={a['m']}: "
            f"{a['mean_precision']:.3f} (±{a['std_precision']:.3f}) over {a['rows_ok']} rows"
        )
    print(f"reports written to {out}")
    if report.rows and ok == 0:
        return 5
    return 0


def cmd_export_model(args) -> int:
    bds, _ = load_prepared(args.dataset)
    root = _resolve_seed(args)
    instance_id, anchor = _resolve_instance(bds, args.instance)
    oracle = build_oracle(
        args.oracle, dataset=bds, dimension=bds.dimension, seed=derive_seed(root, "model")
    )
    try:
        dist = _make_distribution(args.distribution, bds, root)
        x_arr = anchor.to_array()
        fx = int(oracle.predict_matrix(x_arr[None, :])[0])
        Z, y = sample_oracle_matrix(
            oracle, dist, args.m, derive_seed(root, "sample", max(instance_id, 0), args.m)
        )
        U, v = agreement_matrices(x_arr, fx, Z, y)
        inst = SolveInstance.from_matrices(U, v, args.k, args.variant)
    finally:
        oracle.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "instance.dump").write_text(dump_instance(inst))
    (out / "model.lp").write_text(
        export_model_text(inst, literal_cardinality=args.literal_cardinality)
    )
    _echo_config(
        out,
        {
            "command": "export-model",
            "dataset": str(args.dataset),
            "oracle": args.oracle,
            "instance": args.instance,
            "k": args.k,
            "m": args.m,
            "variant": args.variant,
            "literal_cardinality": args.literal_cardinality,
            "seed": root,
        },
    )
    print(f"instance dump and model written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ruleseeker",
        description="Rule explanations for black-box classifiers, with measured precision.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="binarize a CSV dataset")
    p.add_argument("csv", help="input CSV file with a header row")
    p.add_argument("manifest", help="JSON manifest: target column, schema, split, bins")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.set_defaults(func=cmd_prepare)

    def common_pipeline_args(p, with_variant=True):
        p.add_argument("--dataset", required=True, help="prepared dataset directory")
        p.add_argument("--oracle", required=True, help="builtin:<model> or exec:<command>")
        p.add_argument("--seed", type=int, default=None, help="root seed (default: $RULESEEKER_SEED or 0)")
        p.add_argument(
            "--distribution",
            choices=("uniform", "empirical"),
            default="uniform",
            help="sampling distribution over instances",
        )

    p = sub.add_parser("explain", help="explain one instance")
    common_pipeline_args(p)
    p.add_argument("--instance", required=True, help="dataset row index or bits:0101...")
    p.add_argument("--k", type=int, default=5, help="explanation size budget")
    p.add_argument("--m", type=int, default=1000, help="training samples drawn from the oracle")
    p.add_argument("--variant", choices=("cop", "sat", "greedy"), default="cop")
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--beam-width", type=int, default=1, help="beam width for the greedy variant")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for the machine-readable record")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="estimate the precision error of an explanation")
    common_pipeline_args(p)
    p.add_argument("--explanation", default=None, help="explain.json produced by the explain command")
    p.add_argument("--instance", default=None, help="dataset row index or bits:0101...")
    p.add_argument("--features", default=None, help="comma-separated feature indices")
    p.add_argument("--eval-samples", type=int, default=1000)
    p.add_argument("--conditioning", choices=("exact", "reject"), default="exact")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run a benchmark sweep from a config file")
    p.add_argument("--config", required=True, help="JSON benchmark configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel rows (builtin oracles only)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("export-model", help="dump a solver instance and its integer-linear model")
    common_pipeline_args(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--variant", choices=("cop", "sat", "greedy"), default="cop")
    p.add_argument("--literal-cardinality", action="store_true",
                   help="export the cardinality row as <= instead of =")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_model)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (OracleUnavailableError, ProtocolError, ConditioningInfeasibleError) as e:
        print(f"oracle error: {e}", file=sys.stderr)
        return 3
    except ContractViolation as e:
        print(f"contract violation: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
