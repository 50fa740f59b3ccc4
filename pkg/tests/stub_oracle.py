"""Minimal wire-protocol v1 oracle used by the protocol tests.

Serves a fixed synthetic model over stdin/stdout. Failure modes can be
injected to exercise the client's error handling.
"""
import argparse
import json
import sys
import time


def predict_row(row, model):
    if model == "parity":
        return sum(row) % 2
    if model.startswith("dictator"):
        j = int(model.split(":")[1])
        return row[j]
    if model.startswith("constant"):
        return int(model.split(":")[1])
    raise SystemExit(f"unknown stub model {model!r}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--model", default="parity")
    parser.add_argument(
        "--bad-mode",
        default="none",
        choices=("none", "garbage-reply", "wrong-arity", "die-after-hello", "hang"),
    )
    args = parser.parse_args()

    out = sys.stdout
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("not an object")
        except ValueError as e:
            out.write(json.dumps({"op": "error", "msg": f"bad request: {e}"}) + "\n")
            out.flush()
            continue
        op = req.get("op")
        if op == "hello":
            out.write(json.dumps({"op": "hello", "dim": args.dim}) + "\n")
            out.flush()
            if args.bad_mode == "die-after-hello":
                return 1
        elif op == "predict":
            if args.bad_mode == "hang":
                time.sleep(3600)
            if args.bad_mode == "garbage-reply":
                out.write("}{ not json\n")
                out.flush()
                continue
            rows = req.get("x")
            if not isinstance(rows, list):
                out.write(json.dumps({"op": "error", "msg": "predict needs x"}) + "\n")
                out.flush()
                continue
            labels = [predict_row(row, args.model) for row in rows]
            if args.bad_mode == "wrong-arity":
                labels = labels[:-1]
            out.write(json.dumps({"op": "labels", "y": labels}) + "\n")
            out.flush()
        elif op == "bye":
            return 0
        else:
            out.write(json.dumps({"op": "error", "msg": f"unknown op {op!r}"}) + "\n")
            out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
