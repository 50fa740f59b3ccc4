"""Wire protocol v1 for external prediction oracles.

An external oracle is a child process speaking line-delimited JSON over its
standard streams, one request in flight at a time:

    -> {"op": "hello"}
    <- {"op": "hello", "dim": d}
    -> {"op": "predict", "x": [[0,1,...], ...]}
    <- {"op": "labels", "y": [0,1,...]}          # |y| == |x|, order-preserving
    -> {"op": "bye"}                              # then the process exits

A server replies {"op": "error", "msg": ...} to malformed requests and keeps
serving. Any other reply shape is a protocol error on our side.
"""
from __future__ import annotations

import json
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np


class ProtocolError(RuntimeError):
    """The oracle replied, but not in wire protocol v1."""


class OracleUnavailableError(RuntimeError):
    """The oracle process died or stopped answering.

    `partial` carries whatever labels were gathered before the failure.
    """

    def __init__(self, message: str, partial: Optional[List[int]] = None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class ExternalOracleProcess:
    """Client for one oracle child process. Requests are serialized by a lock."""

    def __init__(self, command: Union[str, Sequence[str]], *, timeout: float = 120.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._buf = b""
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
            )
        except OSError as e:
            raise OracleUnavailableError(f"cannot start oracle {argv!r}: {e}")
        reply = self.request({"op": "hello"})
        if reply.get("op") != "hello" or not isinstance(reply.get("dim"), int):
            raise ProtocolError(f"bad handshake reply: {reply!r}")
        self.dimension = int(reply["dim"])

    # -- low-level framing -------------------------------------------------

    def send_raw(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise OracleUnavailableError(
                f"oracle process exited with code {self.proc.returncode}"
            )
        try:
            self.proc.stdin.write(line.encode() + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise OracleUnavailableError(f"oracle stdin closed: {e}")

    def read_line(self, timeout: Optional[float] = None) -> str:
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        fd = self.proc.stdout.fileno()
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise OracleUnavailableError("timed out waiting for oracle reply")
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.5))
            if ready:
                chunk = self.proc.stdout.read1(65536)
                if not chunk:
                    raise OracleUnavailableError("oracle closed its output stream")
                self._buf += chunk
            elif self.proc.poll() is not None:
                raise OracleUnavailableError(
                    f"oracle process exited with code {self.proc.returncode}"
                )
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode()

    def request(self, obj: dict, timeout: Optional[float] = None) -> dict:
        with self._lock:
            self.send_raw(json.dumps(obj, separators=(",", ":")))
            line = self.read_line(timeout)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"oracle reply is not JSON: {line!r}")
        if not isinstance(reply, dict):
            raise ProtocolError(f"oracle reply is not an object: {line!r}")
        return reply

    # -- protocol ops ------------------------------------------------------

    def predict_rows(self, rows: List[List[int]]) -> List[int]:
        reply = self.request({"op": "predict", "x": rows})
        if reply.get("op") == "error":
            raise ProtocolError(f"oracle rejected predict request: {reply.get('msg')!r}")
        if reply.get("op") != "labels" or "y" not in reply:
            raise ProtocolError(f"unexpected reply to predict: {reply!r}")
        y = reply["y"]
        if not isinstance(y, list) or len(y) != len(rows):
            raise ProtocolError(
                f"label arity mismatch: sent {len(rows)} rows, got {len(y) if isinstance(y, list) else y!r}"
            )
        labels = []
        for val in y:
            if val not in (0, 1):
                raise ProtocolError(f"label out of range: {val!r}")
            labels.append(int(val))
        return labels

    def predict_matrix(self, Z: np.ndarray) -> np.ndarray:
        rows = [[int(b) for b in row] for row in np.asarray(Z)]
        return np.array(self.predict_rows(rows), dtype=np.uint8)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.send_raw(json.dumps({"op": "bye"}))
            except OracleUnavailableError:
                pass
            try:
                self.proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass

    def __enter__(self) -> "ExternalOracleProcess":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# ---------------------------------------------------------------------------
# Conformance driver
# ---------------------------------------------------------------------------


@dataclass
class ConformanceReport:
    command: str
    dimension: int = 0
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, ok, detail))

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def render(self) -> str:
        lines = [f"conformance against: {self.command}"]
        for name, ok, detail in self.checks:
            status = "ok  " if ok else "FAIL"
            lines.append(f"  [{status}] {name}" + (f" ({detail})" if detail else ""))
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def run_conformance(
    command: Union[str, Sequence[str]],
    *,
    batch_sizes: Sequence[int] = (1, 7, 1000),
    seed: int = 20240,
    timeout: float = 300.0,
) -> ConformanceReport:
    """Drive a full protocol session against an oracle command.

    Covers: handshake, order/arity-exact predict batches (including a large
    one), within-session determinism, recovery from malformed requests, and a
    clean shutdown on bye.
    """
    cmd_str = command if isinstance(command, str) else " ".join(command)
    report = ConformanceReport(command=cmd_str)
    rng = np.random.default_rng(seed)
    try:
        oracle = ExternalOracleProcess(command, timeout=timeout)
    except (ProtocolError, OracleUnavailableError) as e:
        report.record("handshake", False, str(e))
        return report
    report.dimension = oracle.dimension
    report.record("handshake", oracle.dimension > 0, f"dim={oracle.dimension}")
    d = oracle.dimension

    try:
        first_batch = None
        first_labels = None
        for size in batch_sizes:
            Z = rng.integers(0, 2, size=(size, d), dtype=np.uint8)
            rows = [[int(b) for b in row] for row in Z]
            try:
                labels = oracle.predict_rows(rows)
                report.record(f"predict batch of {size}", True, f"{len(labels)} labels")
            except (ProtocolError, OracleUnavailableError) as e:
                report.record(f"predict batch of {size}", False, str(e))
                return report
            if first_batch is None:
                first_batch, first_labels = rows, labels

        # order preservation: a reversed batch must give reversed labels
        try:
            rev = oracle.predict_rows(list(reversed(first_batch)))
            ok = rev == list(reversed(first_labels))
            report.record("order-preserving replies", ok)
        except (ProtocolError, OracleUnavailableError) as e:
            report.record("order-preserving replies", False, str(e))
            return report

        # determinism within a session
        try:
            again = oracle.predict_rows(first_batch)
            report.record("deterministic within session", again == first_labels)
        except (ProtocolError, OracleUnavailableError) as e:
            report.record("deterministic within session", False, str(e))
            return report

        # malformed request: server must answer with an error object and keep going
        for name, raw in (
            ("recovers from invalid JSON", "this is not json"),
            ("recovers from unknown op", json.dumps({"op": "nonsense"})),
        ):
            try:
                with oracle._lock:
                    oracle.send_raw(raw)
                    line = oracle.read_line()
                reply = json.loads(line)
                ok = isinstance(reply, dict) and reply.get("op") == "error" and "msg" in reply
                if ok:
                    again = oracle.predict_rows(first_batch)
                    ok = again == first_labels
                report.record(name, ok, line[:80])
            except (ProtocolError, OracleUnavailableError, json.JSONDecodeError) as e:
                report.record(name, False, str(e))
                return report

        # clean shutdown
        try:
            oracle.send_raw(json.dumps({"op": "bye"}))
            code = oracle.proc.wait(timeout=30.0)
            report.record("clean exit on bye", code == 0, f"exit code {code}")
        except (subprocess.TimeoutExpired, OracleUnavailableError) as e:
            report.record("clean exit on bye", False, str(e))
    finally:
        oracle.close()
    return report


def _main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the conformance script: python -m ruleseeker.protocol -- <command...>"""
    import argparse
    import sys

    parser = argparse.ArgumentParser(
        prog="python -m ruleseeker.protocol",
        description="Wire-protocol v1 conformance check for an oracle command.",
    )
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument(
        "command",
        nargs=argparse.REMAINDER,
        help="oracle command line to test (prefix with -- if it takes flags)",
    )
    args = parser.parse_args(argv)
    command = [c for i, c in enumerate(args.command) if not (i == 0 and c == "--")]
    if not command:
        parser.error("missing oracle command")
    report = run_conformance(command, seed=args.seed)
    print(report.render())
    return 0 if report.passed else 1


if __name__ == "__main__":
    import sys

    sys.exit(_main())
