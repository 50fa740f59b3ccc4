import numpy as np
import pytest

from ruleseeker import (
    OracleUnavailableError,
    ProtocolError,
    external_oracle,
    run_conformance,
)
from ruleseeker.protocol import ExternalOracleProcess

from conftest import stub_oracle_cmd


def test_conformance_passes_against_stub():
    report = run_conformance(stub_oracle_cmd("--dim", "8", "--model", "parity"))
    assert report.dimension == 8
    assert report.passed, report.render()
    names = [name for name, _, _ in report.checks]
    assert "predict batch of 1000" in names
    assert "recovers from invalid JSON" in names


def test_external_handle_predictions_match_model():
    h = external_oracle(stub_oracle_cmd("--dim", "6", "--model", "parity"))
    try:
        Z = np.random.default_rng(0).integers(0, 2, size=(25, 6), dtype=np.uint8)
        got = h.predict_matrix(Z)
        assert np.array_equal(got, Z.sum(axis=1) % 2)
        again = h.predict_matrix(Z)
        assert np.array_equal(got, again)
        assert h.query_count == 50
    finally:
        h.close()


def test_garbage_reply_is_protocol_error():
    proc = ExternalOracleProcess(stub_oracle_cmd("--bad-mode", "garbage-reply"))
    try:
        with pytest.raises(ProtocolError):
            proc.predict_rows([[0] * 8])
    finally:
        proc.close()


def test_wrong_arity_is_protocol_error():
    proc = ExternalOracleProcess(stub_oracle_cmd("--bad-mode", "wrong-arity"))
    try:
        with pytest.raises(ProtocolError):
            proc.predict_rows([[0] * 8, [1] * 8])
    finally:
        proc.close()


def test_dead_process_is_unavailable_error():
    proc = ExternalOracleProcess(stub_oracle_cmd("--bad-mode", "die-after-hello"))
    try:
        with pytest.raises(OracleUnavailableError):
            proc.predict_rows([[0] * 8])
            proc.predict_rows([[0] * 8])  # at most two attempts needed to notice
    finally:
        proc.close()


def test_hang_times_out():
    proc = ExternalOracleProcess(stub_oracle_cmd("--bad-mode", "hang"), timeout=0.5)
    try:
        with pytest.raises(OracleUnavailableError):
            proc.predict_rows([[0] * 8])
    finally:
        proc.proc.kill()
        proc.proc.wait()


def test_nonexistent_command_is_unavailable():
    with pytest.raises(OracleUnavailableError):
        ExternalOracleProcess(["/nonexistent/oracle/binary"])


def test_conformance_module_entry(capsys):
    from ruleseeker.protocol import _main

    code = _main(stub_oracle_cmd("--dim", "4", "--model", "constant:1"))
    out = capsys.readouterr().out
    assert code == 0
    assert "result: PASS" in out
