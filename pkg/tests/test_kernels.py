import numpy as np
import pytest

from ruleseeker import kernels


def _random_case(rng):
    m = int(rng.integers(1, 120))
    d = int(rng.integers(1, 25))
    U = rng.integers(0, 2, size=(m, d), dtype=np.uint8)
    nf = int(rng.integers(0, m + 1))
    fired = np.sort(rng.choice(m, size=nf, replace=False)).astype(np.int64)
    nc = int(rng.integers(0, d + 1))
    cand = np.sort(rng.choice(d, size=nc, replace=False)).astype(np.int64)
    w = rng.integers(1, 5, size=m).astype(np.int64)
    v = rng.integers(0, 2, size=m)
    wneg = np.where(v == 0, w, 0).astype(np.int64)
    wpos = np.where(v == 1, w, 0).astype(np.int64)
    return U, fired, cand, wneg, wpos


def test_numpy_kernel_against_reference_loops():
    rng = np.random.default_rng(31)
    for _ in range(100):
        U, fired, cand, wneg, wpos = _random_case(rng)
        negkill, poskill, killable = kernels.node_scores_numpy(U, fired, cand, wneg, wpos)
        ref_neg = np.zeros(cand.size, dtype=np.int64)
        ref_pos = np.zeros(cand.size, dtype=np.int64)
        ref_killable = 0
        for i in fired:
            hit = False
            for a, j in enumerate(cand):
                if U[i, j] == 0:
                    ref_neg[a] += wneg[i]
                    ref_pos[a] += wpos[i]
                    hit = True
            if hit:
                ref_killable += wneg[i]
        assert np.array_equal(negkill, ref_neg)
        assert np.array_equal(poskill, ref_pos)
        assert killable == ref_killable


@pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba unavailable or disabled")
def test_numba_kernel_matches_numpy():
    rng = np.random.default_rng(32)
    for _ in range(100):
        U, fired, cand, wneg, wpos = _random_case(rng)
        a = kernels.node_scores_numba(U, fired, cand, wneg, wpos)
        b = kernels.node_scores_numpy(U, fired, cand, wneg, wpos)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])
        assert a[2] == b[2]


def test_filter_fired():
    U = np.array([[1, 0], [0, 1], [1, 1]], dtype=np.uint8)
    fired = np.array([0, 1, 2], dtype=np.int64)
    out = kernels.filter_fired(U, fired, 0)
    assert list(out) == [0, 2]


def test_fallback_selected_by_env(tmp_path):
    import subprocess
    import sys

    code = (
        "import ruleseeker.kernels as k; "
        "assert not k.NUMBA_ENABLED; "
        "assert k.node_scores is k.node_scores_numpy; "
        "print('fallback ok')"
    )
    proc = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "RULESEEKER_NO_NUMBA": "1"},
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "fallback ok" in proc.stdout
