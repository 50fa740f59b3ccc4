"""Hot numeric kernels for the branch-and-bound search.

The search spends almost all of its time scoring candidate features against
the currently fired examples. That loop is compiled with numba when available;
set RULESEEKER_NO_NUMBA=1 to force the pure-numpy fallback (used on machines
without a working JIT, and by the kernel benchmark for comparison).

Both implementations are importable for equivalence tests:
``node_scores_numpy`` always exists, ``node_scores_numba`` is None when numba
is unavailable or disabled. ``node_scores`` is the selected one.
"""
from __future__ import annotations

import os

import numpy as np


def _numba_disabled() -> bool:
    return os.environ.get("RULESEEKER_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


def node_scores_numpy(U, fired_idx, cand, wneg, wpos):
    """Per-candidate kill weights over the fired examples.

    Returns (negkill, poskill, killable_neg):
      negkill[a] = total negative weight of fired examples with U[i, cand[a]] == 0
      poskill[a] = same for positive weight
      killable_neg = total negative weight of fired examples some candidate can kill
    """
    if fired_idx.size == 0 or cand.size == 0:
        return (
            np.zeros(cand.size, dtype=np.int64),
            np.zeros(cand.size, dtype=np.int64),
            0,
        )
    zero = U[np.ix_(fired_idx, cand)] == 0  # (nf, nc)
    zero_i64 = zero.astype(np.int64)
    negkill = zero_i64.T @ wneg[fired_idx]
    poskill = zero_i64.T @ wpos[fired_idx]
    rows = zero.any(axis=1)
    killable_neg = int(wneg[fired_idx[rows]].sum())
    return negkill, poskill, killable_neg


node_scores_numba = None

if not _numba_disabled():
    try:
        from numba import njit

        @njit(cache=True, nogil=True)
        def _node_scores_jit(U, fired_idx, cand, wneg, wpos):  # pragma: no cover - compiled
            nf = fired_idx.size
            nc = cand.size
            negkill = np.zeros(nc, dtype=np.int64)
            poskill = np.zeros(nc, dtype=np.int64)
            killable_neg = 0
            for t in range(nf):
                i = fired_idx[t]
                wn = wneg[i]
                wp = wpos[i]
                row_has_zero = False
                for a in range(nc):
                    if U[i, cand[a]] == 0:
                        negkill[a] += wn
                        poskill[a] += wp
                        row_has_zero = True
                if row_has_zero and wn > 0:
                    killable_neg += wn
            return negkill, poskill, killable_neg

        def node_scores_numba(U, fired_idx, cand, wneg, wpos):
            negkill, poskill, killable_neg = _node_scores_jit(U, fired_idx, cand, wneg, wpos)
            return negkill, poskill, int(killable_neg)

    except ImportError:
        node_scores_numba = None

NUMBA_ENABLED = node_scores_numba is not None

node_scores = node_scores_numba if NUMBA_ENABLED else node_scores_numpy


def filter_fired(U, fired_idx, j):
    """Indices of fired examples that stay fired after adding feature j."""
    return fired_idx[U[fired_idx, j] == 1]
