"""Minimum-error monotone conjunction search under a size budget.

Given transformed examples (u_i, v_i) with weights, find a variable set S with
|S| <= k minimizing the number of weighted errors of the conjunction over S:
an example is an error when it satisfies the conjunction but v = 0, or fails
it but v = 1. Three engines are provided:

  * ``solve_cop``     exact anytime branch-and-bound on the full objective
  * ``solve_sat``     same search counting only fired v=0 examples (a
                      relaxation with maximum-coverage structure)
  * ``solve_greedy``  beam-search baseline, no optimality claim
  * ``enumerate_exact``  brute-force oracle used by the test suite

Ties are broken by (objective, |S|, lexicographic S); ``enumerate_exact``
guarantees that order globally, the anytime engines apply it to the incumbents
they visit.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import ContractViolation
from .kernels import node_scores
from .transform import MonomialExample

VARIANTS = ("cop", "sat", "greedy")

ENUMERATION_CAP = 2_000_000


class EnumerationCapError(RuntimeError):
    """Raised when exhaustive enumeration would visit too many subsets."""


@dataclass(frozen=True, eq=False)
class SolveInstance:
    """A weighted, deduplicated learning instance for the engines above.

    U holds one row per distinct (u, v) pair; ``weights`` counts multiplicity.
    """

    U: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    dimension: int
    budget: int
    variant: str
    time_limit: float = 60.0
    seed: int = 0
    node_limit: Optional[int] = None
    beam_width: int = 1

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ContractViolation(f"unknown variant {self.variant!r}")
        if not 0 <= self.budget <= self.dimension:
            raise ContractViolation(
                f"budget must be in [0, {self.dimension}], got {self.budget}"
            )
        if self.time_limit <= 0:
            raise ContractViolation(f"time limit must be positive, got {self.time_limit}")

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    @classmethod
    def from_matrices(
        cls,
        U: np.ndarray,
        v: np.ndarray,
        budget: int,
        variant: str,
        *,
        weights: Optional[np.ndarray] = None,
        time_limit: float = 60.0,
        seed: int = 0,
        node_limit: Optional[int] = None,
        beam_width: int = 1,
    ) -> "SolveInstance":
        """Build an instance from raw example matrices, aggregating duplicates."""
        U = np.ascontiguousarray(np.asarray(U, dtype=np.uint8))
        v = np.asarray(v, dtype=np.uint8).ravel()
        if U.ndim != 2 or U.shape[0] != v.shape[0]:
            raise ContractViolation("U must be (m, d) with one v per row")
        if weights is None:
            weights = np.ones(U.shape[0], dtype=np.int64)
        else:
            weights = np.asarray(weights, dtype=np.int64).ravel()
        aU, av, aw = _aggregate(U, v, weights)
        return cls(
            U=aU,
            v=av,
            weights=aw,
            dimension=int(U.shape[1]),
            budget=budget,
            variant=variant,
            time_limit=time_limit,
            seed=seed,
            node_limit=node_limit,
            beam_width=beam_width,
        )

    @classmethod
    def from_examples(
        cls,
        examples: Sequence[MonomialExample],
        dimension: int,
        budget: int,
        variant: str,
        **kwargs,
    ) -> "SolveInstance":
        if examples:
            U = np.array([e.u.bits for e in examples], dtype=np.uint8)
            v = np.array([e.v for e in examples], dtype=np.uint8)
        else:
            U = np.zeros((0, dimension), dtype=np.uint8)
            v = np.zeros(0, dtype=np.uint8)
        if U.shape[0] and U.shape[1] != dimension:
            raise ContractViolation(
                f"examples have dimension {U.shape[1]}, expected {dimension}"
            )
        return cls.from_matrices(U, v, budget, variant, **kwargs)


@dataclass(frozen=True, eq=False)
class SolveReport:
    chosen: Tuple[int, ...]
    objective: int
    full_objective: int
    optimal: bool
    nodes_explored: int
    elapsed: float
    incumbent_history: Tuple[Tuple[float, int], ...]
    variant: str


def _aggregate(U, v, weights):
    """Collapse duplicate (u, v) rows, summing weights."""
    if U.shape[0] == 0:
        return U, v, weights
    keyed = np.concatenate([U, v[:, None]], axis=1)
    uniq, inverse = np.unique(keyed, axis=0, return_inverse=True)
    agg = np.zeros(uniq.shape[0], dtype=np.int64)
    np.add.at(agg, inverse, weights)
    return (
        np.ascontiguousarray(uniq[:, :-1]),
        np.ascontiguousarray(uniq[:, -1]),
        agg,
    )


def _variant_weights(inst: SolveInstance, variant: str):
    w = inst.weights
    wneg = np.where(inst.v == 0, w, 0).astype(np.int64)
    if variant == "sat":
        wpos = np.zeros_like(wneg)
    else:
        wpos = np.where(inst.v == 1, w, 0).astype(np.int64)
    return wneg, wpos


def objective_of(inst: SolveInstance, features: Sequence[int], variant: str = "cop") -> int:
    """Weighted error count of the conjunction over `features` under a variant."""
    wneg, wpos = _variant_weights(inst, variant)
    feats = sorted(set(int(j) for j in features))
    if feats:
        fired = inst.U[:, feats].all(axis=1)
    else:
        fired = np.ones(inst.U.shape[0], dtype=bool)
    return int(wneg[fired].sum() + wpos.sum() - wpos[fired].sum())


def _top_sum(values: np.ndarray, b: int) -> int:
    if b <= 0 or values.size == 0:
        return 0
    if b >= values.size:
        return int(values.sum())
    return int(np.partition(values, values.size - b)[values.size - b :].sum())


_kernel_warm = False


def _warm_kernel() -> None:
    # First numba call pays compilation; keep it out of solve timings.
    global _kernel_warm
    if not _kernel_warm:
        U = np.zeros((1, 1), dtype=np.uint8)
        node_scores(
            U,
            np.zeros(1, dtype=np.int64),
            np.zeros(1, dtype=np.int64),
            np.zeros(1, dtype=np.int64),
            np.zeros(1, dtype=np.int64),
        )
        _kernel_warm = True


class _Search:
    """Depth-first branch and bound over include-feature decisions.

    Each visited node carries the chosen set S; its children extend S by one
    feature drawn from the node's remaining candidates, so recursion depth is
    at most the budget. The bound combines the negatives no remaining feature
    can kill with a top-b relaxation of per-feature kill weights.
    """

    TIME_CHECK_MASK = 63

    def __init__(self, U, wneg, wpos, k, time_limit, node_limit):
        self.U = U
        self.wneg = wneg
        self.wpos = wpos
        self.k = k
        self.time_limit = time_limit
        self.node_limit = node_limit
        self.pos_total = int(wpos.sum())
        self.nodes = 0
        self.history: List[Tuple[float, int]] = []
        self.best_key = None  # (objective, |S|, tuple(S))
        self.timed_out = False
        self.start = time.perf_counter()

    def run(self):
        m = self.U.shape[0]
        fired = np.arange(m, dtype=np.int64)
        cand = np.arange(self.U.shape[1], dtype=np.int64)
        negw = int(self.wneg.sum())
        posw = int(self.wpos.sum())
        self._visit([], fired, cand, negw, posw)
        return self

    def _consider(self, obj: int, S: List[int]) -> None:
        key = (obj, len(S), tuple(S))
        if self.best_key is None or key < self.best_key:
            self.best_key = key
            self.history.append((time.perf_counter() - self.start, obj))

    def _check_budget(self) -> None:
        if self.node_limit is not None and self.nodes >= self.node_limit:
            self.timed_out = True
        elif (self.nodes & self.TIME_CHECK_MASK) == 0:
            if time.perf_counter() - self.start > self.time_limit:
                self.timed_out = True

    def _visit(self, S, fired_idx, cand, negw_f, posw_f):
        self.nodes += 1
        self._check_budget()
        if self.timed_out:
            return
        obj_now = negw_f + (self.pos_total - posw_f)
        self._consider(obj_now, S)
        if len(S) >= self.k or cand.size == 0 or fired_idx.size == 0:
            return
        negkill, poskill, killable_neg = node_scores(
            self.U, fired_idx, cand, self.wneg, self.wpos
        )
        keep = negkill > 0  # a feature killing no fired negatives can never help
        if not keep.all():
            cand = cand[keep]
            negkill = negkill[keep]
            poskill = poskill[keep]
        if cand.size == 0:
            return
        b = self.k - len(S)
        ub_improve = min(killable_neg, _top_sum(negkill, b))
        if obj_now - ub_improve >= self.best_key[0]:
            return
        order = np.lexsort((cand, poskill - negkill))
        cand = cand[order]
        negkill = negkill[order]
        poskill = poskill[order]
        for pos in range(cand.size):
            if self.timed_out:
                return
            j = int(cand[pos])
            child_obj = obj_now - int(negkill[pos]) + int(poskill[pos])
            # Node-level scores upper-bound the child's own kill weights.
            child_ub = min(killable_neg, _top_sum(negkill[pos + 1 :], b - 1))
            if child_obj - child_ub >= self.best_key[0]:
                continue
            child_fired = fired_idx[self.U[fired_idx, j] == 1]
            self._visit(
                S + [j],
                child_fired,
                cand[pos + 1 :],
                negw_f - int(negkill[pos]),
                posw_f - int(poskill[pos]),
            )


def _run_branch_and_bound(inst: SolveInstance, variant: str) -> SolveReport:
    _warm_kernel()
    wneg, wpos = _variant_weights(inst, variant)
    search = _Search(
        inst.U, wneg, wpos, inst.budget, inst.time_limit, inst.node_limit
    ).run()
    obj, _, chosen = search.best_key
    elapsed = time.perf_counter() - search.start
    return SolveReport(
        chosen=chosen,
        objective=obj,
        full_objective=objective_of(inst, chosen, "cop"),
        optimal=not search.timed_out,
        nodes_explored=search.nodes,
        elapsed=elapsed,
        incumbent_history=tuple(search.history),
        variant=variant,
    )


def solve_cop(inst: SolveInstance) -> SolveReport:
    if inst.variant != "cop":
        raise ContractViolation(f"solve_cop called with variant {inst.variant!r}")
    return _run_branch_and_bound(inst, "cop")


def solve_sat(inst: SolveInstance) -> SolveReport:
    if inst.variant != "sat":
        raise ContractViolation(f"solve_sat called with variant {inst.variant!r}")
    return _run_branch_and_bound(inst, "sat")


def solve_greedy(inst: SolveInstance) -> SolveReport:
    """Beam search on the full objective; never claims optimality."""
    if inst.variant != "greedy":
        raise ContractViolation(f"solve_greedy called with variant {inst.variant!r}")
    _warm_kernel()
    start = time.perf_counter()
    wneg, wpos = _variant_weights(inst, "cop")
    pos_total = int(wpos.sum())
    m = inst.U.shape[0]
    width = max(1, int(inst.beam_width))

    all_idx = np.arange(m, dtype=np.int64)
    obj_empty = int(wneg.sum())
    history = [(time.perf_counter() - start, obj_empty)]
    best_key = (obj_empty, 0, ())
    nodes = 1

    # beam entries: (objective, S tuple, fired indices, negw, posw)
    beams = [(obj_empty, (), all_idx, int(wneg.sum()), int(wpos.sum()))]
    for _ in range(inst.budget):
        children = {}
        for obj, S, fired_idx, negw_f, posw_f in beams:
            if fired_idx.size == 0:
                continue
            cand = np.array(
                [j for j in range(inst.dimension) if j not in S], dtype=np.int64
            )
            if cand.size == 0:
                continue
            negkill, poskill, _ = node_scores(inst.U, fired_idx, cand, wneg, wpos)
            nodes += cand.size
            for pos in range(cand.size):
                j = int(cand[pos])
                child_S = tuple(sorted(S + (j,)))
                child_obj = obj - int(negkill[pos]) + int(poskill[pos])
                if child_S not in children:
                    children[child_S] = (child_obj, j, S)
        if not children:
            break
        ranked = sorted(
            ((obj, len(S), S) for S, (obj, _, _) in children.items())
        )
        improved = ranked[0][0] < best_key[0]
        if not improved:
            break
        new_beams = []
        for obj, _, S in ranked[:width]:
            fired = all_idx
            for j in S:
                fired = fired[inst.U[fired, j] == 1]
            new_beams.append(
                (obj, S, fired, int(wneg[fired].sum()), int(wpos[fired].sum()))
            )
        beams = new_beams
        top_obj, top_len, top_S = ranked[0]
        if (top_obj, top_len, top_S) < best_key:
            best_key = (top_obj, top_len, top_S)
            history.append((time.perf_counter() - start, top_obj))
        if time.perf_counter() - start > inst.time_limit:
            break

    obj, _, chosen = best_key
    return SolveReport(
        chosen=chosen,
        objective=obj,
        full_objective=objective_of(inst, chosen, "cop"),
        optimal=False,
        nodes_explored=nodes,
        elapsed=time.perf_counter() - start,
        incumbent_history=tuple(history),
        variant="greedy",
    )


def enumerate_exact(inst: SolveInstance, cap: int = ENUMERATION_CAP) -> SolveReport:
    """Brute-force minimum over all subsets of size <= budget.

    Independent of the branch-and-bound path: evaluates every subset directly
    on the example matrix. First subset found in (size, lex) order wins ties.
    """
    d, k = inst.dimension, inst.budget
    total = sum(comb(d, s) for s in range(k + 1))
    if total > cap:
        raise EnumerationCapError(
            f"enumeration would visit {total} subsets, cap is {cap}"
        )
    variant_obj = "sat" if inst.variant == "sat" else "cop"
    w = inst.weights
    wneg = np.where(inst.v == 0, w, 0).astype(np.int64)
    if variant_obj == "sat":
        wpos = np.zeros_like(wneg)
    else:
        wpos = np.where(inst.v == 1, w, 0).astype(np.int64)
    pos_total = int(wpos.sum())

    start = time.perf_counter()
    best_obj = None
    best_S: Tuple[int, ...] = ()
    history = []
    nodes = 0
    for size in range(k + 1):
        for S in itertools.combinations(range(d), size):
            nodes += 1
            if size:
                fired = inst.U[:, S].all(axis=1)
                obj = int(wneg[fired].sum() + pos_total - wpos[fired].sum())
            else:
                obj = int(wneg.sum())
            if best_obj is None or obj < best_obj:
                best_obj = obj
                best_S = S
                history.append((time.perf_counter() - start, obj))
    return SolveReport(
        chosen=best_S,
        objective=int(best_obj),
        full_objective=objective_of(inst, best_S, "cop"),
        optimal=True,
        nodes_explored=nodes,
        elapsed=time.perf_counter() - start,
        incumbent_history=tuple(history),
        variant=inst.variant,
    )


def solve(inst: SolveInstance) -> SolveReport:
    if inst.variant == "cop":
        return solve_cop(inst)
    if inst.variant == "sat":
        return solve_sat(inst)
    if inst.variant == "greedy":
        return solve_greedy(inst)
    raise ContractViolation(f"unknown variant {inst.variant!r}")


# ---------------------------------------------------------------------------
# Text formats: instance dump and integer-linear model export.
# ---------------------------------------------------------------------------


def dump_instance(inst: SolveInstance) -> str:
    """Plain-text dump: header `d k variant`, then `weight v bitstring(u)` lines."""
    lines = [f"{inst.dimension} {inst.budget} {inst.variant}"]
    for i in range(inst.U.shape[0]):
        bits = "".join(str(int(b)) for b in inst.U[i])
        lines.append(f"{int(inst.weights[i])} {int(inst.v[i])} {bits}")
    return "\n".join(lines) + "\n"


def parse_instance_dump(text: str, **kwargs) -> SolveInstance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ContractViolation("empty instance dump")
    head = lines[0].split()
    if len(head) != 3:
        raise ContractViolation(f"bad dump header: {lines[0]!r}")
    d, k, variant = int(head[0]), int(head[1]), head[2]
    weights, vs, rows = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3 or len(parts[2]) != d:
            raise ContractViolation(f"bad dump line: {ln!r}")
        weights.append(int(parts[0]))
        vs.append(int(parts[1]))
        rows.append([int(c) for c in parts[2]])
    U = np.array(rows, dtype=np.uint8) if rows else np.zeros((0, d), dtype=np.uint8)
    return SolveInstance.from_matrices(
        U,
        np.array(vs, dtype=np.uint8),
        k,
        variant,
        weights=np.array(weights, dtype=np.int64),
        **kwargs,
    )


def export_model_text(inst: SolveInstance, *, literal_cardinality: bool = False) -> str:
    """LP-format integer model of the learning task, for off-the-shelf solvers.

    Binary X_j picks feature j, binary U_i flags an error on example i, and
    integer K counts the chosen features. By default the cardinality row pins
    sum(X) = K; ``literal_cardinality`` relaxes it to sum(X) <= K.
    """
    d = inst.dimension
    m = inst.U.shape[0]
    big_m = d + 1
    out = []
    out.append("\\ monotone conjunction learning model")
    out.append(f"\\ d={d} k={inst.budget} examples={m} variant={inst.variant}")
    out.append("Minimize")
    terms = []
    for i in range(m):
        w = int(inst.weights[i])
        if inst.variant == "sat" and inst.v[i] == 1:
            continue  # relaxation drops positive error terms
        terms.append(f"{'+' if w >= 0 else '-'} {abs(w)} U{i + 1}")
    out.append(" obj: " + (" ".join(terms) if terms else "0"))
    out.append("Subject To")
    xsum = " + ".join(f"X{j + 1}" for j in range(d)) if d else "0"
    rel = "<=" if literal_cardinality else "="
    out.append(f" card: {xsum} - K {rel} 0")
    for i in range(m):
        ones = [j for j in range(d) if inst.U[i, j] == 1]
        s = " + ".join(f"X{j + 1}" for j in ones) if ones else "0"
        if inst.v[i] == 1:
            if inst.variant == "sat":
                continue
            # error <-> some chosen feature is 0 on this example
            out.append(f" pos{i + 1}a: {s} - K + {big_m} U{i + 1} >= 0")
            out.append(f" pos{i + 1}b: {s} - K + {big_m} U{i + 1} <= {big_m - 1}")
        else:
            # error <-> every chosen feature is 1 on this example
            out.append(f" neg{i + 1}a: {s} - K - {big_m} U{i + 1} >= -{big_m}")
            out.append(f" neg{i + 1}b: {s} - K + {big_m} U{i + 1} <= {big_m - 1}")
    out.append("Bounds")
    out.append(f" 0 <= K <= {inst.budget}")
    out.append("Binaries")
    names = [f"X{j + 1}" for j in range(d)]
    names += [
        f"U{i + 1}"
        for i in range(m)
        if not (inst.variant == "sat" and inst.v[i] == 1)
    ]
    out.append(" " + " ".join(names))
    out.append("Generals")
    out.append(" K")
    out.append("End")
    return "\n".join(out) + "\n"
