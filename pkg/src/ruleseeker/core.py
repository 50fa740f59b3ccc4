"""Core domain types: instances, partial instances, rules, and explanations.

Everything here is immutable after construction and safe to share across
threads. Feature indices are 0-based throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np


class ContractViolation(ValueError):
    """A documented precondition was broken by the caller."""


def _check_bits(bits: Tuple[int, ...], what: str) -> None:
    for b in bits:
        if b != 0 and b != 1:
            raise ContractViolation(f"{what} must contain only 0/1, got {b!r}")


@dataclass(frozen=True)
class Instance:
    """A fully defined binary feature vector."""

    bits: Tuple[int, ...]

    def __post_init__(self) -> None:
        _check_bits(self.bits, "Instance")

    @classmethod
    def from_iterable(cls, values: Iterable[int]) -> "Instance":
        return cls(tuple(int(v) for v in values))

    @property
    def dimension(self) -> int:
        return len(self.bits)

    def __getitem__(self, j: int) -> int:
        return self.bits[j]

    def __len__(self) -> int:
        return len(self.bits)

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def to_bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_bitstring(cls, s: str) -> "Instance":
        if not set(s) <= {"0", "1"}:
            raise ContractViolation(f"bitstring must contain only 0/1, got {s!r}")
        return cls(tuple(int(c) for c in s))


@dataclass(frozen=True)
class PartialInstance:
    """A feature vector with some coordinates left undefined (None)."""

    entries: Tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        for e in self.entries:
            if e is not None and e != 0 and e != 1:
                raise ContractViolation(f"PartialInstance entries must be 0/1/None, got {e!r}")

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def defined_indices(self) -> Tuple[int, ...]:
        return tuple(j for j, e in enumerate(self.entries) if e is not None)

    def covers(self, z: Instance) -> bool:
        """True iff every defined coordinate agrees with z."""
        if len(self.entries) != z.dimension:
            raise ContractViolation(
                f"dimension mismatch: partial has {len(self.entries)}, instance has {z.dimension}"
            )
        return all(e is None or e == z.bits[j] for j, e in enumerate(self.entries))


def covers(p: PartialInstance, z: Instance) -> bool:
    return p.covers(z)


def restrict(x: Instance, features: Iterable[int]) -> PartialInstance:
    """Partial instance defined exactly on `features`, with values taken from x."""
    s = set(int(j) for j in features)
    d = x.dimension
    for j in s:
        if not 0 <= j < d:
            raise ContractViolation(f"feature index {j} out of range for dimension {d}")
    return PartialInstance(tuple(x.bits[j] if j in s else None for j in range(d)))


@dataclass(frozen=True)
class LabeledSample:
    """An instance together with the black box's binary label for it."""

    instance: Instance
    label: int

    def __post_init__(self) -> None:
        if self.label != 0 and self.label != 1:
            raise ContractViolation(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Rule:
    """An if-then rule: a conjunction of literals plus a predicted label.

    A rule fires on z when every literal (j, v) satisfies z[j] == v; it then
    predicts `head`, and predicts 1 - head otherwise.
    """

    body: frozenset  # of (feature_index, required_value)
    head: int

    def __post_init__(self) -> None:
        if self.head != 0 and self.head != 1:
            raise ContractViolation(f"rule head must be 0 or 1, got {self.head!r}")
        for j, v in self.body:
            if v != 0 and v != 1:
                raise ContractViolation(f"literal value must be 0 or 1, got {v!r}")

    def fires(self, z: Instance) -> bool:
        return all(z.bits[j] == v for j, v in self.body)

    def predict(self, z: Instance) -> int:
        return self.head if self.fires(z) else 1 - self.head

    def predict_matrix(self, Z: np.ndarray) -> np.ndarray:
        """Vectorized predict over an (n, d) 0/1 matrix."""
        fired = np.ones(Z.shape[0], dtype=bool)
        for j, v in self.body:
            fired &= Z[:, j] == v
        out = np.where(fired, self.head, 1 - self.head)
        return out.astype(np.uint8)

    def feature_indices(self) -> Tuple[int, ...]:
        return tuple(sorted(j for j, _ in self.body))

    def render(self, feature_names: Optional[Sequence[str]] = None) -> str:
        """Human-readable IF-THEN form."""
        if not self.body:
            cond = "(always)"
        else:
            parts = []
            for j, v in sorted(self.body):
                name = feature_names[j] if feature_names is not None else f"feature_{j}"
                parts.append(f"{name}={v}")
            cond = " AND ".join(parts)
        return f"IF {cond} THEN class={self.head}"


@dataclass(frozen=True)
class MonotoneMonomial:
    """A conjunction of un-negated variables; empty conjunction is constant 1."""

    variables: frozenset

    @classmethod
    def of(cls, variables: Iterable[int]) -> "MonotoneMonomial":
        return cls(frozenset(int(j) for j in variables))

    def evaluate(self, u: Instance) -> int:
        return 1 if all(u.bits[j] == 1 for j in self.variables) else 0

    def evaluate_matrix(self, U: np.ndarray) -> np.ndarray:
        if not self.variables:
            return np.ones(U.shape[0], dtype=np.uint8)
        idx = sorted(self.variables)
        return U[:, idx].all(axis=1).astype(np.uint8)


@dataclass(frozen=True)
class SolveStats:
    elapsed: float
    nodes: int
    variant: str


@dataclass(frozen=True)
class Explanation:
    """A size-bounded feature set offered as the reason for a prediction."""

    features: Tuple[int, ...]
    budget: int
    anchor: Instance
    anchor_label: int
    objective: int
    optimal: bool
    solve_stats: SolveStats

    def __post_init__(self) -> None:
        if len(self.features) > self.budget:
            raise ContractViolation(
                f"explanation has {len(self.features)} features, budget is {self.budget}"
            )
        d = self.anchor.dimension
        for j in self.features:
            if not 0 <= j < d:
                raise ContractViolation(f"feature index {j} out of range for dimension {d}")
        object.__setattr__(self, "features", tuple(sorted(self.features)))


def rule_from_explanation(e: Explanation) -> Rule:
    """O(|features|) conversion of an explanation into its if-then rule."""
    body = frozenset((j, e.anchor.bits[j]) for j in e.features)
    return Rule(body=body, head=e.anchor_label)
