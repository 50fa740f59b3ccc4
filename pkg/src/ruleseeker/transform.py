"""Mapping between labeled oracle samples and monomial training examples.

A sample (z, f(z)) is turned into an agreement pair (u, v) relative to the
anchored pair (x, f(x)): u marks the coordinates where z agrees with x, and v
marks label agreement. The map is an involution given (x, f(x)), and the
empirical loss of a monotone monomial on the transformed examples equals the
empirical loss of the corresponding rule on the originals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .core import ContractViolation, Instance, LabeledSample, MonotoneMonomial, Rule


@dataclass(frozen=True)
class MonomialExample:
    """Agreement vector u plus label-agreement bit v."""

    u: Instance
    v: int

    def __post_init__(self) -> None:
        if self.v != 0 and self.v != 1:
            raise ContractViolation(f"v must be 0 or 1, got {self.v!r}")


def _agree(a: Instance, b: Instance) -> Instance:
    if a.dimension != b.dimension:
        raise ContractViolation(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    return Instance(tuple(1 if ai == bi else 0 for ai, bi in zip(a.bits, b.bits)))


def to_monomial_examples(
    x: Instance, fx: int, samples: Sequence[LabeledSample]
) -> List[MonomialExample]:
    """Transform samples into monomial examples, preserving order."""
    out = []
    for s in samples:
        u = _agree(s.instance, x)
        v = 1 if s.label == fx else 0
        out.append(MonomialExample(u=u, v=v))
    return out


def from_monomial_example(x: Instance, fx: int, e: MonomialExample) -> LabeledSample:
    """Inverse of to_monomial_examples for a single example."""
    if e.u.dimension != x.dimension:
        raise ContractViolation(
            f"dimension mismatch: {e.u.dimension} vs {x.dimension}"
        )
    z = Instance(
        tuple(x.bits[j] if e.u.bits[j] == 1 else 1 - x.bits[j] for j in range(x.dimension))
    )
    label = fx if e.v == 1 else 1 - fx
    return LabeledSample(instance=z, label=label)


def agreement_matrices(
    x_arr: np.ndarray, fx: int, Z: np.ndarray, y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized transform: (m, d) samples and labels to (U, v) matrices."""
    if Z.shape[1] != x_arr.shape[0]:
        raise ContractViolation(
            f"dimension mismatch: samples have {Z.shape[1]}, anchor has {x_arr.shape[0]}"
        )
    U = (Z == x_arr[None, :]).astype(np.uint8)
    v = (np.asarray(y) == fx).astype(np.uint8)
    return U, v


def empirical_loss_rule(rule: Rule, samples: Sequence[LabeledSample]) -> Fraction:
    """Fraction of samples the rule mislabels. Exact rational."""
    if not samples:
        raise ContractViolation("empirical loss needs at least one sample")
    errors = sum(1 for s in samples if rule.predict(s.instance) != s.label)
    return Fraction(errors, len(samples))


def empirical_loss_monomial(
    c: MonotoneMonomial, examples: Sequence[MonomialExample]
) -> Fraction:
    """Fraction of monomial examples where c(u) != v. Exact rational."""
    if not examples:
        raise ContractViolation("empirical loss needs at least one example")
    errors = sum(1 for e in examples if c.evaluate(e.u) != e.v)
    return Fraction(errors, len(examples))
