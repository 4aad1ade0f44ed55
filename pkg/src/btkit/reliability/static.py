"""Quick design-time estimators that need no timing model."""
from __future__ import annotations

import math

from ..core import Kind, Node


class ParallelUnsupported(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def static_success_probability(tree: Node, p: dict) -> float:
    """Product rule for Sequences, complement-product rule for Fallbacks."""
    if tree.kind.is_leaf:
        v = float(p[tree.name])
        if not 0 <= v <= 1:
            raise OutOfRange(f"{tree.name}: {v}")
        return v
    vals = [static_success_probability(c, p) for c in tree.children]
    if tree.kind == Kind.SEQUENCE:
        return math.prod(vals)
    if tree.kind == Kind.FALLBACK:
        return 1.0 - math.prod(1.0 - v for v in vals)
    if tree.kind == Kind.PARALLEL:
        raise ParallelUnsupported("Parallel nodes are outside this estimator")
    raise ValueError(f"{tree.label()} not supported")


def utility_propagate(tree: Node, utilities: dict) -> float:
    """Max of the children's utilities at every control node."""
    if tree.kind.is_leaf:
        v = float(utilities[tree.name])
        if not 0 <= v <= 1:
            raise OutOfRange(f"{tree.name}: utility {v} not in [0, 1]")
        return v
    return max(utility_propagate(c, utilities) for c in tree.children)
