"""Marking reachability graphs of Sequence, Fallback and Parallel nodes."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..core import Kind

TRANSIENT, FAILURE, SUCCESS = "transient", "failure", "success"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    child: int
    outcome: int


@dataclass
class MRG:
    kind: str
    n: int
    m: Optional[int]
    markings: list
    edges: list
    n_transient: int
    n_failure: int
    n_success: int
    index: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.markings)

    def classify(self, i: int) -> str:
        if i < self.n_transient:
            return TRANSIENT
        if i < self.n_transient + self.n_failure:
            return FAILURE
        return SUCCESS

    @property
    def failure_states(self) -> range:
        return range(self.n_transient, self.n_transient + self.n_failure)

    @property
    def success_states(self) -> range:
        return range(self.n_transient + self.n_failure, self.size)

    def feasible(self, i: int) -> list:
        return feasible_children(self.kind, self.markings[i], self.m)

    def out_edges(self, i: int) -> list:
        return [e for e in self.edges if e.src == i]


def _kind_name(kind) -> str:
    if isinstance(kind, Kind):
        kind = kind.value
    kind = str(kind).lower()
    if kind not in ("sequence", "fallback", "parallel"):
        raise ValueError(f"unsupported node kind {kind!r}")
    return kind


def node_outcome(kind: str, marking, m: Optional[int] = None) -> str:
    n = len(marking)
    n_s = sum(1 for v in marking if v == 1)
    n_f = sum(1 for v in marking if v == -1)
    if kind == "sequence":
        if n_f:
            return FAILURE
        return SUCCESS if n_s == n else TRANSIENT
    if kind == "fallback":
        if n_s:
            return SUCCESS
        return FAILURE if n_f == n else TRANSIENT
    if n_s >= m:
        return SUCCESS
    if n_f > n - m:
        return FAILURE
    return TRANSIENT


def feasible_children(kind: str, marking, m: Optional[int] = None) -> list:
    """Children that may return next from ``marking``."""
    if node_outcome(kind, marking, m) != TRANSIENT:
        return []
    if kind == "parallel":
        return [i for i, v in enumerate(marking) if v == 0]
    done = 1 if kind == "sequence" else -1
    for i, v in enumerate(marking):
        if v == 0:
            return [i]
        if v != done:
            return []
    return []


def build_mrg(kind, n: int, m: Optional[int] = None) -> MRG:
    """Enumerate markings reachable from the all-pending marking.

    States are canonized: transient first, then failure, then success, each
    block in breadth-first discovery order.
    """
    kind = _kind_name(kind)
    if n < 1:
        raise ValueError("N must be >= 1")
    if kind == "parallel":
        if m is None or not 1 <= m <= n:
            raise ValueError(f"parallel threshold M={m} not in [1, {n}]")
    else:
        m = None
    start = (0,) * n
    order = [start]
    seen = {start}
    raw_edges = []
    queue = deque([start])
    while queue:
        mk = queue.popleft()
        for h in feasible_children(kind, mk, m):
            for outcome in (-1, 1):
                nxt = mk[:h] + (outcome,) + mk[h + 1:]
                raw_edges.append((mk, nxt, h, outcome))
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
    groups = {TRANSIENT: [], FAILURE: [], SUCCESS: []}
    for mk in order:
        groups[node_outcome(kind, mk, m)].append(mk)
    markings = groups[TRANSIENT] + groups[FAILURE] + groups[SUCCESS]
    index = {mk: i for i, mk in enumerate(markings)}
    edges = [Edge(index[a], index[b], h, o) for a, b, h, o in raw_edges]
    return MRG(kind, n, m, markings, edges, len(groups[TRANSIENT]),
               len(groups[FAILURE]), len(groups[SUCCESS]), index)
