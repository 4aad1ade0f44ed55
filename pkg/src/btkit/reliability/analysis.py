"""Bottom-up reliability analysis of whole trees."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Action, Kind, Node
from .markov import MTT, MarkovModel, build_model, eliminate_vanishing, mtts_mttf, transient_probabilities
from .mrg import MRG, build_mrg
from .profiles import (DETERMINISTIC, HYBRID_DET_FAILURE, HYBRID_DET_SUCCESS, STOCHASTIC,
                       ActionProfile, InvalidProfile)

FORMAT_VERSION = "1.0"
_ANALYZABLE = {Kind.SEQUENCE: "sequence", Kind.FALLBACK: "fallback", Kind.PARALLEL: "parallel"}


class UnsupportedNode(ValueError):
    pass


class NoCommonStep(ValueError):
    pass


@dataclass
class NodeAnalysis:
    node_id: str
    profile: ActionProfile
    model: Optional[MarkovModel] = None
    mtt: Optional[MTT] = None


@dataclass
class Composition:
    nodes: dict
    root: NodeAnalysis
    notes: list = field(default_factory=list)


def leaf_profile(leaf: Node, profiles: dict) -> ActionProfile:
    try:
        p = profiles[leaf.name]
    except KeyError:
        raise InvalidProfile(f"no profile for leaf {leaf.name!r}") from None
    if leaf.kind == Kind.CONDITION and isinstance(p, (int, float)):
        p = ActionProfile.condition(float(p))
    if not isinstance(p, ActionProfile):
        raise InvalidProfile(f"bad profile for {leaf.name!r}: {p!r}")
    return p


def _postorder(node: Node):
    for c in node.children:
        yield from _postorder(c)
    yield node


def _node_kind(node: Node) -> str:
    kind = _ANALYZABLE.get(node.kind)
    if kind is None:
        raise UnsupportedNode(f"{node.label()} ({node.id}) is outside the analyzable subset")
    return kind


def _profile_from(mtt: MTT) -> ActionProfile:
    p_s = min(max(mtt.p_s, 0.0), 1.0)
    return ActionProfile(STOCHASTIC, p_s, 1.0 - p_s, mu=mtt.mu, nu=mtt.nu)


def compose_profiles(tree: Node, profiles: dict) -> Composition:
    """Analyze every control node bottom-up.

    Each analyzed subtree is summarized as a stochastic action with
    ``mu = 1/MTTS`` and ``nu = 1/MTTF`` before its parent is analyzed.
    """
    nodes = {}
    notes = set()
    for node in _postorder(tree):
        if node.kind.is_leaf:
            p = leaf_profile(node, profiles)
            if p.kind in (HYBRID_DET_SUCCESS, HYBRID_DET_FAILURE):
                notes.add("hybrid leaves enter the Markov analysis through their mean times")
            if p.kind == DETERMINISTIC:
                notes.add("deterministic leaves enter the Markov analysis through their mean times")
            if p.is_condition:
                notes.add("conditions are modeled as actions with a tiny fixed sojourn time")
            nodes[node.id] = NodeAnalysis(node.id, p)
            continue
        kind = _node_kind(node)
        mrg = build_mrg(kind, len(node.children), node.m)
        model = build_model(mrg, [nodes[c.id].profile for c in node.children])
        mtt = mtts_mttf(model)
        nodes[node.id] = NodeAnalysis(node.id, _profile_from(mtt), model, mtt)
    return Composition(nodes, nodes[tree.id], sorted(notes))


@dataclass
class ReliabilityReport:
    mtts: Optional[float]
    mttf: Optional[float]
    mu: Optional[float]
    nu: Optional[float]
    ps_inf: float
    pf_inf: float
    grid: list
    time_unit: str = "s"
    notes: list = field(default_factory=list)
    format_version: str = FORMAT_VERSION

    def to_dict(self) -> dict:
        clean = lambda v: None if v is None or not math.isfinite(v) else float(v)
        return {
            "format_version": self.format_version,
            "kind": "reliability",
            "time_unit": self.time_unit,
            "mtts": clean(self.mtts),
            "mttf": clean(self.mttf),
            "mu": clean(self.mu),
            "nu": clean(self.nu),
            "ps_inf": float(self.ps_inf),
            "pf_inf": float(self.pf_inf),
            "grid": self.grid,
            "notes": list(self.notes),
        }


def _root_model(tree: Node, comp: Composition) -> MarkovModel:
    if tree.kind.is_leaf:
        return build_model(build_mrg("sequence", 1), [comp.root.profile])
    return comp.root.model


def probability_curves(model: MarkovModel, grid, vanish_threshold: float = 1e-6,
                       backend=None) -> tuple:
    """(p_s(t), p_f(t)) of a node model on ``grid``."""
    Q, pi0, keep = eliminate_vanishing(model, vanish_threshold)
    pi = transient_probabilities(Q, pi0, grid, backend=backend)
    succ = np.isin(keep, list(model.mrg.success_states))
    fail = np.isin(keep, list(model.mrg.failure_states))
    return pi[:, succ].sum(axis=1), pi[:, fail].sum(axis=1), pi


def analyze(tree: Node, profiles: dict, grid=None, time_unit: str = "s",
            vanish_threshold: float = 1e-6, backend=None) -> ReliabilityReport:
    """Reliability report of the root: MTTS/MTTF, rates and p(t) on ``grid``."""
    comp = compose_profiles(tree, profiles)
    model = _root_model(tree, comp)
    mtt = comp.root.mtt if comp.root.mtt is not None else mtts_mttf(model)
    notes = list(comp.notes)
    rows = []
    if grid is not None and len(grid):
        if np.any(model.SJ < vanish_threshold):
            notes.append(f"markings with sojourn below {vanish_threshold:g} eliminated as instantaneous")
        ps, pf, pi = probability_curves(model, grid, vanish_threshold, backend)
        total = pi.sum(axis=1)
        rows = [{"t": float(t), "ps": float(a), "pf": float(b), "prun": float(s - a - b)}
                for t, a, b, s in zip(grid, ps, pf, total)]
    notes.extend(mtt.flags)
    return ReliabilityReport(mtt.mtts, mtt.mttf,
                             None if mtt.mtts is None else mtt.mu,
                             None if mtt.mttf is None else mtt.nu,
                             mtt.p_s, mtt.p_f, rows, time_unit, notes)


# -- deterministic times -----------------------------------------------------------

@dataclass
class DeterministicResult:
    step: float
    jumps: list
    ps_inf: float
    pf_inf: float
    mtts: Optional[float]
    mttf: Optional[float]

    def ps(self, t: float) -> float:
        return sum(dps for tj, dps, _ in self.jumps if tj <= t + 1e-12)

    def pf(self, t: float) -> float:
        return sum(dpf for tj, _, dpf in self.jumps if tj <= t + 1e-12)

    def zoh(self, horizon: float) -> tuple:
        """Values held on the lattice ``k * step`` up to ``horizon``."""
        n = int(math.floor(horizon / self.step + 1e-9))
        times = self.step * np.arange(n + 1)
        return times, np.array([self.ps(t) for t in times]), np.array([self.pf(t) for t in times])


def common_step(times, precision: float = 1e-6, snap: bool = False) -> tuple:
    """Greatest common divisor of ``times`` on a ``precision`` lattice."""
    units = []
    for t in times:
        q = round(t / precision)
        if not snap and abs(t - q * precision) > 1e-9 * max(1.0, abs(t)):
            raise NoCommonStep(f"time {t!r} is not a multiple of {precision:g}")
        units.append(int(q))
    g = 0
    for q in units:
        g = math.gcd(g, q)
    if g == 0:
        raise NoCommonStep("all times are zero")
    return g * precision, units


def _times_of(p: ActionProfile) -> tuple:
    if p.is_condition:
        return 0.0, 0.0
    if p.kind != DETERMINISTIC:
        raise InvalidProfile("deterministic analysis needs deterministic leaves")
    return p.tau_s, p.tau_f


def _det_dist(node: Node, profiles: dict, unit: dict) -> dict:
    if node.kind.is_leaf:
        p = leaf_profile(node, profiles)
        ts, tf = _times_of(p)
        d = defaultdict(float)
        if p.p_s > 0:
            d[(1, unit[ts])] += p.p_s
        if p.p_f > 0:
            d[(-1, unit[tf])] += p.p_f
        return d
    kind = _node_kind(node)
    kids = [_det_dist(c, profiles, unit) for c in node.children]
    out = defaultdict(float)
    if kind in ("sequence", "fallback"):
        stop = -1 if kind == "sequence" else 1
        going = {0: 1.0}
        for dist in kids:
            nxt = defaultdict(float)
            for t, p in going.items():
                for (o, dt), q in dist.items():
                    if o == stop:
                        out[(stop, t + dt)] += p * q
                    else:
                        nxt[t + dt] += p * q
            going = nxt
        for t, p in going.items():
            out[(-stop, t)] += p
        return out
    n, m = len(kids), node.m
    for combo in itertools.product(*[list(d.items()) for d in kids]):
        prob = math.prod(q for _, q in combo)
        order = sorted(range(n), key=lambda i: combo[i][0][1])
        cs = cf = 0
        for i in order:
            (o, dt), _ = combo[i]
            cs += o == 1
            cf += o == -1
            if cs >= m:
                out[(1, dt)] += prob
                break
            if cf > n - m:
                out[(-1, dt)] += prob
                break
    return out


def _tree_from_mrg(mrg: MRG) -> Node:
    kids = [Action(f"child{i}") for i in range(mrg.n)]
    return Node(Kind(mrg.kind), kids, m=mrg.m)


def deterministic_transient(tree, profiles, horizon: Optional[float] = None,
                            precision: float = 1e-6, snap: bool = False) -> DeterministicResult:
    """Exact step CDFs when every leaf takes a fixed time per outcome.

    ``tree`` may be a Node (``profiles`` keyed by leaf name) or an MRG
    (``profiles`` listed per child).
    """
    if isinstance(tree, MRG):
        node = _tree_from_mrg(tree)
        profiles = {f"child{i}": p for i, p in enumerate(profiles)}
        tree = node
    leaf_times = []
    for leaf in tree.leaves():
        leaf_times.extend(_times_of(leaf_profile(leaf, profiles)))
    step, units = common_step([t for t in leaf_times if t > 0], precision, snap)
    unit = {}
    for leaf in tree.leaves():
        for t in _times_of(leaf_profile(leaf, profiles)):
            unit[t] = 0 if t == 0 else int(round(t / precision))
    dist = _det_dist(tree, profiles, unit)
    by_time = defaultdict(lambda: [0.0, 0.0])
    for (o, q), p in dist.items():
        by_time[q][0 if o == 1 else 1] += p
    jumps = [(q * precision, a, b) for q, (a, b) in sorted(by_time.items())]
    if horizon is not None:
        jumps = [j for j in jumps if j[0] <= horizon + 1e-12]
    ps_inf = sum(p for (o, _), p in dist.items() if o == 1)
    pf_inf = sum(p for (o, _), p in dist.items() if o == -1)
    mtts = sum(p * q * precision for (o, q), p in dist.items() if o == 1) / ps_inf if ps_inf else None
    mttf = sum(p * q * precision for (o, q), p in dist.items() if o == -1) / pf_inf if pf_inf else None
    return DeterministicResult(step, jumps, ps_inf, pf_inf, mtts, mttf)
