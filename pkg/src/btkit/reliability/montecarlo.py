"""Seeded Monte Carlo simulation of stochastic BTs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import _accel
from ..core import Kind, Node
from .analysis import leaf_profile
from .profiles import ActionProfile

BLOCK = 4096
RNG_NAME = "numpy Philox4x64, key (seed, block), 4096 runs per block"

_CODES = {Kind.SEQUENCE: _accel.SEQ, Kind.FALLBACK: _accel.FB, Kind.PARALLEL: _accel.PAR}


def encode(tree: Node, profiles: dict) -> dict:
    """Flatten ``tree`` into post-order arrays for the simulation kernels."""
    order = []

    def visit(n):
        for c in n.children:
            visit(c)
        order.append(n)

    visit(tree)
    pos = {n.id: i for i, n in enumerate(order)}
    kinds, ms, ptr, idx, leaf_of = [], [], [0], [], []
    leaves = []
    for n in order:
        if n.kind.is_leaf:
            kinds.append(_accel.LEAF)
            leaf_of.append(len(leaves))
            leaves.append(leaf_profile(n, profiles))
        else:
            if n.kind not in _CODES:
                raise ValueError(f"{n.label()} cannot be simulated")
            kinds.append(_CODES[n.kind])
            leaf_of.append(-1)
            idx.extend(pos[c.id] for c in n.children)
        ms.append(n.m or 0)
        ptr.append(len(idx))

    def side(p: ActionProfile, tau, rate):
        if tau is not None:
            return _accel.DET, tau
        return _accel.EXP, rate

    ks, vs, kf, vf = [], [], [], []
    for p in leaves:
        a, b = side(p, p.tau_s, p.mu)
        c, d = side(p, p.tau_f, p.nu)
        ks.append(a); vs.append(b); kf.append(c); vf.append(d)
    return {
        "kinds": np.array(kinds, np.int64), "ms": np.array(ms, np.int64),
        "child_ptr": np.array(ptr, np.int64), "child_idx": np.array(idx or [0], np.int64),
        "leaf_of": np.array(leaf_of, np.int64),
        "p_s": np.array([p.p_s for p in leaves]),
        "kind_s": np.array(ks, np.int64), "par_s": np.array(vs, float),
        "kind_f": np.array(kf, np.int64), "par_f": np.array(vf, float),
        "n_leaves": len(leaves),
    }


def draw_uniforms(runs: int, n_leaves: int, seed: int) -> np.ndarray:
    """Two uniforms per leaf per run: outcome, then duration."""
    blocks = []
    for b in range(math.ceil(runs / BLOCK)):
        key = np.array([seed % 2**64, b], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        size = min(BLOCK, runs - b * BLOCK)
        blocks.append(rng.random((size, n_leaves, 2)))
    return np.concatenate(blocks) if blocks else np.zeros((0, n_leaves, 2))


@dataclass
class MonteCarloResult:
    runs: int
    seed: int
    p_s: float
    p_f: float
    mtts: Optional[float]
    mttf: Optional[float]
    grid: list = field(default_factory=list)
    backend: str = ""
    rng: str = RNG_NAME
    outcomes: Optional[np.ndarray] = None
    durations: Optional[np.ndarray] = None

    @property
    def mu(self) -> Optional[float]:
        return None if not self.mtts else 1.0 / self.mtts

    @property
    def nu(self) -> Optional[float]:
        return None if not self.mttf else 1.0 / self.mttf

    def to_dict(self) -> dict:
        return {"runs": self.runs, "seed": self.seed, "p_s": self.p_s, "p_f": self.p_f,
                "mtts": self.mtts, "mttf": self.mttf, "mu": self.mu, "nu": self.nu,
                "grid": self.grid, "rng": self.rng}


def monte_carlo(tree: Node, profiles: dict, runs: int, seed: int, grid=None,
                backend=None) -> MonteCarloResult:
    """Simulate ``runs`` independent executions of ``tree``.

    Leaf outcomes are Bernoulli(p_s); durations are exponential (inverse
    CDF) or fixed, by profile kind. Conditions use their tiny sojourn.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    enc = encode(tree, profiles)
    u = draw_uniforms(runs, enc["n_leaves"], seed)
    backend = _accel.resolve(backend)
    out, dur = _accel.mc_evaluate(enc, u, backend)
    succ, fail = out == 1, out == -1
    rows = []
    if grid is not None:
        ts, tf = np.sort(dur[succ]), np.sort(dur[fail])
        for t in grid:
            ps = np.searchsorted(ts, t, side="right") / runs
            pf = np.searchsorted(tf, t, side="right") / runs
            rows.append({"t": float(t), "ps": float(ps), "pf": float(pf), "prun": float(1 - ps - pf)})
    return MonteCarloResult(
        runs, seed, float(succ.mean()), float(fail.mean()),
        float(dur[succ].mean()) if succ.any() else None,
        float(dur[fail].mean()) if fail.any() else None,
        rows, backend, RNG_NAME, out, dur)
