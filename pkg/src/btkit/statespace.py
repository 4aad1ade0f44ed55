"""BTs as difference equations over R^n, with sampled verification.

All dynamics ``f`` and status maps ``r`` are batched: they take an array of
shape ``(m, n)`` and return ``(m, n)`` states or ``(m,)`` integer codes
(1 Success, -1 Failure, 0 Running).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import Status

S_CODE, F_CODE, R_CODE = 1, -1, 0

Dynamics = Callable[[np.ndarray], np.ndarray]
StatusMap = Callable[[np.ndarray], np.ndarray]
Predicate = Callable[[np.ndarray], np.ndarray]


class StateSpaceError(Exception):
    pass


class DimensionMismatch(StateSpaceError):
    pass


class PartitionViolation(StateSpaceError):
    pass


class NonFiniteState(StateSpaceError):
    pass


class StepLengthViolated(StateSpaceError):
    pass


class DegenerateGradient(StateSpaceError):
    pass


@dataclass
class StateSpaceBT:
    f: Dynamics
    r: StatusMap
    dt: float
    n: int
    name: str = ""

    def status_codes(self, X) -> np.ndarray:
        return np.asarray(self.r(np.atleast_2d(np.asarray(X, float))), dtype=np.int8)

    def status(self, x) -> Status:
        return Status.from_code(int(self.status_codes(x)[0]))

    def step(self, x) -> np.ndarray:
        return np.asarray(self.f(np.atleast_2d(np.asarray(x, float))), float)

    def regions(self) -> "RegionSpec":
        """Region spec read off the status map (R' defaults to R)."""
        return RegionSpec(s=lambda X: self.status_codes(X) == S_CODE,
                          f=lambda X: self.status_codes(X) == F_CODE,
                          r=lambda X: self.status_codes(X) == R_CODE)


@dataclass
class RegionSpec:
    s: Predicate
    f: Predicate
    r: Predicate
    r_prime: Optional[Predicate] = None
    tau: Optional[int] = None

    def attraction(self, X) -> np.ndarray:
        pred = self.r_prime if self.r_prime is not None else self.r
        return np.asarray(pred(X), bool)


@dataclass
class SampledDomain:
    points: np.ndarray
    lows: np.ndarray
    highs: np.ndarray
    resolution: tuple = ()

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, float))
        self.lows = np.asarray(self.lows, float)
        self.highs = np.asarray(self.highs, float)
        if len(self.points) == 0:
            raise ValueError("empty sampled domain")
        if np.any(self.points < self.lows - 1e-12) or np.any(self.points > self.highs + 1e-12):
            raise ValueError("sample points outside declared bounds")

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @classmethod
    def grid(cls, lows, highs, resolution=50, open_low=None) -> "SampledDomain":
        """Tensor grid; dims flagged in ``open_low`` skip their lower bound."""
        lows = np.asarray(lows, float)
        highs = np.asarray(highs, float)
        k = len(lows)
        res = (resolution,) * k if np.isscalar(resolution) else tuple(resolution)
        open_low = open_low or (False,) * k
        axes = []
        for lo, hi, m, op in zip(lows, highs, res, open_low):
            if op:
                axes.append(lo + (hi - lo) * np.arange(1, m + 1) / m)
            else:
                axes.append(np.linspace(lo, hi, m))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=1)
        return cls(pts, lows, highs, res)


def _check_shared(bt1: StateSpaceBT, bt2: StateSpaceBT):
    if bt1.n != bt2.n or bt1.dt != bt2.dt:
        raise DimensionMismatch(f"n={bt1.n}/{bt2.n}, dt={bt1.dt}/{bt2.dt}")


def _compose2(bt1, bt2, switch_code, name):
    _check_shared(bt1, bt2)

    def r0(X):
        r1 = bt1.status_codes(X)
        return np.where(r1 == switch_code, bt2.status_codes(X), r1)

    def f0(X):
        sel = (bt1.status_codes(X) == switch_code)[:, None]
        return np.where(sel, bt2.f(X), bt1.f(X))

    return StateSpaceBT(f0, r0, bt1.dt, bt1.n, name)


def compose_sequence(*bts: StateSpaceBT) -> StateSpaceBT:
    """Sequence composition, right-folded for more than two children."""
    if len(bts) < 2:
        raise ValueError("need at least two BTs")
    out = bts[-1]
    for bt in reversed(bts[:-1]):
        out = _compose2(bt, out, S_CODE, f"Sequence({bt.name},{out.name})")
    return out


def compose_fallback(*bts: StateSpaceBT) -> StateSpaceBT:
    """Fallback composition, right-folded for more than two children."""
    if len(bts) < 2:
        raise ValueError("need at least two BTs")
    out = bts[-1]
    for bt in reversed(bts[:-1]):
        out = _compose2(bt, out, F_CODE, f"Fallback({bt.name},{out.name})")
    return out


def parallel_status(r1: np.ndarray, r2: np.ndarray, m: int) -> np.ndarray:
    if m == 1:
        return np.where((r1 == S_CODE) | (r2 == S_CODE), S_CODE,
                        np.where((r1 == F_CODE) & (r2 == F_CODE), F_CODE, R_CODE))
    if m == 2:
        return np.where((r1 == S_CODE) & (r2 == S_CODE), S_CODE,
                        np.where((r1 == F_CODE) | (r2 == F_CODE), F_CODE, R_CODE))
    raise ValueError("M must be 1 or 2")


def compose_parallel(bt1: StateSpaceBT, bt2: StateSpaceBT, m: int, partition,
                     domain: Optional[SampledDomain] = None) -> StateSpaceBT:
    """Parallel composition of two BTs acting on disjoint state dimensions.

    ``partition`` is ``(dims1, dims2)``. When a domain is given, each child
    is checked not to write outside its own dimensions.
    """
    _check_shared(bt1, bt2)
    if m not in (1, 2):
        raise ValueError("M must be 1 or 2")
    d1, d2 = (np.asarray(p, int) for p in partition)
    if domain is not None:
        X = domain.points
        for bt, other in ((bt1, d2), (bt2, d1)):
            moved = np.abs(bt.f(X)[:, other] - X[:, other]).max(initial=0.0)
            if moved > 0:
                bad = int(np.argmax(np.abs(bt.f(X)[:, other] - X[:, other]).max(axis=1)))
                raise PartitionViolation(f"{bt.name} writes outside its partition at {X[bad]}")

    def f0(X):
        out = np.array(X, float, copy=True)
        out[:, d1] = bt1.f(X)[:, d1]
        out[:, d2] = bt2.f(X)[:, d2]
        return out

    def r0(X):
        return parallel_status(bt1.status_codes(X), bt2.status_codes(X), m)

    return StateSpaceBT(f0, r0, bt1.dt, bt1.n, f"Parallel{m}({bt1.name},{bt2.name})")


def lift(bt: StateSpaceBT, n_total: int, dims) -> StateSpaceBT:
    """Embed ``bt`` into a larger space; the other coordinates are held fixed."""
    dims = np.asarray(dims, int)
    if len(dims) != bt.n:
        raise DimensionMismatch("dims must match bt.n")

    def f(X):
        out = np.array(X, float, copy=True)
        out[:, dims] = bt.f(X[:, dims])
        return out

    return StateSpaceBT(f, lambda X: bt.status_codes(X[:, dims]), bt.dt, n_total, bt.name)


# -- execution ---------------------------------------------------------------

@dataclass
class Trajectory:
    times: list
    states: list
    statuses: list
    reason: str

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def final_status(self) -> Status:
        return self.statuses[-1]


def execute(bt: StateSpaceBT, x0, max_steps: int,
            bounds: Optional[tuple] = None) -> Trajectory:
    """Iterate ``x_{k+1} = f(x_k)`` until Success/Failure or ``max_steps``."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    x = np.asarray(x0, float).reshape(1, -1)
    times, states, statuses = [], [], []
    reason = "max_steps"
    for k in range(max_steps + 1):
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state {x[0]} at step {k}")
        st = bt.status(x)
        times.append(k * bt.dt)
        states.append(x[0].copy())
        statuses.append(st)
        if st is Status.SUCCESS:
            reason = "success"
            break
        if st is Status.FAILURE:
            reason = "failure"
            break
        if bounds is not None and (np.any(x[0] < bounds[0]) or np.any(x[0] > bounds[1])):
            reason = "out_of_domain"
            break
        if k == max_steps:
            break
        x = bt.step(x)
    return Trajectory(times, states, statuses, reason)


@dataclass
class FTSReport:
    is_fts: bool
    tau: int
    worst_tau: int
    checked: int
    witnesses: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def check_fts(bt: StateSpaceBT, spec: RegionSpec, domain: SampledDomain,
              max_witnesses: int = 10) -> FTSReport:
    """Check finite-time success from every sampled point of R'.

    ``worst_tau`` is the largest observed completion time in steps.
    """
    if spec.tau is None:
        raise ValueError("RegionSpec.tau is required")
    X = domain.points[spec.attraction(domain.points)]
    notes = ["reachable set approximated by the declared sample bounds"]
    if len(X) == 0:
        return FTSReport(True, spec.tau, 0, 0, [], notes + ["no sampled point in R'"])
    origin = X.copy()
    idx = np.arange(len(X))
    hit = np.full(len(X), -1)
    witnesses = []
    for k in range(spec.tau + 1):
        if not np.all(np.isfinite(X)):
            raise NonFiniteState(f"non-finite state at step {k}")
        done = np.asarray(spec.s(X), bool)
        hit[idx[done]] = k
        keep = ~done
        left = keep & ~spec.attraction(X)
        for j in idx[left][:max_witnesses - len(witnesses)]:
            witnesses.append({"x0": origin[j].tolist(), "step": k, "reason": "left R'"})
        keep &= ~left
        X, idx = X[keep], idx[keep]
        if len(X) == 0:
            break
        if k < spec.tau:
            X = np.asarray(bt.f(X), float)
    for j in idx[:max(0, max_witnesses - len(witnesses))]:
        witnesses.append({"x0": origin[j].tolist(), "step": spec.tau,
                          "reason": "no success within tau"})
    ok = bool(np.all(hit >= 0))
    return FTSReport(ok, spec.tau, int(hit.max()) if ok else -1, len(origin), witnesses, notes)


# -- composition lemmas --------------------------------------------------------

def _inclusion(a: np.ndarray, b: np.ndarray, X: np.ndarray, limit=5) -> list:
    """Sampled counterexamples to A subset-of B."""
    bad = np.flatnonzero(a & ~b)
    return [X[i].tolist() for i in bad[:limit]]


@dataclass
class LemmaReport:
    kind: str
    hypotheses_hold: bool
    conclusion_holds: bool
    tau0: int
    r0_prime: Predicate
    s0: Predicate
    composed: StateSpaceBT
    spec: RegionSpec
    children: list
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    conclusion: Optional[FTSReport] = None


def check_composition_lemma(kind: str, child1, child2, domain: SampledDomain,
                            m: Optional[int] = None, partition=None) -> LemmaReport:
    """Check a robustness/efficiency lemma instance on a sampled domain.

    ``child1`` and ``child2`` are ``(StateSpaceBT, RegionSpec)`` pairs with
    declared time bounds.
    """
    (bt1, sp1), (bt2, sp2) = child1, child2
    X = domain.points
    rep1, rep2 = check_fts(bt1, sp1, domain), check_fts(bt2, sp2, domain)
    S1, S2 = np.asarray(sp1.s(X), bool), np.asarray(sp2.s(X), bool)
    R1p, R2p = sp1.attraction(X), sp2.attraction(X)
    wit, notes = {}, []
    kind = kind.lower()
    if kind == "sequence":
        w = _inclusion(S1, R2p | S2, X) + _inclusion(R2p | S2, S1, X)
        if w:
            wit["S1 = R2' u S2"] = w
        hyp = not w
        composed = compose_sequence(bt1, bt2)
        tau0 = sp1.tau + sp2.tau
        r0p = lambda Y: sp1.attraction(Y) | sp2.attraction(Y)
        s0 = sp2.s
    elif kind == "fallback":
        literal = _inclusion(S2, R1p, X)
        if literal:
            notes.append("literal S2 in R1' fails on the sample; checked S2 in R1' u S1")
            wit["S2 in R1' (literal)"] = literal
        w = _inclusion(S2, R1p | S1, X)
        if w:
            wit["S2 in R1' u S1"] = w
        R1 = np.asarray(sp1.r(X), bool)
        w_eq = _inclusion(R1, R1p, X) + _inclusion(R1p, R1, X)
        if w_eq:
            wit["R1' = R1"] = w_eq
        notes.append("assumed side condition R1' = R1")
        hyp = not w and not w_eq
        composed = compose_fallback(bt1, bt2)
        tau0 = sp1.tau + sp2.tau
        r0p = lambda Y: sp1.attraction(Y) | sp2.attraction(Y)
        s0 = sp1.s
    elif kind == "parallel":
        if m not in (1, 2) or partition is None:
            raise ValueError("parallel needs m in {1,2} and a partition")
        composed = compose_parallel(bt1, bt2, m, partition, domain)
        hyp = True
        if m == 1:
            tau0 = min(sp1.tau, sp2.tau)
            r0p = lambda Y: (sp1.attraction(Y) | sp2.attraction(Y)) & ~(sp1.s(Y) | sp2.s(Y))
            s0 = lambda Y: np.asarray(sp1.s(Y), bool) | np.asarray(sp2.s(Y), bool)
        else:
            tau0 = max(sp1.tau, sp2.tau)
            # a child that already succeeded keeps the pair inside the region
            r0p = lambda Y: ((sp1.attraction(Y) | sp1.s(Y)) & (sp2.attraction(Y) | sp2.s(Y))
                             & ~(sp1.s(Y) & sp2.s(Y)))
            s0 = lambda Y: np.asarray(sp1.s(Y), bool) & np.asarray(sp2.s(Y), bool)
    else:
        raise ValueError(f"unknown composition {kind}")
    hyp = hyp and rep1.is_fts and rep2.is_fts
    if not (rep1.is_fts and rep2.is_fts):
        notes.append("a child is not FTS on the sample")
    codes = lambda Y: composed.status_codes(Y)
    spec0 = RegionSpec(s=s0, f=lambda Y: codes(Y) == F_CODE, r=lambda Y: codes(Y) == R_CODE,
                       r_prime=r0p, tau=tau0)
    concl = check_fts(composed, spec0, domain)
    return LemmaReport(kind, bool(hyp), concl.is_fts, tau0, r0p, s0, composed, spec0,
                       [rep1, rep2], wit, notes, concl)


# -- safety --------------------------------------------------------------------

@dataclass
class SafetyReport:
    safe: bool
    collar_ok: bool
    trajectories_ok: bool
    max_step: float
    d: float
    starts: int
    steps: int
    collar_witnesses: list = field(default_factory=list)
    obstacle_hits: list = field(default_factory=list)
    min_margin: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def check_safety(bt1: StateSpaceBT, spec1: RegionSpec, bt2: StateSpaceBT,
                 obstacle: Predicate, init: Predicate, d: float,
                 domain: SampledDomain, steps: int = 10_000, starts=None,
                 success_samples: Optional[np.ndarray] = None) -> SafetyReport:
    """Sampled check of the Sequence safety lemma.

    ``domain`` stands in for the reachable set. Distances to the success
    region use its sampled points (``success_samples`` may add more).
    """
    X = domain.points
    step_len = np.linalg.norm(bt2.f(X) - X, axis=1)
    max_step = float(step_len.max())
    if max_step >= d:
        raise StepLengthViolated(f"max |x - f2(x)| = {max_step:g} >= d = {d:g}")
    S_pts = X[np.asarray(spec1.s(X), bool)]
    if success_samples is not None:
        S_pts = np.vstack([S_pts, np.asarray(success_samples, float)])
    collar_w = []
    if len(S_pts):
        dist, _ = cKDTree(S_pts).query(X)
        in_collar = dist <= d
        bad = in_collar & ~np.asarray(init(X), bool)
        collar_w = [X[i].tolist() for i in np.flatnonzero(bad)[:10]]
    seq = compose_sequence(bt1, bt2)
    Y = X[np.asarray(init(X), bool)] if starts is None else np.atleast_2d(np.asarray(starts, float))
    origin = Y.copy()
    hits = []
    alive = np.ones(len(Y), bool)
    mins = Y.min(axis=0).copy() if len(Y) else np.array([])
    for k in range(steps + 1):
        inside = np.asarray(obstacle(Y), bool) & alive
        for i in np.flatnonzero(inside)[:10 - len(hits)]:
            hits.append({"x0": origin[i].tolist(), "step": k, "x": Y[i].tolist()})
        alive &= ~inside
        if not np.all(np.isfinite(Y)):
            raise NonFiniteState(f"non-finite state at step {k}")
        if len(Y):
            mins = np.minimum(mins, Y.min(axis=0))
        if k < steps:
            Y = np.asarray(seq.f(Y), float)
    traj_ok = not hits and bool(alive.all())
    notes = ["reachable set approximated by the declared sample bounds",
             f"{len(S_pts)} success-region samples used for the collar distance"]
    return SafetyReport(not collar_w and traj_ok, not collar_w, traj_ok, max_step, d,
                        len(origin), steps, collar_w, hits,
                        {f"x{i + 1}": float(v) for i, v in enumerate(mins)}, notes)


# -- chattering ------------------------------------------------------------------

@dataclass
class ChatterReport:
    lambda1: float
    lambda2: float
    chatter_free: bool
    gradient: np.ndarray


def gradient(s: Callable[[np.ndarray], float], x, h: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (s(x + e) - s(x - e)) / (2 * h)
    return g


def chattering_indicator(x, s, bt1: StateSpaceBT, bt2: StateSpaceBT,
                         h: float = 1e-4, tol: float = 1e-12) -> ChatterReport:
    """Sign test for switching between two vector fields across ``s = 0``.

    ``s < 0`` inside S1, where the second BT runs. The point is chatter
    free when one field points away from the surface on its own side:
    ``lambda1 > 0`` (first BT moves away from S1) or ``lambda2 < 0``.
    """
    x = np.asarray(x, float)
    g = gradient(s, x, h)
    if np.linalg.norm(g) < tol:
        raise DegenerateGradient(f"|grad s| = {np.linalg.norm(g):g} at {x}")
    l1 = float(g @ (bt1.step(x)[0] - x))
    l2 = float(g @ (bt2.step(x)[0] - x))
    return ChatterReport(l1, l2, l1 > 0 or l2 < 0, g)


def partition_ok(bt: StateSpaceBT, domain: SampledDomain) -> bool:
    """True when the status map yields exactly one valid code everywhere."""
    c = bt.status_codes(domain.points)
    return bool(np.isin(c, (S_CODE, F_CODE, R_CODE)).all())
