"""Markov chains of a single control node with analyzed children."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import poisson

from .. import _accel
from .mrg import MRG
from .profiles import ActionProfile, InvalidProfile


class NoFeasibleEvent(ValueError):
    pass


class IntegrationDiverged(RuntimeError):
    pass


class UnreachableAbsorber(ValueError):
    pass


@dataclass
class MarkovModel:
    mrg: MRG
    P: np.ndarray
    SJ: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    profiles: list = field(default_factory=list)

    @property
    def nt(self) -> int:
        return self.mrg.n_transient

    @property
    def T(self) -> np.ndarray:
        return self.P[:self.nt, :self.nt]

    @property
    def R_F(self) -> np.ndarray:
        """Transient -> failure block, one row per transient state."""
        return self.P[:self.nt, list(self.mrg.failure_states)]

    @property
    def R_S(self) -> np.ndarray:
        return self.P[:self.nt, list(self.mrg.success_states)]


def _check_profiles(mrg: MRG, profiles) -> list:
    profiles = list(profiles)
    if len(profiles) != mrg.n:
        raise InvalidProfile(f"expected {mrg.n} profiles, got {len(profiles)}")
    for p in profiles:
        if not isinstance(p, ActionProfile):
            raise InvalidProfile(f"not an ActionProfile: {p!r}")
    return profiles


def build_dtmc(mrg: MRG, profiles) -> MarkovModel:
    """One-step transition matrix P (row = from, column = to).

    Concurrent children compete with weight ``1/mean_time``; with a single
    feasible child the jump probabilities are its own p_s and p_f.
    """
    profiles = _check_profiles(mrg, profiles)
    k = mrg.size
    P = np.zeros((k, k))
    times = np.zeros((k, k))
    for i in range(mrg.n_transient):
        feas = mrg.feasible(i)
        if not feas:
            raise NoFeasibleEvent(f"marking {mrg.markings[i]} has no feasible event")
        weights = {h: profiles[h].exit_rate for h in feas}
        total = sum(weights.values())
        sj = 1.0 / total
        for e in mrg.out_edges(i):
            prof = profiles[e.child]
            p = prof.p_s if e.outcome == 1 else prof.p_f
            P[i, e.dst] += p * weights[e.child] / total
            if len(feas) == 1:
                times[i, e.dst] = prof.t_s if e.outcome == 1 else prof.t_f
            else:
                times[i, e.dst] = sj
    for i in range(mrg.n_transient, k):
        P[i, i] = 1.0
    return MarkovModel(mrg, P, times=times, profiles=profiles)


def sojourn_times(mrg: MRG, profiles) -> np.ndarray:
    """Mean holding time of every transient marking."""
    profiles = _check_profiles(mrg, profiles)
    sj = np.empty(mrg.n_transient)
    for i in range(mrg.n_transient):
        feas = mrg.feasible(i)
        if not feas:
            raise NoFeasibleEvent(f"marking {mrg.markings[i]} has no feasible event")
        sj[i] = 1.0 / sum(1.0 / profiles[h].mean_time for h in feas)
    return sj


def build_generator(P: np.ndarray, SJ: np.ndarray) -> np.ndarray:
    """Infinitesimal generator; absorbing rows are zero."""
    P = np.asarray(P, float)
    nt = len(SJ)
    Q = np.zeros_like(P)
    Q[:nt] = P[:nt] / np.asarray(SJ, float)[:, None]
    np.fill_diagonal(Q, 0.0)
    Q[np.arange(nt), np.arange(nt)] = -Q[:nt].sum(axis=1)
    return Q


def build_model(mrg: MRG, profiles) -> MarkovModel:
    model = build_dtmc(mrg, profiles)
    model.SJ = sojourn_times(mrg, model.profiles)
    model.Q = build_generator(model.P, model.SJ)
    return model


def nilpotency_index(T: np.ndarray) -> int:
    """Smallest k with T^k == 0; raises if T is not nilpotent."""
    n = T.shape[0]
    M = np.eye(n)
    for k in range(1, n + 2):
        M = M @ T
        if not np.any(M):
            return k
    raise ValueError("transient block is not nilpotent")


def fundamental_matrix(T: np.ndarray) -> np.ndarray:
    """U = sum_i T^i, summed exactly up to the nilpotency index."""
    n = T.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    k = nilpotency_index(T)
    U = np.eye(n)
    M = np.eye(n)
    for _ in range(1, k):
        M = M @ T
        U += M
    return U


@dataclass
class MTT:
    mtts: Optional[float]
    mttf: Optional[float]
    p_s: float
    p_f: float
    flags: list = field(default_factory=list)

    @property
    def mu(self) -> float:
        return math.inf if self.mtts in (None, 0) else 1.0 / self.mtts

    @property
    def nu(self) -> float:
        return math.inf if self.mttf in (None, 0) else 1.0 / self.mttf


def mtts_mttf(model: MarkovModel) -> MTT:
    """Mean time to succeed/fail from the initial marking.

    First-step analysis: with ``a`` the absorption probability into the
    target block and ``w = E[T 1{target}]``, both solve ``(I - T) x = c``.
    """
    nt = model.nt
    nilpotency_index(model.T)
    A = np.eye(nt) - model.T
    Pt = np.where(model.P > 0, model.P * model.times, 0.0)
    out = []
    flags = []
    for block, label in ((model.mrg.success_states, "success"),
                         (model.mrg.failure_states, "failure")):
        cols = list(block)
        r = model.P[:nt, cols].sum(axis=1)
        a = linalg.solve(A, r) if nt else r
        a_full = np.zeros(model.mrg.size)
        a_full[:nt] = a
        a_full[cols] = 1.0
        c = Pt[:nt] @ a_full
        w = linalg.solve(A, c) if nt else c
        if a[0] <= 0:
            flags.append(f"no reachable {label} state")
            out.append((None, 0.0))
        else:
            out.append((w[0] / a[0], float(a[0])))
    (mtts, ps), (mttf, pf) = out
    return MTT(mtts, mttf, ps, pf, flags)


def absorption_probabilities(model: MarkovModel) -> tuple:
    """(p_s, p_f) reached from the initial marking, via U R."""
    U = fundamental_matrix(model.T)
    return float((U @ model.R_S).sum(axis=1)[0]), float((U @ model.R_F).sum(axis=1)[0])


def mtt_exp_log(model: MarkovModel) -> tuple:
    """Cross-check of MTTS/MTTF through exponentiated transition times.

    Valid when each absorbing marking has a single path from the initial
    one (Sequence/Fallback). Entries overflow for times above ~700.
    """
    nt = model.nt
    if np.max(model.times, initial=0.0) > 700:
        raise OverflowError("transition times too large for the exp/log form")
    A = np.where(model.P > 0, np.exp(model.times), 0.0)
    A_T = A[:nt, :nt].T
    UA = fundamental_matrix(A_T)
    U = fundamental_matrix(model.T.T)
    res = []
    for block in (model.mrg.success_states, model.mrg.failure_states):
        cols = list(block)
        if not cols:
            res.append(None)
            continue
        H = A[:nt, cols].T @ UA
        Ub = model.P[:nt, cols].T @ U
        u, h = Ub[:, 0], H[:, 0]
        mask = u > 0
        res.append(float((u[mask] * np.log(h[mask])).sum() / u[mask].sum()) if mask.any() else None)
    return tuple(res)


def eliminate_vanishing(model: MarkovModel, threshold: float = 1e-6):
    """Remove near-instantaneous transient markings from the CTMC.

    Returns ``(Q, pi0, keep)`` for the reduced chain over the kept states.
    Probability that would pass through a vanishing marking is routed
    directly to where it ends up.
    """
    k = model.mrg.size
    nt = model.nt
    van = np.zeros(k, bool)
    van[:nt] = model.SJ < threshold
    keep = np.flatnonzero(~van)
    vidx = np.flatnonzero(van)
    if not len(vidx):
        pi0 = np.zeros(k)
        pi0[0] = 1.0
        return model.Q.copy(), pi0, keep
    P = model.P
    # Landing distribution from each vanishing state onto kept states.
    L = linalg.solve(np.eye(len(vidx)) - P[np.ix_(vidx, vidx)], P[np.ix_(vidx, keep)])
    route = np.zeros((k, len(keep)))
    route[keep, np.arange(len(keep))] = 1.0
    route[vidx] = L
    Q = model.Q[np.ix_(keep, np.arange(k))] @ route
    Q[np.arange(len(keep)), np.arange(len(keep))] = 0.0
    Q[np.arange(len(keep)), np.arange(len(keep))] = -Q.sum(axis=1)
    start = np.zeros(k)
    start[0] = 1.0
    pi0 = start @ route
    return Q, pi0, keep


def transient_probabilities(Q: np.ndarray, pi0, grid, tol: float = 1e-13,
                            max_rate_time: float = 50.0, backend=None) -> np.ndarray:
    """Solve pi' = Q^T pi on ``grid`` by uniformization.

    Each sub-step's Poisson tail is below ``tol``; sub-steps keep
    ``Lambda * dt <= max_rate_time``. Returns one row per grid point.
    """
    Q = np.asarray(Q, float)
    pi = np.asarray(pi0, float).copy()
    grid = np.asarray(grid, float)
    if np.any(np.diff(grid) < 0) or (len(grid) and grid[0] < 0):
        raise ValueError("grid must be nondecreasing and >= 0")
    if abs(pi.sum() - 1) > 1e-12 or np.any(pi < 0):
        raise ValueError("pi0 must be a probability vector")
    lam = float(np.max(-np.diag(Q), initial=0.0))
    out = np.empty((len(grid), len(pi)))
    if lam == 0:
        out[:] = pi
        return out
    Pu = np.eye(len(pi)) + Q / lam
    t = 0.0
    for g, tg in enumerate(grid):
        gap = tg - t
        if gap > 0:
            n_sub = max(1, math.ceil(lam * gap / max_rate_time))
            h = gap / n_sub
            rate = lam * h
            K = int(poisson.isf(tol, rate)) + 1
            weights = poisson.pmf(np.arange(K + 1), rate)
            for _ in range(n_sub):
                pi = _accel.uniformize(pi, Pu, weights, backend)
            t = tg
        if np.any(pi < -1e-12) or not np.all(np.isfinite(pi)) or abs(pi.sum() - 1) > 1e-6:
            raise IntegrationDiverged(f"invalid state vector at t={tg}")
        out[g] = pi
    return out
