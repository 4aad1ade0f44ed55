"""Hot loops with a numba implementation and a pure-numpy fallback.

The backend is chosen by the ``BTKIT_BACKEND`` environment variable
(``numba`` or ``numpy``). Without it numba is used when importable.
Both backends consume the same pre-drawn uniforms, so their results agree.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

LEAF, SEQ, FB, PAR = 0, 1, 2, 3
EXP, DET = 0, 1


def default_backend() -> str:
    name = os.environ.get("BTKIT_BACKEND", "").strip().lower()
    if name in ("numpy", "python"):
        return "numpy"
    if name == "numba" and numba is None:
        raise RuntimeError("BTKIT_BACKEND=numba but numba is not installed")
    return "numba" if numba is not None else "numpy"


def resolve(backend=None) -> str:
    if backend is None:
        return default_backend()
    backend = backend.lower()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    return backend


# -- Monte Carlo tree evaluation ----------------------------------------------

def _leaf_draw_np(u_out, u_time, p_s, kind_s, par_s, kind_f, par_f):
    ok = u_out < p_s
    t_s = np.where(kind_s == DET, par_s, -np.log1p(-u_time) / par_s)
    t_f = np.where(kind_f == DET, par_f, -np.log1p(-u_time) / par_f)
    return np.where(ok, 1, -1).astype(np.int8), np.where(ok, t_s, t_f)


def mc_numpy(kinds, ms, child_ptr, child_idx, leaf_of, p_s, kind_s, par_s,
             kind_f, par_f, uniforms):
    """Evaluate the encoded tree (post-order) for every run at once."""
    runs = uniforms.shape[0]
    n_nodes = len(kinds)
    out = np.zeros((n_nodes, runs), np.int8)
    dur = np.zeros((n_nodes, runs))
    for k in range(n_nodes):
        kind = kinds[k]
        if kind == LEAF:
            j = leaf_of[k]
            out[k], dur[k] = _leaf_draw_np(uniforms[:, j, 0], uniforms[:, j, 1], p_s[j],
                                           kind_s[j], par_s[j], kind_f[j], par_f[j])
            continue
        kids = child_idx[child_ptr[k]:child_ptr[k + 1]]
        if kind in (SEQ, FB):
            stop = -1 if kind == SEQ else 1
            active = np.ones(runs, bool)
            t = np.zeros(runs)
            res = np.full(runs, -stop, np.int8)
            for c in kids:
                t += np.where(active, dur[c], 0.0)
                hit = active & (out[c] == stop)
                res[hit] = stop
                active &= ~hit
            out[k], dur[k] = res, t
        else:
            n = len(kids)
            D = dur[kids].T
            O = out[kids].T
            order = np.argsort(D, axis=1, kind="stable")
            Ds = np.take_along_axis(D, order, axis=1)
            Os = np.take_along_axis(O, order, axis=1)
            cs = np.cumsum(Os == 1, axis=1)
            cf = np.cumsum(Os == -1, axis=1)
            succ = cs >= ms[k]
            fail = ~succ & (cf > n - ms[k])
            first = np.argmax(succ | fail, axis=1)
            rows = np.arange(runs)
            out[k] = np.where(succ[rows, first], 1, -1)
            dur[k] = Ds[rows, first]
    return out[-1], dur[-1]


if numba is not None:
    @numba.njit(cache=True)
    def _mc_numba(kinds, ms, child_ptr, child_idx, leaf_of, p_s, kind_s, par_s,
                  kind_f, par_f, uniforms):
        runs = uniforms.shape[0]
        n_nodes = kinds.shape[0]
        res_out = np.empty(runs, np.int8)
        res_dur = np.empty(runs)
        out = np.empty(n_nodes, np.int8)
        dur = np.empty(n_nodes)
        width = 1
        for k in range(n_nodes):
            w = child_ptr[k + 1] - child_ptr[k]
            if w > width:
                width = w
        bd = np.empty(width)
        bo = np.empty(width, np.int8)
        for r in range(runs):
            for k in range(n_nodes):
                kind = kinds[k]
                if kind == LEAF:
                    j = leaf_of[k]
                    u = uniforms[r, j, 1]
                    if uniforms[r, j, 0] < p_s[j]:
                        out[k] = 1
                        dur[k] = par_s[j] if kind_s[j] == DET else -np.log1p(-u) / par_s[j]
                    else:
                        out[k] = -1
                        dur[k] = par_f[j] if kind_f[j] == DET else -np.log1p(-u) / par_f[j]
                elif kind == SEQ or kind == FB:
                    stop = -1 if kind == SEQ else 1
                    t = 0.0
                    res = -stop
                    for p in range(child_ptr[k], child_ptr[k + 1]):
                        c = child_idx[p]
                        t += dur[c]
                        if out[c] == stop:
                            res = stop
                            break
                    out[k] = res
                    dur[k] = t
                else:
                    n = child_ptr[k + 1] - child_ptr[k]
                    for i in range(n):
                        c = child_idx[child_ptr[k] + i]
                        # stable insertion sort on durations
                        j = i
                        while j > 0 and bd[j - 1] > dur[c]:
                            bd[j] = bd[j - 1]
                            bo[j] = bo[j - 1]
                            j -= 1
                        bd[j] = dur[c]
                        bo[j] = out[c]
                    cs = 0
                    cf = 0
                    for i in range(n):
                        if bo[i] == 1:
                            cs += 1
                        else:
                            cf += 1
                        if cs >= ms[k]:
                            out[k] = 1
                            dur[k] = bd[i]
                            break
                        if cf > n - ms[k]:
                            out[k] = -1
                            dur[k] = bd[i]
                            break
            res_out[r] = out[n_nodes - 1]
            res_dur[r] = dur[n_nodes - 1]
        return res_out, res_dur


def mc_evaluate(encoded: dict, uniforms: np.ndarray, backend=None):
    backend = resolve(backend)
    args = (encoded["kinds"], encoded["ms"], encoded["child_ptr"], encoded["child_idx"],
            encoded["leaf_of"], encoded["p_s"], encoded["kind_s"], encoded["par_s"],
            encoded["kind_f"], encoded["par_f"], np.ascontiguousarray(uniforms))
    if backend == "numba":
        return _mc_numba(*args)
    return mc_numpy(*args)


# -- uniformization ----------------------------------------------------------------

def uniformize_numpy(pi, Pu, weights):
    acc = weights[0] * pi
    v = pi
    for w in weights[1:]:
        v = v @ Pu
        acc = acc + w * v
    return acc


if numba is not None:
    @numba.njit(cache=True)
    def _uniformize_numba(pi, Pu, weights):
        n = pi.shape[0]
        acc = weights[0] * pi
        v = pi.copy()
        nxt = np.empty(n)
        for k in range(1, weights.shape[0]):
            nxt[:] = 0.0
            # row-major walk; early vectors are mostly zero
            for i in range(n):
                vi = v[i]
                if vi != 0.0:
                    for j in range(n):
                        nxt[j] += vi * Pu[i, j]
            for j in range(n):
                v[j] = nxt[j]
                acc[j] += weights[k] * v[j]
        return acc


def uniformize(pi, Pu, weights, backend=None):
    """Sum_k weights[k] * pi Pu^k for a row vector ``pi``."""
    pi = np.ascontiguousarray(pi, float)
    Pu = np.ascontiguousarray(Pu, float)
    weights = np.ascontiguousarray(weights, float)
    if resolve(backend) == "numba":
        return _uniformize_numba(pi, Pu, weights)
    return uniformize_numpy(pi, Pu, weights)
