import numpy as np
import pytest

from btkit import models
from btkit.core import Status
from btkit.statespace import (F_CODE, R_CODE, S_CODE, DegenerateGradient, DimensionMismatch,
                              NonFiniteState, PartitionViolation, RegionSpec, SampledDomain,
                              StateSpaceBT, StepLengthViolated, chattering_indicator,
                              check_composition_lemma, check_fts, check_safety, compose_fallback,
                              compose_parallel, compose_sequence, execute, gradient, lift,
                              parallel_status, partition_ok)


def line(step, s_at, name, f_below=None, dt=1.0):
    """1-D system moving by ``step``; Success at ``x >= s_at``, Failure below ``f_below``."""
    def r(X):
        x = X[:, 0]
        out = np.where(x >= s_at - 1e-9, S_CODE, R_CODE)
        if f_below is not None:
            out = np.where(x < f_below, F_CODE, out)
        return out.astype(np.int8)
    return StateSpaceBT(lambda X: X + step, r, dt, 1, name)


def spec_of(bt, tau, r_prime=None):
    codes = bt.status_codes
    return RegionSpec(lambda X: codes(X) == S_CODE, lambda X: codes(X) == F_CODE,
                      lambda X: codes(X) == R_CODE, r_prime, tau)


def const_status(code, n=1, step=0.0, name="c"):
    return StateSpaceBT(lambda X: X + step, lambda X: np.full(len(X), code, np.int8), 1.0, n, name)


# -- compositions ----------------------------------------------------------------

def test_sequence_runs_second_child_inside_s1():
    bt1 = const_status(S_CODE, step=1.0, name="one")
    bt2 = const_status(R_CODE, step=2.0, name="two")
    seq = compose_sequence(bt1, bt2)
    assert seq.status([0.0]) is Status.RUNNING
    assert seq.step([0.0])[0, 0] == 2.0


def test_sequence_failure_of_first_child():
    bt1 = const_status(F_CODE, step=1.0)
    seq = compose_sequence(bt1, const_status(S_CODE, step=2.0))
    assert seq.status([0.0]) is Status.FAILURE
    assert seq.step([0.0])[0, 0] == 1.0


def test_fallback_delegates_on_failure_and_keeps_success():
    fb = compose_fallback(const_status(F_CODE, step=1.0), const_status(R_CODE, step=2.0))
    assert fb.status([0.0]) is Status.RUNNING and fb.step([0.0])[0, 0] == 2.0
    fb = compose_fallback(const_status(S_CODE, step=1.0), const_status(R_CODE, step=2.0))
    assert fb.status([0.0]) is Status.SUCCESS


@pytest.mark.parametrize("compose", [compose_sequence, compose_fallback])
def test_three_way_fold_matches_nested(compose):
    bts = [line(0.1, 0.3, "a", f_below=-0.2), line(0.05, 0.6, "b", f_below=0.1),
           line(0.2, 0.9, "c", f_below=0.4)]
    flat = compose(*bts)
    nested = compose(bts[0], compose(bts[1], bts[2]))
    X = np.linspace(-0.5, 1.2, 200)[:, None]
    assert np.array_equal(flat.status_codes(X), nested.status_codes(X))
    assert np.array_equal(flat.f(X), nested.f(X))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        compose_sequence(const_status(S_CODE, n=1), const_status(S_CODE, n=2))
    with pytest.raises(DimensionMismatch):
        compose_fallback(line(0.1, 1, "a", dt=1.0), line(0.1, 1, "b", dt=0.5))


def test_parallel_status_rules():
    S, F, R = (np.array([c]) for c in (S_CODE, F_CODE, R_CODE))
    assert parallel_status(S, R, 1)[0] == S_CODE
    assert parallel_status(S, F, 2)[0] == F_CODE
    assert parallel_status(S, S, 2)[0] == S_CODE
    assert parallel_status(F, F, 1)[0] == F_CODE
    assert parallel_status(R, S, 2)[0] == R_CODE


def test_parallel_partition_violation():
    dom = SampledDomain.grid([0, 0], [1, 1], 5)
    mover = StateSpaceBT(lambda X: X + 0.1, lambda X: np.zeros(len(X), np.int8), 1.0, 2, "both")
    still = StateSpaceBT(lambda X: X, lambda X: np.zeros(len(X), np.int8), 1.0, 2, "still")
    with pytest.raises(PartitionViolation):
        compose_parallel(mover, still, 1, ([0], [1]), dom)


def _lifted_pair():
    a = lift(line(0.1, 1.0, "x"), 2, [0])
    b = lift(line(0.25, 1.0, "y"), 2, [1])
    return a, b


def test_parallel_dynamics_combine_partitions():
    a, b = _lifted_pair()
    dom = SampledDomain.grid([0, 0], [1, 1], 11)
    par = compose_parallel(a, b, 2, ([0], [1]), dom)
    out = par.step([0.0, 0.0])[0]
    assert out == pytest.approx([0.1, 0.25])


def test_lift_holds_other_coordinates():
    a = lift(line(0.1, 1.0, "x"), 3, [1])
    assert a.step([5.0, 0.0, 7.0])[0] == pytest.approx([5.0, 0.1, 7.0])
    with pytest.raises(DimensionMismatch):
        lift(line(0.1, 1.0, "x"), 3, [0, 1])


# -- execution and FTS ------------------------------------------------------------

def test_walk_home_reaches_home_at_step_five():
    walk, _ = models.walk_home()
    traj = execute(walk, [0.5, 0.5], 20)
    assert traj.reason == "success" and traj.steps == 5
    assert traj.states[-1][0] <= 1e-9
    assert traj.times[1] - traj.times[0] == walk.dt


def test_humanoid_fallback_from_lying_down():
    fb = compose_fallback(models.walk_home()[0], models.sit_to_stand()[0], models.lie_to_sit()[0])
    traj = execute(fb, [0.5, 0.0], 100)
    assert traj.final_status is Status.SUCCESS and traj.steps <= 24


def test_start_in_success_region():
    walk, _ = models.walk_home()
    traj = execute(walk, [0.0, 0.5], 10)
    assert traj.steps == 0 and traj.final_status is Status.SUCCESS


def test_execute_errors_and_out_of_domain():
    nan = StateSpaceBT(lambda X: X * np.nan, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    with pytest.raises(NonFiniteState):
        execute(nan, [1.0], 5)
    with pytest.raises(ValueError):
        execute(nan, [1.0], 0)
    drift = line(1.0, 100.0, "drift")
    traj = execute(drift, [0.0], 50, bounds=(np.array([-1.0]), np.array([3.0])))
    assert traj.reason == "out_of_domain"


def test_fts_bounds_of_humanoid_actions():
    dom = models.humanoid_domain()
    sit = check_fts(*models.sit_to_stand(), dom)
    lie = check_fts(*models.lie_to_sit(), dom)
    assert sit.is_fts and sit.worst_tau == 4
    assert lie.is_fts and lie.worst_tau == 10


def test_identity_dynamics_is_not_fts():
    stay = StateSpaceBT(lambda X: X, lambda X: np.where(X[:, 0] > 1, S_CODE, R_CODE), 1.0, 1)
    dom = SampledDomain.grid([0], [0.5], 6)
    rep = check_fts(stay, spec_of(stay, 5), dom)
    assert not rep.is_fts and rep.witnesses
    assert rep.witnesses[0]["reason"] == "no success within tau"


def test_fts_requires_tau():
    bt = line(0.1, 1.0, "x")
    with pytest.raises(ValueError):
        check_fts(bt, spec_of(bt, None), SampledDomain.grid([0], [1], 5))


def test_sampled_domain_bounds():
    with pytest.raises(ValueError):
        SampledDomain(np.array([[2.0]]), [0.0], [1.0])
    dom = models.humanoid_domain(50)
    assert dom.points[:, 0].min() > 0 and len(dom.points) == 2500


# -- lemmas -------------------------------------------------------------------------

def test_fallback_lemma_humanoid_bound():
    dom = models.humanoid_domain()
    inner = check_composition_lemma("fallback", models.sit_to_stand(), models.lie_to_sit(), dom)
    outer = check_composition_lemma("fallback", models.walk_home(), (inner.composed, inner.spec), dom)
    assert inner.hypotheses_hold and inner.conclusion_holds and inner.tau0 == 14
    assert outer.hypotheses_hold and outer.conclusion_holds and outer.tau0 == 24
    assert any("R1' = R1" in n for n in outer.notes)


def test_sequence_lemma_counterexample():
    # child 2 only attracts from [2, 3); child 1 succeeds from 1 on
    dom = SampledDomain.grid([0], [3.5], 36)
    bt1 = line(0.5, 1.0, "first")
    bt2 = line(0.5, 3.0, "second")
    sp1 = spec_of(bt1, 4, r_prime=lambda X: X[:, 0] < 1.0 - 1e-9)
    sp2 = spec_of(bt2, 2, r_prime=lambda X: (X[:, 0] >= 2.0 - 1e-9) & (X[:, 0] < 3.0 - 1e-9))
    rep = check_composition_lemma("sequence", (bt1, sp1), (bt2, sp2), dom)
    assert not rep.hypotheses_hold
    w = rep.witnesses["S1 = R2' u S2"]
    assert w and all(1.0 <= x[0] < 2.0 for x in w)


def test_sequence_lemma_holds_when_regions_chain():
    dom = SampledDomain.grid([0], [3.5], 36)
    bt1 = line(0.5, 1.0, "first")
    bt2 = line(0.5, 3.0, "second")
    sp1 = spec_of(bt1, 2, r_prime=lambda X: X[:, 0] < 1.0 - 1e-9)
    sp2 = spec_of(bt2, 4, r_prime=lambda X: (X[:, 0] >= 1.0 - 1e-9) & (X[:, 0] < 3.0 - 1e-9))
    rep = check_composition_lemma("sequence", (bt1, sp1), (bt2, sp2), dom)
    assert rep.hypotheses_hold and rep.conclusion_holds and rep.tau0 == 6


@pytest.mark.parametrize("m,tau0", [(1, 4), (2, 10)])
def test_parallel_lemma_bounds(m, tau0):
    a, b = _lifted_pair()
    inside = lambda X: X[:, 0] < 1.0 - 1e-9
    sa = spec_of(a, 10, r_prime=inside)
    sb = spec_of(b, 4, r_prime=lambda X: X[:, 1] < 1.0 - 1e-9)
    dom = SampledDomain.grid([0, 0], [1, 1], 11)
    rep = check_composition_lemma("parallel", (a, sa), (b, sb), dom, m=m, partition=([0], [1]))
    assert rep.tau0 == tau0 and rep.conclusion_holds


def test_lemma_rejects_unknown_kind():
    with pytest.raises(ValueError):
        check_composition_lemma("chain", models.walk_home(), models.sit_to_stand(),
                                models.humanoid_domain(5))


# -- safety ---------------------------------------------------------------------------

def test_battery_lemma_instance_is_safe():
    bm = models.battery(30)
    rep = check_safety(bm.guarantee_power, bm.power_spec, bm.do_other_task, bm.obstacle,
                       bm.init, bm.d, bm.reachable, steps=3000)
    assert rep.safe and rep.max_step < bm.d


def test_battery_trajectory_from_80_50():
    bm = models.battery()
    rep = check_safety(bm.guarantee_power, bm.power_spec, bm.do_other_task, bm.obstacle,
                       bm.init, bm.d, bm.reachable, steps=10_000, starts=[[80.0, 50.0]])
    assert rep.trajectories_ok and rep.min_margin["x2"] > 0


def test_identity_second_child_is_trivially_safe():
    bm = models.battery(20)
    idle = StateSpaceBT(lambda X: X, lambda X: np.zeros(len(X), np.int8), 10.0, 2, "idle")
    rep = check_safety(bm.guarantee_power, bm.power_spec, idle, bm.obstacle, bm.init, bm.d,
                       bm.reachable, steps=500)
    assert rep.safe and rep.max_step == 0


def test_step_length_violation():
    bm = models.battery(10)
    jump = StateSpaceBT(lambda X: X + 10.0, lambda X: np.zeros(len(X), np.int8), 10.0, 2, "jump")
    with pytest.raises(StepLengthViolated):
        check_safety(bm.guarantee_power, bm.power_spec, jump, bm.obstacle, bm.init, bm.d,
                     bm.reachable, steps=10)


def test_unsafe_task_is_caught():
    bm = models.battery(20)
    drain = StateSpaceBT(lambda X: X - np.array([0.0, 4.0]), lambda X: np.zeros(len(X), np.int8),
                         10.0, 2, "drain")
    # obstacle raised above the level where power takes over: one drain step lands in it
    obstacle = lambda X: X[:, 1] <= 19
    rep = check_safety(bm.guarantee_power, bm.power_spec, drain, obstacle, bm.init, bm.d,
                       bm.reachable, steps=200)
    assert not rep.safe and rep.obstacle_hits


# -- chattering -----------------------------------------------------------------------

def _switched(x, s, f1, f2, steps):
    """Sequence(T1, T2) with S1 = {s < 0}: count switches between the two."""
    active, switches = None, 0
    for _ in range(steps):
        now = 2 if s(x) < 0 else 1
        if active is not None and now != active:
            switches += 1
        active = now
        x = f2(x) if now == 2 else f1(x)
    return switches


def test_both_fields_into_s1_are_chatter_free():
    s = lambda x: x[0]
    bt1 = StateSpaceBT(lambda X: X - 0.1, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    bt2 = StateSpaceBT(lambda X: X - 0.1, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    rep = chattering_indicator([0.0], s, bt1, bt2)
    assert rep.lambda1 < 0 and rep.lambda2 < 0 and rep.chatter_free
    assert _switched(np.array([0.05]), s, bt1.f, bt2.f, 50) <= 1


def test_crossing_fields_chatter():
    s = lambda x: x[0]
    into_s1 = StateSpaceBT(lambda X: X - 0.1, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    out_of_s1 = StateSpaceBT(lambda X: X + 0.1, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    rep = chattering_indicator([0.0], s, into_s1, out_of_s1)
    assert rep.lambda1 < 0 and rep.lambda2 > 0 and not rep.chatter_free
    assert _switched(np.array([0.05]), s, into_s1.f, out_of_s1.f, 50) >= 40


def test_gradient_matches_quadratic_field():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.7])
    s = lambda x: float(x @ A @ x + b @ x)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        assert np.allclose(gradient(s, x, 1e-4), 2 * A @ x + b, atol=1e-6)
    f1 = StateSpaceBT(lambda X: X + np.array([0.1, 0.0]), lambda X: np.zeros(len(X), np.int8), 1.0, 2)
    f2 = StateSpaceBT(lambda X: X + np.array([0.0, -0.2]), lambda X: np.zeros(len(X), np.int8), 1.0, 2)
    x = np.array([0.4, 0.9])
    g = 2 * A @ x + b
    rep = chattering_indicator(x, s, f1, f2)
    assert rep.lambda1 == pytest.approx(g @ [0.1, 0.0], abs=1e-6)
    assert rep.lambda2 == pytest.approx(g @ [0.0, -0.2], abs=1e-6)


def test_degenerate_gradient():
    flat = StateSpaceBT(lambda X: X, lambda X: np.zeros(len(X), np.int8), 1.0, 1)
    with pytest.raises(DegenerateGradient):
        chattering_indicator([0.0], lambda x: 1.0, flat, flat)


def test_partition_of_built_in_models():
    dom = models.humanoid_domain()
    for make in models.MODELS.values():
        bt, spec = make()
        assert partition_ok(bt, dom)
        X = dom.points
        total = spec.s(X).astype(int) + spec.f(X).astype(int) + spec.r(X).astype(int)
        assert np.all(total == 1)
