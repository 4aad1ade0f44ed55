import itertools

import numpy as np
import pytest

from btkit import models
from btkit.converters import (EXECUTED, STATE, Controller, ControllerFamily, DecisionTree,
                              FSMSpec, Layer, NondeterministicFSM, NoProgress, SubsumptionStack,
                              TRProgram, burridge_order, dt_to_bt, executed_action, fsm_bt_run,
                              fsm_context, fsm_to_bt, goto_program, grab_and_throw_fsm,
                              humanoid_family, only_basic_nodes, overheat_stack,
                              robot_task_dt, stronger_regression, subsumption_to_bt, toggle_fsm,
                              tr_to_bt)
from btkit.core import FAILURE, RUNNING, Kind, tick
from btkit.statespace import SampledDomain, check_composition_lemma


def valuations(names):
    for bits in itertools.product([False, True], repeat=len(names)):
        yield dict(zip(names, bits))


# -- decision trees -------------------------------------------------------------

def test_single_leaf_decision_tree():
    bt = dt_to_bt(DecisionTree.leaf("Wait"))
    assert bt.kind == Kind.ACTION and bt.name == "Wait"
    assert executed_action(bt, {}) == ("Wait", RUNNING)


def test_robot_decision_tree_structure():
    bt = dt_to_bt(robot_task_dt())
    assert bt.kind == Kind.FALLBACK and len(bt.children) == 2
    urgent = bt.children[0]
    assert urgent.kind == Kind.SEQUENCE and urgent.children[0].name == "TaskUrgent"
    inner = urgent.children[1]
    assert inner.kind == Kind.FALLBACK
    assert inner.children[0].children[0].name == "BatteryAbove10"
    assert inner.children[0].children[1].name == "PerformTask"
    assert inner.children[1].name == "Recharge"
    assert bt.children[1].children[0].children[0].name == "BatteryAbove30"
    assert only_basic_nodes(bt)


def test_decision_tree_equivalence_five_predicates():
    dt = DecisionTree.node(
        "p1",
        DecisionTree.node("p2", "a", DecisionTree.node("p3", "b", "c")),
        DecisionTree.node("p4", DecisionTree.node("p5", "d", "e"), "a"))
    bt = dt_to_bt(dt)
    for v in valuations(["p1", "p2", "p3", "p4", "p5"]):
        assert executed_action(bt, v) == (dt.decide(v), RUNNING)


# -- subsumption -------------------------------------------------------------------

def test_all_layers_decline():
    bt = subsumption_to_bt(overheat_stack())
    ran, status = executed_action(bt, {"overheated": False, "battery_low": False,
                                       "has_tasks": False})
    assert ran is None and status is FAILURE


def test_subsumption_matches_priority_scan():
    stack = overheat_stack()
    bt = subsumption_to_bt(stack)
    for v in valuations(["overheated", "battery_low", "has_tasks"]):
        ran, status = executed_action(bt, v)
        assert ran == stack.select(v)
        assert status is (FAILURE if ran is None else RUNNING)
    assert only_basic_nodes(bt)


def test_single_layer_is_the_controller():
    stack = SubsumptionStack([Layer("Avoid", "obstacle", "Turn")])
    bt = subsumption_to_bt(stack)
    assert executed_action(bt, {"obstacle": True}) == ("Turn", RUNNING)
    assert executed_action(bt, {"obstacle": False}) == (None, FAILURE)
    with pytest.raises(ValueError):
        subsumption_to_bt(SubsumptionStack([]))


# -- teleo-reactive ---------------------------------------------------------------------

def test_goto_program_structure():
    bt = tr_to_bt(goto_program())
    assert bt.kind == Kind.FALLBACK and len(bt.children) == 3
    assert [c.children[0].name for c in bt.children[:2]] == ["Equal(pos,loc)", "HeadingTowards(loc)"]
    assert [c.children[1].name for c in bt.children[:2]] == ["Idle", "GoForwards"]
    assert bt.children[2].name == "Rotate"
    assert only_basic_nodes(bt)


def test_tr_first_true_rule_runs():
    tr = TRProgram([("c1", "a1"), ("c2", "a2"), ("c3", "a3"), ("c4", "a4")])
    bt = tr_to_bt(tr)
    for v in valuations(tr.conditions()):
        ran, status = executed_action(bt, v)
        assert ran == tr.select(v)
        assert status is (FAILURE if ran is None else RUNNING)


def test_catch_all_program():
    bt = tr_to_bt(TRProgram([(None, "Wander")]))
    assert bt.kind == Kind.ACTION
    for _ in range(3):
        assert executed_action(bt, {}) == ("Wander", RUNNING)
    with pytest.raises(ValueError):
        TRProgram([])


def test_stronger_regression():
    tr = goto_program()
    good = [{"Equal(pos,loc)": False, "HeadingTowards(loc)": False},
            {"Equal(pos,loc)": False, "HeadingTowards(loc)": True},
            {"Equal(pos,loc)": False, "HeadingTowards(loc)": True},
            {"Equal(pos,loc)": True, "HeadingTowards(loc)": True}]
    assert stronger_regression(tr, [good]) == []
    bad = [{"HeadingTowards(loc)": True}, {"HeadingTowards(loc)": False}]
    assert stronger_regression(tr, [good, bad]) == [(1, 0, 1)]


# -- finite state machines ---------------------------------------------------------------

def test_toggle_fsm_lockstep():
    fsm = toggle_fsm()
    events = ["tick"] * 20
    assert fsm_bt_run(fsm_to_bt(fsm), fsm, events) == fsm.run(events)
    states = [s for s, _, _ in fsm.run(events)]
    assert states[:4] == ["A", "B", "A", "B"]


def test_one_state_fsm():
    fsm = FSMSpec(["Only"], "Only", [], {"Only": "Hover"})
    bt = fsm_to_bt(fsm)
    ctx = fsm_context(fsm)
    for e in ["x", None, "y"]:
        ctx.blackboard["event"] = e
        ctx.blackboard[EXECUTED] = []
        assert tick(bt, ctx) is RUNNING
        assert ctx.blackboard[EXECUTED] == ["Hover"] and ctx.blackboard[STATE] == "Only"


def test_grab_and_throw_trace():
    fsm = grab_and_throw_fsm()
    events = [None, "found", "lost", "found", "grasped", "dropped", "found", "grasped",
              "thrown", None]
    trace = fsm_bt_run(fsm_to_bt(fsm), fsm, events)
    assert trace == fsm.run(events)
    assert trace[-1] == ("Done", "Idle", "Done")
    assert [a for _, a, _ in trace][:3] == ["Search", "Search", "Grasp"]


def test_nondeterministic_fsm():
    with pytest.raises(NondeterministicFSM):
        FSMSpec(["A", "B", "C"], "A", [("A", "e", "B"), ("A", "e", "C")])
    with pytest.raises(ValueError):
        FSMSpec(["A"], "Z", [])


# -- controller ordering --------------------------------------------------------------------

def test_humanoid_ordering():
    dom = models.humanoid_domain()
    res = burridge_order(humanoid_family(), dom)
    assert res.order == ["Walk", "SitToStand", "LieToSit"] and res.leftover == []
    assert [c.name for c in res.tree.children] == res.order
    fam = humanoid_family()
    for a, b in zip(res.order, res.order[1:]):
        ca, cb = fam.get(a), fam.get(b)
        rep = check_composition_lemma("fallback", (ca.bt, ca.spec), (cb.bt, cb.spec), dom)
        assert rep.hypotheses_hold, (a, b, rep.witnesses)


def test_ordering_composes_state_space_bts():
    dom = models.humanoid_domain(20)
    comp = burridge_order(humanoid_family(), dom).composed()
    x = np.array([[0.5, 0.0]])
    for _ in range(30):
        x = comp.f(x)
    assert comp.status([x[0]]).name == "SUCCESS"


def test_single_controller_ordering():
    c = Controller("Only", lambda X: X[:, 0] > 0.5, lambda X: X[:, 0] <= 0.5)
    res = burridge_order(ControllerFamily([c], "Only"), SampledDomain.grid([0], [1], 11))
    assert res.order == ["Only"] and res.tree.kind == Kind.ACTION


def test_disjoint_regions_make_no_progress():
    main = Controller("Main", lambda X: X[:, 0] > 0.9, lambda X: X[:, 0] > 0.5)
    other = Controller("Other", lambda X: X[:, 0] < 0.1, lambda X: X[:, 0] < 0.2)
    fam = ControllerFamily([main, other], "Main")
    dom = SampledDomain.grid([0], [1], 21)
    with pytest.raises(NoProgress) as err:
        burridge_order(fam, dom)
    assert err.value.result.order == ["Main"] and err.value.result.leftover == ["Other"]
    assert burridge_order(fam, dom, strict=False).leftover == ["Other"]
