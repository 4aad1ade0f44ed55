"""Build BTs from other control formalisms.

Every converter returns an ordinary tree whose leaves read predicates
from the blackboard. Actions never finish: they log themselves under
``EXECUTED`` and return Running, so the action that runs on a tick is
exactly the Running leaf.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (FAILURE, RUNNING, SUCCESS, Action, Condition, ExecutionContext, Fallback, Kind,
                   Node, Sequence, tick)
from .statespace import SampledDomain, compose_fallback

EXECUTED = "__executed"
STATE = "state"
EVENT = "event"


class NondeterministicFSM(ValueError):
    pass


class NoProgress(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def predicate(name: str) -> Node:
    return Condition(name, fn=lambda ctx: bool(ctx.blackboard.get(name, False)))


def durative(name: str) -> Node:
    """An action that only ever returns Running."""
    def run(ctx):
        ctx.blackboard.setdefault(EXECUTED, []).append(name)
        return RUNNING
    return Action(name, fn=run)


def executed_action(tree: Node, valuation: dict, ctx: Optional[ExecutionContext] = None):
    """Tick once under ``valuation`` and return the action that ran (or None)."""
    ctx = ctx or ExecutionContext()
    ctx.blackboard.update(valuation)
    ctx.blackboard[EXECUTED] = []
    status = tick(tree, ctx)
    ran = ctx.blackboard[EXECUTED]
    return (ran[-1] if ran else None), status


def only_basic_nodes(tree: Node) -> bool:
    ok = {Kind.SEQUENCE, Kind.FALLBACK, Kind.CONDITION, Kind.ACTION}
    return all(n.kind in ok for n in tree.walk())


# -- decision trees --------------------------------------------------------------

@dataclass
class DecisionTree:
    """``predicate`` with two branches, or a leaf holding ``action``."""

    predicate: Optional[str] = None
    yes: Optional["DecisionTree"] = None
    no: Optional["DecisionTree"] = None
    action: Optional[str] = None

    @classmethod
    def leaf(cls, action: str) -> "DecisionTree":
        return cls(action=action)

    @classmethod
    def node(cls, pred: str, yes, no) -> "DecisionTree":
        as_dt = lambda x: x if isinstance(x, DecisionTree) else cls.leaf(x)
        return cls(pred, as_dt(yes), as_dt(no))

    @property
    def is_leaf(self) -> bool:
        return self.action is not None

    def __post_init__(self):
        if self.is_leaf == (self.predicate is not None):
            raise ValueError("a decision node needs either a predicate or an action")
        if not self.is_leaf and (self.yes is None or self.no is None):
            raise ValueError(f"predicate {self.predicate!r} needs two branches")

    def decide(self, valuation: dict) -> str:
        node = self
        while not node.is_leaf:
            node = node.yes if valuation.get(node.predicate, False) else node.no
        return node.action

    def predicates(self) -> list:
        if self.is_leaf:
            return []
        out = [self.predicate]
        for p in self.yes.predicates() + self.no.predicates():
            if p not in out:
                out.append(p)
        return out


def dt_to_bt(dt: DecisionTree) -> Node:
    if dt.is_leaf:
        return durative(dt.action)
    return Fallback(Sequence(predicate(dt.predicate), dt_to_bt(dt.yes)), dt_to_bt(dt.no))


def robot_task_dt() -> DecisionTree:
    """Do the task or recharge, depending on urgency and battery level."""
    return DecisionTree.node(
        "TaskUrgent",
        DecisionTree.node("BatteryAbove10", "PerformTask", "Recharge"),
        DecisionTree.node("BatteryAbove30", "PerformTask", "Recharge"))


# -- subsumption -----------------------------------------------------------------

@dataclass
class Layer:
    name: str
    wants: str
    action: str


@dataclass
class SubsumptionStack:
    """Layers from highest to lowest priority."""

    layers: list

    def select(self, valuation: dict) -> Optional[str]:
        for layer in self.layers:
            if valuation.get(layer.wants, False):
                return layer.action
        return None


def _layer_action(layer: Layer) -> Node:
    def run(ctx):
        if not ctx.blackboard.get(layer.wants, False):
            return FAILURE
        ctx.blackboard.setdefault(EXECUTED, []).append(layer.action)
        return RUNNING
    n = Action(layer.name, fn=run)
    n.data["action"] = layer.action
    return n


def subsumption_to_bt(stack: SubsumptionStack) -> Node:
    if not stack.layers:
        raise ValueError("empty subsumption stack")
    return Fallback(*[_layer_action(l) for l in stack.layers])


def overheat_stack() -> SubsumptionStack:
    return SubsumptionStack([
        Layer("StopIfOverheated", "overheated", "Stop"),
        Layer("RechargeIfNeeded", "battery_low", "Recharge"),
        Layer("DoOtherTasks", "has_tasks", "Do other"),
    ])


# -- teleo-reactive programs -----------------------------------------------------

@dataclass
class TRProgram:
    """Ordered (condition, action) rules; a ``None`` condition always holds."""

    rules: list

    def __post_init__(self):
        if not self.rules:
            raise ValueError("empty teleo-reactive program")
        self.rules = [tuple(r) for r in self.rules]

    def active(self, valuation: dict) -> Optional[int]:
        for i, (c, _) in enumerate(self.rules):
            if c is None or valuation.get(c, False):
                return i
        return None

    def select(self, valuation: dict) -> Optional[str]:
        i = self.active(valuation)
        return None if i is None else self.rules[i][1]

    def conditions(self) -> list:
        return [c for c, _ in self.rules if c is not None]


def tr_to_bt(tr: TRProgram) -> Node:
    options = [durative(a) if c is None else Sequence(predicate(c), durative(a)) for c, a in tr.rules]
    return options[0] if len(options) == 1 else Fallback(*options)


def goto_program() -> TRProgram:
    return TRProgram([("Equal(pos,loc)", "Idle"), ("HeadingTowards(loc)", "GoForwards"),
                      (None, "Rotate")])


def stronger_regression(tr: TRProgram, trajectories) -> list:
    """Violations of the stronger regression property on sampled runs.

    A trajectory is a list of valuations seen while the program runs.
    Whenever rule ``i`` is active, the next valuation must keep ``c_i``
    true or make some earlier condition true. Returns
    ``(run, step, rule)`` triples; an empty list means no violation.
    """
    bad = []
    for k, traj in enumerate(trajectories):
        for t in range(len(traj) - 1):
            i = tr.active(traj[t])
            if i is None or i == 0:
                continue
            c = tr.rules[i][0]
            nxt = traj[t + 1]
            j = tr.active(nxt)
            keeps = c is None or nxt.get(c, False)
            if not keeps and (j is None or j > i):
                bad.append((k, t, i))
    return bad


# -- finite state machines -------------------------------------------------------

@dataclass
class FSMSpec:
    states: list
    initial: str
    transitions: list
    actions: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = {}
        for s, e, t in self.transitions:
            if s not in self.states or t not in self.states:
                raise ValueError(f"transition {s} -{e}-> {t} uses an unknown state")
            if seen.get((s, e), t) != t:
                raise NondeterministicFSM(f"state {s} has two targets for event {e!r}")
            seen[(s, e)] = t
        if self.initial not in self.states:
            raise ValueError(f"unknown initial state {self.initial!r}")
        self._table = seen

    def action(self, state: str) -> str:
        return self.actions.get(state, state)

    def step(self, state: str, event) -> tuple:
        """Run the state's action, then follow the event (if any matches)."""
        return self.action(state), self._table.get((state, event), state)

    def run(self, events) -> list:
        state, out = self.initial, []
        for e in events:
            act, nxt = self.step(state, e)
            out.append((state, act, nxt))
            state = nxt
        return out


def _state_is(s: str) -> Node:
    return Condition(f"{STATE}=={s}", fn=lambda ctx: ctx.blackboard.get(STATE) == s)


def _event_is(e) -> Node:
    return Condition(f"{EVENT}=={e}", fn=lambda ctx: ctx.blackboard.get(EVENT) == e)


def _do(name: str) -> Node:
    def run(ctx):
        ctx.blackboard.setdefault(EXECUTED, []).append(name)
        return SUCCESS
    return Action(name, fn=run)


def _goto(s: str) -> Node:
    def run(ctx):
        ctx.blackboard[STATE] = s
        return RUNNING
    return Action(f"{STATE}:={s}", fn=run)


def fsm_to_bt(fsm: FSMSpec) -> Node:
    """One FSM step per tick, with the state held in the blackboard.

    Each state becomes ``Sequence(state==s, action_s, update)`` where the
    update picks the transition for the current event or stays put.
    """
    branches = []
    for s in fsm.states:
        out = [(e, t) for (src, e, t) in fsm.transitions if src == s]
        update = Fallback(*[Sequence(_event_is(e), _goto(t)) for e, t in out], _goto(s))
        branches.append(Sequence(_state_is(s), _do(fsm.action(s)), update))
    return Fallback(*branches)


def fsm_context(fsm: FSMSpec) -> ExecutionContext:
    ctx = ExecutionContext()
    ctx.blackboard[STATE] = fsm.initial
    return ctx


def fsm_bt_run(tree: Node, fsm: FSMSpec, events) -> list:
    """Tick ``tree`` once per event; mirrors ``FSMSpec.run``."""
    ctx = fsm_context(fsm)
    out = []
    for e in events:
        before = ctx.blackboard[STATE]
        ctx.blackboard[EVENT] = e
        ctx.blackboard[EXECUTED] = []
        tick(tree, ctx)
        ran = ctx.blackboard[EXECUTED]
        out.append((before, ran[-1] if ran else None, ctx.blackboard[STATE]))
    return out


def grab_and_throw_fsm() -> FSMSpec:
    states = ["SearchBall", "GraspBall", "ThrowBall", "Done"]
    transitions = [
        ("SearchBall", "found", "GraspBall"),
        ("GraspBall", "grasped", "ThrowBall"),
        ("GraspBall", "lost", "SearchBall"),
        ("ThrowBall", "thrown", "Done"),
        ("ThrowBall", "dropped", "SearchBall"),
    ]
    actions = {"SearchBall": "Search", "GraspBall": "Grasp", "ThrowBall": "Throw", "Done": "Idle"}
    return FSMSpec(states, "SearchBall", transitions, actions)


def toggle_fsm() -> FSMSpec:
    return FSMSpec(["A", "B"], "A", [("A", "tick", "B"), ("B", "tick", "A")], {"A": "DoA", "B": "DoB"})


# -- controller families ---------------------------------------------------------

Predicate = Callable[[np.ndarray], np.ndarray]


@dataclass
class Controller:
    name: str
    goal: Predicate
    domain: Predicate
    bt: object = None
    spec: object = None


@dataclass
class ControllerFamily:
    controllers: list
    goal: str

    def get(self, name: str) -> Controller:
        for c in self.controllers:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass
class Ordering:
    order: list
    leftover: list
    tree: Node
    family: ControllerFamily

    def composed(self):
        """Fallback composition of the ordered state-space BTs."""
        bts = [self.family.get(n).bt for n in self.order]
        if any(b is None for b in bts):
            raise ValueError("every ordered controller needs a state-space BT")
        return bts[0] if len(bts) == 1 else compose_fallback(*bts)


def burridge_order(family: ControllerFamily, domain: SampledDomain, strict: bool = True) -> Ordering:
    """Order controllers so each goal region lies in the region covered so far.

    Containment is checked on the sample points of ``domain``. Candidates
    are tried in declaration order at every step.
    """
    X = domain.points
    first = family.get(family.goal)
    order = [first.name]
    covered = np.asarray(first.domain(X), bool) | np.asarray(first.goal(X), bool)
    rest = [c for c in family.controllers if c.name != first.name]
    while rest:
        pick = None
        for c in rest:
            g = np.asarray(c.goal(X), bool)
            if not np.any(g & ~covered):
                pick = c
                break
        if pick is None:
            break
        order.append(pick.name)
        covered |= np.asarray(pick.domain(X), bool)
        rest.remove(pick)
    leaves = [Action(n) for n in order]
    tree = leaves[0] if len(leaves) == 1 else Fallback(*leaves)
    result = Ordering(order, [c.name for c in rest], tree, family)
    if rest and strict:
        raise NoProgress(f"no goal region of {result.leftover} fits in the covered region", result)
    return result


def humanoid_family() -> ControllerFamily:
    from .models import lie_to_sit, sit_to_stand, walk_home
    out = []
    for name, make in (("Walk", walk_home), ("SitToStand", sit_to_stand), ("LieToSit", lie_to_sit)):
        bt, spec = make()
        out.append(Controller(name, spec.s, spec.attraction, bt, spec))
    # declared in scrambled order so the ordering has work to do
    return ControllerFamily([out[2], out[0], out[1]], goal="Walk")


CONVERTERS = {"dt": dt_to_bt, "subsumption": subsumption_to_bt, "tr": tr_to_bt, "fsm": fsm_to_bt}
