"""Goal-directed planning and acting: grow a BT from goal conditions.

Conditions and actions are described over a finite symbolic world of
variables (``name(args) = value``). Failing conditions are replaced by
subtrees that achieve them, and the tree is executed reactively between
expansions. Absent boolean facts are false.
"""
from __future__ import annotations

import itertools
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import (FAILURE, RUNNING, SUCCESS, Action, Condition, ExecutionContext, Fallback,
                   FallbackMemory, Kind, Node, Sequence, tick)

log = logging.getLogger(__name__)


class PlannerError(Exception):
    pass


class CannotExpand(PlannerError):
    pass


class NoAchiever(CannotExpand):
    pass


class BudgetExhausted(PlannerError):
    pass


class NoValidGrounding(PlannerError):
    pass


def is_var(term) -> bool:
    return isinstance(term, str) and term.startswith("?")


# -- fluents ---------------------------------------------------------------------

_FLUENT_RE = re.compile(r"^\s*(!|not\s+)?\s*([^\s(=!]+)\s*(?:\(([^)]*)\))?\s*(?:=\s*(\S+))?\s*$")


@dataclass(frozen=True)
class Fluent:
    """``name(args) = value``; ``negated`` flips the test."""

    name: str
    args: tuple = ()
    value: Any = True
    negated: bool = False

    @classmethod
    def parse(cls, text: str) -> "Fluent":
        m = _FLUENT_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse fluent {text!r}")
        neg, name, args, value = m.groups()
        args = tuple(a.strip() for a in args.split(",") if a.strip()) if args else ()
        if value is None or value == "true":
            value = True
        elif value == "false":
            value = False
        return cls(name, args, value, bool(neg))

    @property
    def key(self) -> tuple:
        return (self.name, self.args)

    def terms(self) -> tuple:
        return self.args + (self.value,)

    def variables(self) -> set:
        return {t for t in self.terms() if is_var(t)}

    def is_ground(self) -> bool:
        return not self.variables()

    def substitute(self, env: dict) -> "Fluent":
        sub = lambda t: env.get(t, t) if is_var(t) else t
        return Fluent(self.name, tuple(sub(a) for a in self.args), sub(self.value), self.negated)

    def holds(self, world: "WorldState") -> bool:
        if not self.is_ground():
            return False
        return (world.get(self.name, self.args) == self.value) != self.negated

    def contradicts(self, effect: "Fluent") -> bool:
        """True when applying ``effect`` makes this (ground) condition false."""
        if effect.key != self.key or not effect.is_ground() or not self.is_ground():
            return False
        if effect.negated:
            if effect.value is not True:
                return False
            after = False
        else:
            after = effect.value
        return (after == self.value) == self.negated

    def __str__(self) -> str:
        s = self.name + (f"({','.join(map(str, self.args))})" if self.args else "")
        if self.value is not True:
            s += f"={self.value}"
        return ("!" if self.negated else "") + s


def _as_fluent(f) -> Fluent:
    return f if isinstance(f, Fluent) else Fluent.parse(f)


# -- world -----------------------------------------------------------------------

@dataclass
class Mutation:
    """External change applied between ticks. ``value=None`` deletes the fact."""

    name: str
    args: tuple = ()
    value: Any = True

    @classmethod
    def parse(cls, text: str) -> "Mutation":
        text = text.strip()
        if text.startswith("del "):
            f = Fluent.parse(text[4:])
            return cls(f.name, f.args, None)
        f = Fluent.parse(text)
        return cls(f.name, f.args, False if f.negated else f.value)

    def __str__(self) -> str:
        base = self.name + (f"({','.join(self.args)})" if self.args else "")
        return f"del {base}" if self.value is None else f"{base}={self.value}"


@dataclass
class WorldState:
    facts: dict = field(default_factory=dict)
    objects: list = field(default_factory=list)
    script: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @classmethod
    def from_fluents(cls, fluents, objects=(), script=None) -> "WorldState":
        w = cls(objects=list(objects), script=dict(script or {}))
        for f in fluents:
            f = _as_fluent(f)
            w.set(f.name, f.args, f.value)
        return w

    def get(self, name: str, args: tuple = ()):
        return self.facts.get((name, tuple(args)), False)

    def set(self, name: str, args: tuple, value) -> None:
        if value is False or value is None:
            self.facts.pop((name, tuple(args)), None)
        else:
            self.facts[(name, tuple(args))] = value

    def apply(self, effect: Fluent) -> None:
        if effect.negated:
            if self.get(effect.name, effect.args) == effect.value:
                self.set(effect.name, effect.args, None)
        else:
            self.set(effect.name, effect.args, effect.value)

    def mutate(self, m: Mutation, tick_index: int) -> None:
        self.set(m.name, m.args, m.value)
        self.log.append((tick_index, str(m)))

    def perturb(self, tick_index: int) -> list:
        done = []
        for m in self.script.get(tick_index, ()):
            m = m if isinstance(m, Mutation) else Mutation.parse(m)
            self.mutate(m, tick_index)
            done.append(str(m))
        return done

    def true_fluents(self) -> list:
        return [Fluent(n, a, v) for (n, a), v in self.facts.items()]

    def copy(self) -> "WorldState":
        return WorldState(dict(self.facts), list(self.objects), dict(self.script), list(self.log))


# -- templates -------------------------------------------------------------------

@dataclass
class ActionTemplate:
    """Descriptive model of an action.

    ``requires`` are world tests used only to pick bindings; they may
    introduce local variables that ``con`` refers to.
    """

    name: str
    params: tuple = ()
    con: tuple = ()
    eff: tuple = ()
    requires: tuple = ()
    duration: int = 1

    def __post_init__(self):
        self.params = tuple(p if is_var(p) else "?" + p for p in self.params)
        self.con = tuple(_as_fluent(f) for f in self.con)
        self.eff = tuple(_as_fluent(f) for f in self.eff)
        self.requires = tuple(_as_fluent(f) for f in self.requires)
        for f in self.eff:
            free = f.variables() - set(self.params)
            if free:
                raise ValueError(f"{self.name}: effect variables {sorted(free)} are not parameters")
        if self.duration < 1:
            raise ValueError("duration must be >= 1")

    def variables(self) -> list:
        out = list(self.params)
        for f in self.requires + self.con:
            for v in sorted(f.variables()):
                if v not in out:
                    out.append(v)
        return out

    def achieves(self, cond: Fluent) -> Optional[dict]:
        """Unifier of the first effect matching ``cond``, if any."""
        for e in self.eff:
            if e.name != cond.name or e.negated != cond.negated or len(e.args) != len(cond.args):
                continue
            theta = {}
            if all(_unify(a, b, theta) for a, b in zip(e.terms(), cond.terms())):
                return theta
        return None


def _unify(pattern, term, theta: dict) -> bool:
    if is_var(pattern):
        if pattern in theta:
            return theta[pattern] == term
        theta[pattern] = term
        return True
    if is_var(term):
        return False
    return pattern == term


# -- planned tree ----------------------------------------------------------------

@dataclass
class Instance:
    """A template placed in the tree; its variables map to tree terms."""

    serial: int
    template: ActionTemplate
    subst: dict
    owned: list

    def ground_args(self, env: dict) -> tuple:
        return tuple(_resolve(self.subst[p], env) for p in self.template.params)

    def fluents(self, which: str, env: dict) -> list:
        full = {v: _resolve(t, env) for v, t in self.subst.items()}
        return [f.substitute(full) for f in getattr(self.template, which)]

    def label(self, env: dict) -> str:
        args = self.ground_args(env)
        return self.template.name + (f"({','.join(map(str, args))})" if args else "")


def _resolve(term, env):
    return env.get(term, term) if is_var(term) else term


@dataclass
class PlannedTree:
    root: Node
    templates: list
    env: dict = field(default_factory=dict)
    expanded: list = field(default_factory=list)
    instances: dict = field(default_factory=dict)
    progress: dict = field(default_factory=dict)
    executed: list = field(default_factory=list)
    refinements: list = field(default_factory=list)
    world: Optional[WorldState] = None
    _serial: Any = field(default_factory=itertools.count)

    def conditions(self) -> list:
        return [n for n in self.root.walk() if n.kind == Kind.CONDITION and "fluent" in n.data]

    def actions(self) -> list:
        return [n for n in self.root.walk() if n.kind == Kind.ACTION and "instance" in n.data]

    def ground(self, fluent: Fluent) -> Fluent:
        return fluent.substitute(self.env)

    def replace(self, old: Node, new: Node) -> None:
        if old is self.root:
            self.root = new
            return
        parent = self.root.parent_of(old)
        parent.children[parent.children.index(old)] = new


def condition_node(pt: PlannedTree, fluent: Fluent) -> Node:
    def run(ctx):
        return pt.ground(fluent).holds(pt.world)

    n = Condition(str(fluent), fn=run)
    n.data["fluent"] = fluent
    return n


def action_node(pt: PlannedTree, inst: Instance) -> Node:
    def run(ctx):
        world, env = pt.world, pt.env
        tests = inst.fluents("requires", env) + inst.fluents("con", env)
        if not all(f.holds(world) for f in tests):
            pt.progress.pop(node.id, None)
            return FAILURE
        k = pt.progress.get(node.id, 0) + 1
        if k < inst.template.duration:
            pt.progress[node.id] = k
            return RUNNING
        pt.progress.pop(node.id, None)
        for e in inst.fluents("eff", env):
            world.apply(e)
        pt.executed.append(inst.label(env))
        return SUCCESS

    node = Action(inst.template.name, fn=run)
    node.data["instance"] = inst
    return node


def _instantiate(pt: PlannedTree, template: ActionTemplate, theta: dict) -> Instance:
    serial = next(pt._serial)
    subst, owned = {}, []
    for v in template.variables():
        if v in theta:
            subst[v] = theta[v]
        else:
            fresh = f"{v}#{serial}"
            subst[v] = fresh
            owned.append(fresh)
    inst = Instance(serial, template, subst, owned)
    pt.instances[serial] = inst
    return inst


def _option(pt: PlannedTree, template: ActionTemplate, theta: dict) -> Node:
    inst = _instantiate(pt, template, theta)
    pre = [condition_node(pt, f.substitute(inst.subst)) for f in template.con]
    act = action_node(pt, inst)
    seq = Sequence(*pre, act) if pre else act
    return seq


def achievers(cond: Fluent, templates) -> list:
    out = []
    for t in templates:
        theta = t.achieves(cond)
        if theta is not None:
            out.append((t, theta))
    return out


def expand_tree(pt: PlannedTree, cond_node: Node, templates=None) -> Node:
    """Replace ``cond_node`` by a subtree that can achieve it.

    One achiever gives ``Fallback(c, Sequence(con..., a))``; several are
    tried in declaration order under a memory Fallback:
    ``Fallback(c, Fallback*(option1, option2, ...))``.
    """
    templates = pt.templates if templates is None else templates
    fluent = cond_node.data["fluent"]
    found = achievers(fluent, templates)
    if not found:
        raise NoAchiever(f"no template achieves {pt.ground(fluent)}")
    options = [_option(pt, t, theta) for t, theta in found]
    body = options[0] if len(options) == 1 else FallbackMemory(*options)
    keep = condition_node(pt, fluent)
    subtree = Fallback(keep, body)
    subtree.data["ppa"] = str(fluent)
    pt.replace(cond_node, subtree)
    return subtree


def get_condition_to_expand(pt: PlannedTree, statuses: dict) -> Optional[Node]:
    """First failed, unexpanded condition in breadth-first order; marks it."""
    queue = deque([pt.root])
    while queue:
        node = queue.popleft()
        if node.kind == Kind.CONDITION and "fluent" in node.data:
            ground = pt.ground(node.data["fluent"])
            key = str(ground)
            # unground conditions belong to options that found no binding
            if statuses.get(node.id) is FAILURE and ground.is_ground() and key not in pt.expanded:
                pt.expanded.append(key)
                return node
        queue.extend(node.children)
    return None


# -- conflicts -------------------------------------------------------------------

@dataclass
class ConflictReport:
    conflict: bool
    pairs: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.conflict


def _path_to(root: Node, target: Node) -> list:
    path = []

    def find(n):
        path.append(n)
        if n is target:
            return True
        if any(find(c) for c in n.children):
            return True
        path.pop()
        return False

    find(root)
    return path


def earlier_actions(pt: PlannedTree, subtree: Node) -> list:
    """Actions that must have succeeded before ``subtree`` runs.

    These are the actions inside left siblings of every Sequence on the
    path from the root to ``subtree``.
    """
    path = _path_to(pt.root, subtree)
    out = []
    for parent, child in zip(path, path[1:]):
        if parent.kind in (Kind.SEQUENCE, Kind.SEQUENCE_MEMORY):
            for sib in parent.children[:parent.children.index(child)]:
                out.extend(n for n in sib.walk() if "instance" in n.data)
    return out


def detect_conflict(pt: PlannedTree, subtree: Node) -> ConflictReport:
    """Earlier effects that undo a precondition of an action in ``subtree``."""
    pairs = []
    mine = [n for n in subtree.walk() if "instance" in n.data]
    before = earlier_actions(pt, subtree)
    for a in mine:
        pre = a.data["instance"].fluents("con", pt.env)
        for b in before:
            for e in b.data["instance"].fluents("eff", pt.env):
                for c in pre:
                    if c.contradicts(e):
                        pairs.append((b.data["instance"].label(pt.env), str(e),
                                      a.data["instance"].label(pt.env), str(c)))
    return ConflictReport(bool(pairs), pairs)


def increase_priority(pt: PlannedTree, subtree: Node) -> bool:
    """Move ``subtree`` one step earlier in execution order.

    Inside a Sequence it swaps with its left sibling. When it is already
    leftmost it is lifted into the nearest enclosing Sequence, just left
    of the branch that contained it; the original condition stays behind
    so the displaced action keeps its guard. Returns False when there is
    nowhere left to go.
    """
    path = _path_to(pt.root, subtree)
    parent = path[-2] if len(path) > 1 else None
    if parent is not None and parent.kind == Kind.SEQUENCE:
        i = parent.children.index(subtree)
        if i > 0:
            parent.children[i - 1], parent.children[i] = parent.children[i], parent.children[i - 1]
            return True
    for depth in range(len(path) - 2, -1, -1):
        anc = path[depth]
        if anc.kind != Kind.SEQUENCE or anc is parent:
            continue
        branch = path[depth + 1]
        cond = subtree.children[0]
        stub = condition_node(pt, cond.data["fluent"])
        pt.replace(subtree, stub)
        anc.children.insert(anc.children.index(branch), subtree)
        return True
    log.warning("no position left of %s; priority unchanged", subtree.data.get("ppa"))
    return False


# -- refinement ------------------------------------------------------------------

def _matches(pattern: Fluent, world: WorldState, env: dict):
    """Yield extensions of ``env`` under which ``pattern`` holds in ``world``."""
    p = pattern.substitute(env)
    if p.is_ground():
        if p.holds(world):
            yield env
        return
    if p.negated:
        return
    for (name, args), value in world.facts.items():
        if name != p.name or len(args) != len(p.args):
            continue
        theta = dict(env)
        if all(_unify(a, b, theta) for a, b in zip(p.terms(), args + (value,))):
            yield theta


def _bindings(inst: Instance, world: WorldState, env: dict):
    reqs = [f.substitute(inst.subst) for f in inst.template.requires]

    def search(i, cur):
        if i == len(reqs):
            yield cur
            return
        for nxt in _matches(reqs[i], world, cur):
            yield from search(i + 1, nxt)

    for partial in search(0, dict(env)):
        free = [v for v in inst.owned if v not in partial]
        for combo in itertools.product(world.objects, repeat=len(free)):
            full = dict(partial, **dict(zip(free, combo)))
            if all(f.substitute(inst.subst).substitute(full).holds(world) for f in inst.template.requires):
                yield full


def refine_actions(pt: PlannedTree, world: Optional[WorldState] = None,
                   strict: bool = False) -> list:
    """Bind every action variable to a value valid in the current world.

    Bindings that still satisfy their ``requires`` tests are kept; the
    others are searched again in declaration order. An option with no
    valid binding stays unbound and its action fails when ticked, unless
    ``strict`` is set. Returns the list of changed bindings.
    """
    world = world or pt.world
    live = {n.data["instance"].serial for n in pt.actions()}
    changes = []
    for serial in sorted(live):
        inst = pt.instances[serial]
        if not inst.owned:
            continue
        reqs = inst.fluents("requires", pt.env)
        bound = all(v in pt.env for v in inst.owned)
        if bound and all(f.holds(world) for f in reqs):
            continue
        trial = {k: v for k, v in pt.env.items() if k not in inst.owned}
        found = next(_bindings(inst, world, trial), None)
        if found is None:
            if strict:
                raise NoValidGrounding(f"no valid binding for {inst.label(pt.env)}")
            for v in inst.owned:
                pt.env.pop(v, None)
            continue
        for v in inst.owned:
            if pt.env.get(v) != found[v]:
                changes.append((inst.label(found), v, found[v]))
            pt.env[v] = found[v]
    if changes:
        pt.refinements.append(changes)
    return changes


# -- offline backchaining --------------------------------------------------------

def backchain_ppa(condition, templates, depth: int) -> Node:
    """Build the implicit-sequence tree for ``condition`` without a world.

    Each level replaces the preconditions of the previous level with
    their own PPAs; every achiever is an option of a plain Fallback.
    """
    pt = PlannedTree(Node(Kind.CONDITION, name="_"), list(templates))
    cond = _as_fluent(condition)
    pt.root = condition_node(pt, cond)
    frontier = [pt.root]
    for _ in range(depth):
        nxt = []
        for c in frontier:
            found = achievers(c.data["fluent"], pt.templates)
            if not found:
                continue
            options = [_option(pt, t, theta) for t, theta in found]
            sub = Fallback(condition_node(pt, c.data["fluent"]), *options)
            pt.replace(c, sub)
            for o in options:
                nxt.extend(k for k in o.children if k.kind == Kind.CONDITION)
        frontier = nxt
    return pt.root


# -- main loop -------------------------------------------------------------------

@dataclass
class PlanResult:
    outcome: str
    tree: Node
    trace: list
    expansions: list
    executed: list
    refinements: list
    ticks: int
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"format_version": "1.0", "kind": "plan", "outcome": self.outcome,
                "expansions": self.expansions, "executed": self.executed,
                "refinements": [[list(map(str, c)) for c in r] for r in self.refinements],
                "ticks": self.ticks, "error": self.error, "tree": repr(self.tree)}


def initial_tree(pt: PlannedTree, goal) -> Node:
    conds = [condition_node(pt, _as_fluent(g)) for g in goal]
    return conds[0] if len(conds) == 1 else Sequence(*conds)


def pabt_run(goal, templates, world: WorldState, max_iterations: int = 100,
             max_ticks: int = 1000, safety: Optional[Node] = None,
             max_promotions: int = 50, strict: bool = False) -> PlanResult:
    """Plan and act until the goal holds or a budget runs out.

    ``world.script`` maps tick indices to mutations applied just before
    that tick. ``safety`` is an optional user tree placed in front of the
    mission as ``Sequence(safety, mission)``.
    """
    goal = list(goal)
    if not goal:
        raise ValueError("goal must be nonempty")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    pt = PlannedTree(Node(Kind.CONDITION, name="_"), list(templates), world=world)
    pt.root = initial_tree(pt, goal)
    ctx = ExecutionContext()
    ctx.on_halt = lambda leaf: pt.progress.pop(leaf.id, None)
    trace, expansions = [], []
    iterations = ticks = 0
    stale_refine = False

    def whole():
        return Sequence(safety, pt.root, id="__mission") if safety is not None else pt.root

    def finish(outcome, err=None):
        if strict and err is not None:
            raise err
        return PlanResult(outcome, whole(), trace, expansions, list(pt.executed),
                          list(pt.refinements), ticks, None if err is None else str(err))

    while True:
        try:
            changes = refine_actions(pt, world)
        except NoValidGrounding as e:
            return finish("no_grounding", e)
        if changes:
            trace.append({"event": "refine", "bindings": [list(map(str, c)) for c in changes]})
        status = RUNNING
        while status is not FAILURE:
            if ticks >= max_ticks:
                return finish("budget", BudgetExhausted(f"{max_ticks} ticks"))
            mutations = world.perturb(ticks)
            status = tick(whole(), ctx)
            # memory nodes forget their progress once their branch is left
            seen = {nid for nid, _ in ctx.ticked}
            for nid in [k for k in ctx.memory if k not in seen]:
                ctx.memory.pop(nid)
            leaves = [(n.name, str(s)) for n, s in _ticked_leaves(whole(), ctx)]
            trace.append({"event": "tick", "tick": ticks, "status": str(status),
                          "leaves": leaves, "mutations": mutations,
                          "executed": list(pt.executed)})
            ticks += 1
            if status is SUCCESS:
                return finish("success")
        iterations += 1
        if iterations > max_iterations:
            return finish("budget", BudgetExhausted(f"{max_iterations} iterations"))
        c = get_condition_to_expand(pt, ctx.statuses())
        if c is None:
            # an old refinement no longer works; drop unusable bindings and retry
            if stale_refine:
                return finish("cannot_expand", CannotExpand("no failed unexpanded condition"))
            stale_refine = True
            _drop_invalid(pt, world)
            continue
        stale_refine = False
        try:
            sub = expand_tree(pt, c)
        except NoAchiever as e:
            return finish("cannot_expand", e)
        expansions.append(str(pt.ground(c.data["fluent"])))
        trace.append({"event": "expand", "condition": expansions[-1], "iteration": iterations})
        promotions = 0
        refine_actions(pt, world)
        report = detect_conflict(pt, sub)
        while report:
            trace.append({"event": "conflict", "pairs": [list(p) for p in report.pairs]})
            if promotions >= max_promotions or not increase_priority(pt, sub):
                trace.append({"event": "unresolved_conflict"})
                break
            promotions += 1
            report = detect_conflict(pt, sub)


def _drop_invalid(pt: PlannedTree, world: WorldState) -> None:
    for inst in pt.instances.values():
        if inst.owned and not all(f.holds(world) for f in inst.fluents("requires", pt.env)):
            for v in inst.owned:
                pt.env.pop(v, None)


def _ticked_leaves(root: Node, ctx: ExecutionContext) -> list:
    st = ctx.statuses()
    return [(n, st[n.id]) for n in root.walk() if n.kind.is_leaf and n.id in st]


def ppa_shape_ok(root: Node) -> bool:
    """Every planned action sits right of its preconditions in its Sequence."""
    for parent in root.walk():
        for i, c in enumerate(parent.children):
            if "instance" not in c.data:
                continue
            inst = c.data["instance"]
            want = [f.substitute(inst.subst) for f in inst.template.con]
            if not want:
                continue
            if parent.kind != Kind.SEQUENCE:
                return False
            left = [k.children[0].data.get("fluent") if "ppa" in k.data else k.data.get("fluent")
                    for k in parent.children[:i]]
            # lifted subtrees may sit in between; the preconditions keep their order
            rest = iter(left)
            if not all(any(f == g for g in rest) for f in want):
                return False
    return True


# -- built-in domains ------------------------------------------------------------

GRAPH_EDGES = [("s5", "sg"), ("s3", "sg"), ("s4", "s5"), ("s1", "s3"),
               ("s0", "s1"), ("s2", "s4"), ("s0", "s2")]


def graph_domain(edges=GRAPH_EDGES, start: str = "s0", goal: str = "sg", duration: int = 2):
    """Undirected graph walk; returns (goal, templates, world)."""
    templates = []
    for u, v in edges:
        for a, b in ((u, v), (v, u)):
            templates.append(ActionTemplate(f"{a}->{b}", (), con=(Fluent("at", (), a),),
                                            eff=(Fluent("at", (), b),), duration=duration))
    world = WorldState.from_fluents([Fluent("at", (), start)])
    return [Fluent("at", (), goal)], templates, world


def cube_templates(duration: int = 2) -> list:
    return [
        ActionTemplate("MoveTo", ("p",), con=("free(?p)",), eff=("robot=?p",), duration=duration),
        ActionTemplate("Pick", ("i",), requires=("at(?i)=?l",),
                       con=("robot=?l", "hand=empty"), eff=("hand=?i",), duration=duration),
        ActionTemplate("Place", ("i", "p"), con=("hand=?i", "robot=?p"),
                       eff=("at(?i)=?p", "hand=empty"), requires=("hand=?i", "robot=?p"),
                       duration=duration),
        ActionTemplate("Remove", ("p",), requires=("blocks(?o,?p)", "at(?o)=?l"),
                       con=("robot=?l", "hand=empty"), eff=("free(?p)",), duration=duration),
    ]


def cube_domain(obstacle: bool = False, duration: int = 2):
    """Move the cube to the goal spot; optionally a sphere blocks the way.

    Freeing the hand means setting the held object down where the robot
    stands, which later forces a new binding for picking it up again.
    """
    facts = ["robot=start", "hand=empty", "at(cube)=p_c", "at(sphere)=p_s",
             "free(p_c)", "free(p_s)", "free(start)"]
    if obstacle:
        facts.append("blocks(sphere,p_g)")
    else:
        facts.append("free(p_g)")
    world = WorldState.from_fluents(facts, objects=["p_c", "p_g", "p_s", "start", "cube", "sphere"])
    return [Fluent.parse("at(cube)=p_g")], cube_templates(duration), world


def door_templates() -> list:
    return [
        ActionTemplate("GoInside", con=("DoorIsOpen",), eff=("IsInsideHouse",)),
        ActionTemplate("OpenDoor", con=("DoorIsUnlocked",), eff=("DoorIsOpen",)),
        ActionTemplate("BrakeDoorOpen", con=("HasCrowbar", "DoorIsWeak"), eff=("DoorIsOpen",)),
    ]


DOMAINS = {"graph": graph_domain, "cube": cube_domain}
