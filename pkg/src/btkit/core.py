"""Behavior tree data model and tick engine."""
from __future__ import annotations

import enum
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union


class Status(enum.Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    RUNNING = "Running"

    @property
    def code(self) -> int:
        return _STATUS_CODE[self]

    @classmethod
    def from_code(cls, code: int) -> "Status":
        return _CODE_STATUS[int(code)]

    def __str__(self) -> str:
        return self.value


_STATUS_CODE = {Status.SUCCESS: 1, Status.FAILURE: -1, Status.RUNNING: 0}
_CODE_STATUS = {v: k for k, v in _STATUS_CODE.items()}

SUCCESS, FAILURE, RUNNING = Status.SUCCESS, Status.FAILURE, Status.RUNNING


class Kind(enum.Enum):
    SEQUENCE = "sequence"
    FALLBACK = "fallback"
    PARALLEL = "parallel"
    SEQUENCE_MEMORY = "sequence*"
    FALLBACK_MEMORY = "fallback*"
    DECORATOR = "decorator"
    ACTION = "action"
    CONDITION = "condition"

    @property
    def is_leaf(self) -> bool:
        return self in (Kind.ACTION, Kind.CONDITION)

    @property
    def is_memory(self) -> bool:
        return self in (Kind.SEQUENCE_MEMORY, Kind.FALLBACK_MEMORY)


CONTROL_KINDS = (Kind.SEQUENCE, Kind.FALLBACK, Kind.PARALLEL,
                 Kind.SEQUENCE_MEMORY, Kind.FALLBACK_MEMORY)


class BTError(Exception):
    pass


class UnknownLeafId(BTError, KeyError):
    pass


class MalformedTree(BTError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConditionRunning(BTError):
    """A condition driver answered Running."""


@dataclass(frozen=True)
class DecoratorPolicy:
    kind: str
    n: Optional[int] = None
    t: Optional[float] = None
    name: Optional[str] = None

    def __str__(self) -> str:
        if self.kind == "invert":
            return "invert"
        if self.kind == "max_n_tries":
            return f"max_n_tries({self.n})"
        if self.kind == "max_t_seconds":
            return f"max_t_seconds({self.t:g})"
        return f"custom({self.name})"


def Invert() -> DecoratorPolicy:
    return DecoratorPolicy("invert")


def MaxNTries(n: int) -> DecoratorPolicy:
    return DecoratorPolicy("max_n_tries", n=int(n))


def MaxTSeconds(t: float) -> DecoratorPolicy:
    return DecoratorPolicy("max_t_seconds", t=float(t))


def Custom(name: str) -> DecoratorPolicy:
    return DecoratorPolicy("custom", name=name)


_ids = itertools.count()


def _fresh_id() -> str:
    return f"_{next(_ids)}"


Driver = Callable[["ExecutionContext"], Union[Status, bool]]


@dataclass(eq=False)
class Node:
    kind: Kind
    children: list = field(default_factory=list)
    name: Optional[str] = None
    m: Optional[int] = None
    policy: Optional[DecoratorPolicy] = None
    id: str = ""
    fn: Optional[Driver] = None
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            self.id = _fresh_id()
        self.children = list(self.children)

    def walk(self) -> Iterator["Node"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list:
        return [n for n in self.walk() if n.kind.is_leaf]

    def find(self, node_id: str) -> Optional["Node"]:
        for n in self.walk():
            if n.id == node_id:
                return n
        return None

    def parent_of(self, target: "Node") -> Optional["Node"]:
        for n in self.walk():
            for c in n.children:
                if c is target:
                    return n
        return None

    def clone(self) -> "Node":
        """Deep copy that keeps ids, names and annotations."""
        return Node(self.kind, [c.clone() for c in self.children], self.name,
                    self.m, self.policy, self.id, self.fn, dict(self.data))

    def label(self) -> str:
        if self.kind.is_leaf:
            return f"{self.kind.value} {self.name}"
        if self.kind == Kind.PARALLEL:
            return f"parallel({self.m})"
        if self.kind == Kind.DECORATOR:
            return f"decorator({self.policy})"
        return self.kind.value

    def __repr__(self) -> str:
        if self.kind.is_leaf:
            return f"{self.kind.name.title()}({self.name!r})"
        inner = ", ".join(repr(c) for c in self.children)
        if self.kind == Kind.PARALLEL:
            return f"Parallel({self.m}, {inner})"
        if self.kind == Kind.DECORATOR:
            return f"Decorator({self.policy}, {inner})"
        return f"{self.kind.name.title().replace('_', '')}({inner})"


def Sequence(*children: Node, id: str = "") -> Node:
    return Node(Kind.SEQUENCE, list(children), id=id)


def Fallback(*children: Node, id: str = "") -> Node:
    return Node(Kind.FALLBACK, list(children), id=id)


def Parallel(m: int, *children: Node, id: str = "") -> Node:
    return Node(Kind.PARALLEL, list(children), m=m, id=id)


def SequenceMemory(*children: Node, id: str = "") -> Node:
    return Node(Kind.SEQUENCE_MEMORY, list(children), id=id)


def FallbackMemory(*children: Node, id: str = "") -> Node:
    return Node(Kind.FALLBACK_MEMORY, list(children), id=id)


def Decorator(policy: DecoratorPolicy, child: Node, id: str = "") -> Node:
    return Node(Kind.DECORATOR, [child], policy=policy, id=id)


def Action(name: str, fn: Optional[Driver] = None, id: str = "") -> Node:
    return Node(Kind.ACTION, name=name, fn=fn, id=id)


def Condition(name: str, fn: Optional[Driver] = None, id: str = "") -> Node:
    return Node(Kind.CONDITION, name=name, fn=fn, id=id)


@dataclass
class Violation:
    node_id: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.node_id}: {self.rule}: {self.message}"


def validate(tree: Node) -> list:
    """Return the structural violations of ``tree`` (empty when well formed)."""
    out = []
    seen_objs = set()
    seen_ids = {}

    def visit(node, path):
        if id(node) in path:
            out.append(Violation(node.id, "cycle", "node is its own ancestor"))
            return
        if id(node) in seen_objs:
            out.append(Violation(node.id, "shared-node", "node has more than one parent"))
            return
        seen_objs.add(id(node))
        if node.id in seen_ids:
            out.append(Violation(node.id, "duplicate-id", "id used by more than one node"))
        seen_ids[node.id] = node
        n = len(node.children)
        if node.kind.is_leaf:
            if n:
                out.append(Violation(node.id, "leaf-arity", f"{node.kind.value} has {n} children"))
            if not node.name:
                out.append(Violation(node.id, "leaf-name", "leaf has no behavior id"))
        elif node.kind == Kind.DECORATOR:
            if n != 1:
                out.append(Violation(node.id, "decorator-arity", f"decorator has {n} children"))
            p = node.policy
            if p is None:
                out.append(Violation(node.id, "decorator-policy", "missing policy"))
            elif p.kind == "max_n_tries" and (p.n is None or p.n < 1):
                out.append(Violation(node.id, "decorator-policy", "MaxNTries needs N >= 1"))
            elif p.kind == "max_t_seconds" and (p.t is None or p.t < 0):
                out.append(Violation(node.id, "decorator-policy", "MaxTSeconds needs T >= 0"))
        else:
            if n < 1:
                out.append(Violation(node.id, "control-arity", f"{node.kind.value} has no children"))
            if node.kind == Kind.PARALLEL and (node.m is None or not 1 <= node.m <= max(n, 1)):
                out.append(Violation(node.id, "parallel-threshold",
                                     f"M={node.m} not in [1, {n}]"))
        path = path | {id(node)}
        for c in node.children:
            visit(c, path)

    visit(tree, frozenset())
    return out


@dataclass
class ExecutionContext:
    drivers: dict = field(default_factory=dict)
    blackboard: dict = field(default_factory=dict)
    halt_hooks: dict = field(default_factory=dict)
    decorator_rules: dict = field(default_factory=dict)
    clock: Callable[[], float] = time.monotonic
    resolver: Optional[Callable[[Node], Optional[Driver]]] = None
    on_halt: Optional[Callable[[Node], None]] = None
    tick_count: int = 0
    memory: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    running: dict = field(default_factory=dict)
    ticked: list = field(default_factory=list)
    halted: list = field(default_factory=list)

    def statuses(self) -> dict:
        """Status returned by each node ticked during the last tick."""
        return dict(self.ticked)


def _driver_for(node: Node, ctx: ExecutionContext) -> Driver:
    d = ctx.drivers.get(node.name)
    if d is None:
        d = node.fn
    if d is None and ctx.resolver is not None:
        d = ctx.resolver(node)
    if d is None:
        raise UnknownLeafId(node.name)
    return d


def _as_status(value) -> Status:
    if isinstance(value, Status):
        return value
    if isinstance(value, bool):
        return SUCCESS if value else FAILURE
    raise TypeError(f"driver returned {value!r}, expected Status")


def tick(tree: Node, ctx: ExecutionContext) -> Status:
    """Tick ``tree`` once from the root and return its status."""
    problems = validate(tree)
    if problems:
        raise MalformedTree(problems)
    ctx.tick_count += 1
    ctx.ticked = []
    ctx.halted = []
    previous = ctx.running
    ctx.running = {}
    status = _tick(tree, ctx)
    ticked_ids = {nid for nid, _ in ctx.ticked}
    for nid, leaf in previous.items():
        if nid not in ticked_ids:
            _halt(leaf, ctx)
    return status


def _halt(leaf: Node, ctx: ExecutionContext) -> None:
    ctx.halted.append(leaf.id)
    hook = ctx.halt_hooks.get(leaf.name)
    if hook is not None:
        hook(ctx)
    if ctx.on_halt is not None:
        ctx.on_halt(leaf)


def _tick(node: Node, ctx: ExecutionContext) -> Status:
    kind = node.kind
    if kind == Kind.SEQUENCE:
        status = SUCCESS
        for c in node.children:
            status = _tick(c, ctx)
            if status is not SUCCESS:
                break
    elif kind == Kind.FALLBACK:
        status = FAILURE
        for c in node.children:
            status = _tick(c, ctx)
            if status is not FAILURE:
                break
    elif kind == Kind.PARALLEL:
        results = [_tick(c, ctx) for c in node.children]
        n_s = sum(r is SUCCESS for r in results)
        n_f = sum(r is FAILURE for r in results)
        if n_s >= node.m:
            status = SUCCESS
        elif n_f > len(results) - node.m:
            status = FAILURE
        else:
            status = RUNNING
    elif kind.is_memory:
        status = _tick_memory(node, ctx)
    elif kind == Kind.DECORATOR:
        status = _tick_decorator(node, ctx)
    else:
        status = _as_status(_driver_for(node, ctx)(ctx))
        if kind == Kind.CONDITION and status is RUNNING:
            raise ConditionRunning(node.name)
        if status is RUNNING:
            ctx.running[node.id] = node
    ctx.ticked.append((node.id, status))
    return status


def _tick_memory(node: Node, ctx: ExecutionContext) -> Status:
    mem = ctx.memory.setdefault(node.id, {})
    # Sequence* keeps going on Success, Fallback* on Failure.
    go_on = SUCCESS if node.kind == Kind.SEQUENCE_MEMORY else FAILURE
    status = go_on
    for i, c in enumerate(node.children):
        if i in mem:
            status = mem[i]
        else:
            status = _tick(c, ctx)
            if status is not RUNNING:
                mem[i] = status
        if status is not go_on:
            break
    if status is not RUNNING:
        ctx.memory.pop(node.id, None)
    return status


def tick_memory(node: Node, ctx: ExecutionContext) -> Status:
    """Tick a memory node as the root of a tick."""
    if not node.kind.is_memory:
        raise BTError(f"{node.id} is not a memory node")
    return tick(node, ctx)


def _tick_decorator(node: Node, ctx: ExecutionContext) -> Status:
    p = node.policy
    child = node.children[0]
    if p.kind == "invert":
        s = _tick(child, ctx)
        return {SUCCESS: FAILURE, FAILURE: SUCCESS, RUNNING: RUNNING}[s]
    if p.kind == "max_n_tries":
        fails = ctx.counters.get(node.id, 0)
        if fails >= p.n:
            return FAILURE
        s = _tick(child, ctx)
        if s is FAILURE:
            ctx.counters[node.id] = fails + 1
        elif s is SUCCESS:
            ctx.counters[node.id] = 0
        return s
    if p.kind == "max_t_seconds":
        now = ctx.clock()
        start, last = ctx.counters.get(node.id, (None, None))
        if start is None or last != ctx.tick_count - 1:
            start = now
        if now - start > p.t:
            ctx.counters.pop(node.id, None)
            return FAILURE
        s = _tick(child, ctx)
        if s is RUNNING:
            ctx.counters[node.id] = (start, ctx.tick_count)
        else:
            ctx.counters.pop(node.id, None)
        return s
    rule = ctx.decorator_rules.get(p.name)
    if rule is None:
        raise UnknownLeafId(f"decorator rule {p.name}")
    state = ctx.counters.setdefault(node.id, {})
    return _as_status(rule(lambda: _tick(child, ctx), ctx, state))


def reset(tree: Node, ctx: ExecutionContext) -> None:
    """Clear memories and decorator state below ``tree`` and halt its running leaves."""
    for node in tree.walk():
        ctx.memory.pop(node.id, None)
        ctx.counters.pop(node.id, None)
        for key in node.data.get("bb_keys", ()):
            ctx.blackboard.pop(key, None)
        if node.id in ctx.running:
            _halt(ctx.running.pop(node.id), ctx)


# -- memory emulation ------------------------------------------------------

def _flag_condition(name: str, key: str, want: bool) -> Node:
    n = Condition(name, fn=lambda ctx: bool(ctx.blackboard.get(key, False)) is want)
    n.data["bb_keys"] = [key]
    return n


def _flag_action(name: str, set_key: Optional[str], clear_keys: list, result: Status) -> Node:
    def run(ctx):
        for k in clear_keys:
            ctx.blackboard.pop(k, None)
        if set_key is not None:
            ctx.blackboard[set_key] = True
        return result

    n = Action(name, fn=run)
    n.data["bb_keys"] = list(clear_keys) + ([set_key] if set_key else [])
    n.data["aux"] = True
    return n


def strip_memory(tree: Node) -> Node:
    """Copy of ``tree`` with every memory node replaced by its emulation."""
    if tree.kind.is_memory:
        return emulate_memory(tree)
    out = Node(tree.kind, [strip_memory(c) for c in tree.children], tree.name,
               tree.m, tree.policy, tree.id, tree.fn, dict(tree.data))
    return out


def emulate_memory(node: Node) -> Node:
    """Build a memory-free tree whose tick trace matches the memory node.

    Remembered outcomes live in blackboard flags written by auxiliary
    actions, and every flag is cleared when the emulated node resolves.
    """
    if not node.kind.is_memory:
        raise BTError(f"{node.id} is not a memory node")
    kids = [strip_memory(c) for c in node.children]
    pre = f"{node.id}.mem"
    keys = [f"__{pre}{i}" for i in range(len(kids))]
    seq = node.kind == Kind.SEQUENCE_MEMORY
    if len(kids) == 1:
        if seq:
            return Fallback(_flag_condition(f"{pre}0.done", keys[0], True), kids[0])
        return Sequence(_flag_condition(f"{pre}0.open", keys[0], False), kids[0])
    items = []
    for i, c in enumerate(kids):
        if seq:
            items.append(Fallback(
                _flag_condition(f"{pre}{i}.done", keys[i], True),
                Sequence(c, _flag_action(f"{pre}{i}.mark", keys[i], [], SUCCESS)),
                _flag_action(f"{pre}{i}.abort", None, keys, FAILURE)))
        else:
            items.append(Sequence(
                _flag_condition(f"{pre}{i}.open", keys[i], False),
                Fallback(Sequence(c, _flag_action(f"{pre}{i}.finish", None, keys, SUCCESS)),
                         _flag_action(f"{pre}{i}.mark", keys[i], [], FAILURE))))
    if seq:
        return Sequence(*items, _flag_action(f"{pre}.finish", None, keys, SUCCESS))
    return Fallback(*items, _flag_action(f"{pre}.abort", None, keys, FAILURE))
