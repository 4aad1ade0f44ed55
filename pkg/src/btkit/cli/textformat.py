"""Brace-and-semicolon text format for trees and everything attached to them.

A document is a tree plus optional sections::

    meta { time_unit s; seed 7; }
    fallback id=root {
        condition BallFound;
        action FindBall;
    }
    profiles { FindBall stochastic p_s=0.8 mu=0.1 nu=0.2; BallFound condition p_s=0.5; }
    script { FindBall R R S; }
    models { Walk walk_home; domain humanoid 50; }
    domain { template MoveTo(p) { con free(?p); eff robot=?p; } init robot=start; goal robot=p; }

Source formalisms for the converters live in ``dt``, ``tr``,
``subsumption`` and ``fsm`` sections.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from ..core import (Custom, DecoratorPolicy, Invert, Kind, MaxNTries, MaxTSeconds, Node, validate)
from ..converters import DecisionTree, FSMSpec, Layer, SubsumptionStack, TRProgram
from ..planner import ActionTemplate, Fluent, Mutation, WorldState
from ..reliability.profiles import CONDITION_EPS, ActionProfile, InvalidProfile


class DocumentError(Exception):
    pass


class BTSyntaxError(DocumentError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col, self.reason = line, col, message


class UnresolvedReference(DocumentError):
    pass


class MissingSection(DocumentError):
    pass


@dataclass
class Token:
    kind: str  # word, str, punct, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r'\s+|#[^\n]*|"(?:[^"\\]|\\.)*"|[{}();=,]|[^\s{}();=,"#]+')


def tokenize(text: str) -> list:
    out, line, col, pos = [], 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise BTSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        s = m.group(0)
        if s[0] == '"':
            out.append(Token("str", bytes(s[1:-1], "utf-8").decode("unicode_escape"), line, col))
        elif s in "{}();=,":
            out.append(Token("punct", s, line, col))
        elif not s[0].isspace() and s[0] != "#":
            out.append(Token("word", s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


@dataclass
class Document:
    tree: Optional[Node] = None
    profiles: dict = field(default_factory=dict)
    script: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    model_options: dict = field(default_factory=dict)
    domain: Optional[dict] = None
    meta: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    @property
    def time_unit(self) -> str:
        return str(self.meta.get("time_unit", "s"))

    @property
    def seed(self) -> Optional[int]:
        s = self.meta.get("seed")
        return None if s is None else int(s)


NODE_WORDS = {"sequence": Kind.SEQUENCE, "fallback": Kind.FALLBACK, "sequence*": Kind.SEQUENCE_MEMORY,
              "fallback*": Kind.FALLBACK_MEMORY, "parallel": Kind.PARALLEL, "decorator": Kind.DECORATOR,
              "action": Kind.ACTION, "condition": Kind.CONDITION}
SECTIONS = ("meta", "profiles", "script", "models", "domain", "dt", "tr", "subsumption", "fsm", "tree")
STATUS_WORDS = {"S": "Success", "F": "Failure", "R": "Running",
                "Success": "Success", "Failure": "Failure", "Running": "Running"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise BTSyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text or t.kind not in ("punct", "word"):
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def word(self, what: str = "name") -> Token:
        t = self.next()
        if t.kind not in ("word", "str"):
            self.error(f"expected {what}, found {t.text or 'end of input'!r}", t)
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("punct", "word") and t.text == text

    def skip_semis(self):
        while self.at(";"):
            self.next()

    def statement(self) -> list:
        """Tokens up to the next ';' or '}' (the ';' is consumed)."""
        out = []
        while not self.at(";") and not self.at("}"):
            if self.peek().kind == "eof":
                self.error("unterminated statement")
            out.append(self.next())
        if self.at(";"):
            self.next()
        return out

    # document
    def document(self) -> Document:
        doc = Document()
        while self.peek().kind != "eof":
            self.skip_semis()
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "word" and t.text in SECTIONS and self.peek(1).text == "{":
                self.next()
                getattr(self, "section_" + t.text)(doc, t)
            elif t.kind == "word" and t.text in NODE_WORDS:
                if doc.tree is not None:
                    self.error("a document holds a single tree", t)
                doc.tree = self.node()
            else:
                self.error(f"unexpected {t.text!r}", t)
        check_references(doc)
        return doc

    def section_tree(self, doc, t):
        self.expect("{")
        self.skip_semis()
        if doc.tree is not None:
            self.error("a document holds a single tree", t)
        doc.tree = self.node()
        self.skip_semis()
        self.expect("}")

    def node(self) -> Node:
        t = self.word("node keyword")
        kind = NODE_WORDS.get(t.text)
        if kind is None:
            self.error(f"unknown node keyword {t.text!r}", t)
        m = policy = None
        if kind == Kind.PARALLEL:
            self.expect("(")
            mt = self.word("threshold")
            try:
                m = int(mt.text)
            except ValueError:
                self.error("parallel threshold must be an integer", mt)
            self.expect(")")
        if kind == Kind.DECORATOR:
            policy = self.policy()
        name = None
        if kind.is_leaf:
            name = self.word("behavior name").text
        nid = ""
        if self.at("id"):
            self.next()
            self.expect("=")
            nid = self.word("id").text
        node = Node(kind, [], name, m, policy, nid)
        node.data["_pos"] = (t.line, t.col)
        if kind.is_leaf:
            if self.at("{"):
                self.error("leaves take no children")
            if not self.at("}") and self.peek().kind != "eof":
                self.expect(";")
            return node
        self.expect("{")
        self.skip_semis()
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.error("missing '}'")
            node.children.append(self.node())
            self.skip_semis()
        self.expect("}")
        for v in validate(node):
            if v.node_id == node.id and v.rule in ("control-arity", "parallel-threshold",
                                                    "decorator-arity"):
                raise BTSyntaxError(v.message, t.line, t.col)
        return node

    def policy(self) -> DecoratorPolicy:
        self.expect("(")
        t = self.word("decorator policy")
        args = []
        while not self.at(")"):
            if self.at(","):
                self.next()
                continue
            args.append(self.word("decorator argument"))
        self.expect(")")
        try:
            if t.text == "invert" and not args:
                return Invert()
            if t.text == "max_n_tries" and len(args) == 1:
                return MaxNTries(int(args[0].text))
            if t.text == "max_t_seconds" and len(args) == 1:
                return MaxTSeconds(float(args[0].text))
            if t.text == "custom" and len(args) == 1:
                return Custom(args[0].text)
        except ValueError:
            self.error("bad decorator argument", args[0])
        self.error(f"unknown decorator policy {t.text!r}", t)

    def block(self, t):
        self.expect("{")
        stmts = []
        while True:
            self.skip_semis()
            if self.at("}"):
                self.next()
                return stmts
            if self.peek().kind == "eof":
                self.error("missing '}'", t)
            stmts.append(self.statement())

    def section_meta(self, doc, t):
        for st in self.block(t):
            key = st[0].text
            val = " ".join(x.text for x in st[1:])
            if key == "seed":
                try:
                    doc.meta[key] = int(val)
                except ValueError:
                    raise BTSyntaxError("seed must be an integer", st[0].line, st[0].col)
            else:
                doc.meta[key] = val

    def section_profiles(self, doc, t):
        for st in self.block(t):
            if len(st) < 2:
                raise BTSyntaxError("profile needs a leaf name and a kind", st[0].line, st[0].col)
            name, kind = st[0].text, st[1].text
            params = _keyvals(st[2:])
            try:
                doc.profiles[name] = make_profile(kind, params)
            except (InvalidProfile, TypeError, ValueError) as e:
                raise BTSyntaxError(f"profile {name}: {e}", st[0].line, st[0].col) from None

    def section_script(self, doc, t):
        for st in self.block(t):
            name = st[0].text
            seq = []
            for x in st[1:]:
                if x.text not in STATUS_WORDS:
                    raise BTSyntaxError(f"unknown status {x.text!r}", x.line, x.col)
                seq.append(STATUS_WORDS[x.text])
            if not seq:
                raise BTSyntaxError("empty script", st[0].line, st[0].col)
            doc.script[name] = seq

    def section_models(self, doc, t):
        for st in self.block(t):
            words = [x.text for x in st]
            if words[0] in ("domain", "check"):
                doc.model_options[words[0]] = words[1:]
            else:
                if len(words) != 2:
                    raise BTSyntaxError("model binding is 'leaf model'", st[0].line, st[0].col)
                doc.models[words[0]] = words[1]

    def section_domain(self, doc, t):
        self.expect("{")
        d = {"templates": [], "init": [], "objects": [], "goal": [], "script": {}}
        while True:
            self.skip_semis()
            if self.at("}"):
                self.next()
                break
            kw = self.word("domain statement")
            if kw.text == "template":
                d["templates"].append(self.template())
            elif kw.text == "at":
                k = self.word("tick index")
                try:
                    idx = int(k.text)
                except ValueError:
                    raise BTSyntaxError("tick index must be an integer", k.line, k.col) from None
                for st in self.block(k):
                    d["script"].setdefault(idx, []).append(_join(st))
            else:
                st = self.statement()
                if kw.text == "objects":
                    d["objects"].extend(x.text for x in st)
                elif kw.text in ("init", "goal"):
                    d[kw.text].append(_join(st))
                else:
                    raise BTSyntaxError(f"unknown domain statement {kw.text!r}", kw.line, kw.col)
        doc.domain = d

    def template(self) -> dict:
        name = self.word("template name")
        params = []
        if self.at("("):
            self.next()
            while not self.at(")"):
                if self.at(","):
                    self.next()
                    continue
                params.append(self.word("parameter").text)
            self.next()
        spec = {"name": name.text, "params": params, "con": [], "eff": [], "requires": [],
                "duration": 1}
        for st in self.block(name):
            key = st[0].text
            if key in ("con", "eff", "requires"):
                spec[key].append(_join(st[1:]))
            elif key == "duration":
                spec["duration"] = int(st[1].text)
            else:
                raise BTSyntaxError(f"unknown template field {key!r}", st[0].line, st[0].col)
        return spec

    def section_subsumption(self, doc, t):
        layers = []
        for st in self.block(t):
            kv = _pairs(st)
            if st[0].text != "layer" or "wants" not in kv or "action" not in kv:
                raise BTSyntaxError("expected 'layer NAME wants P action A'", st[0].line, st[0].col)
            layers.append(Layer(st[1].text, kv["wants"], kv["action"]))
        doc.sources["subsumption"] = SubsumptionStack(layers)

    def section_tr(self, doc, t):
        rules = []
        for st in self.block(t):
            words = [x.text for x in st]
            if words[0] != "rule" or "->" not in words:
                raise BTSyntaxError("expected 'rule COND -> ACTION'", st[0].line, st[0].col)
            k = words.index("->")
            cond = _join(st[1:k])
            rules.append((None if cond == "else" else cond, " ".join(words[k + 1:])))
        doc.sources["tr"] = TRProgram(rules)

    def section_fsm(self, doc, t):
        states, actions, trans, initial = [], {}, [], None
        for st in self.block(t):
            words = [x.text for x in st]
            if words[0] == "initial":
                initial = words[1]
            elif words[0] == "state":
                states.append(words[1])
                if len(words) >= 4 and words[2] == "action":
                    actions[words[1]] = words[3]
            elif words[0] == "transition" and len(words) == 4:
                trans.append((words[1], words[2], words[3]))
            else:
                raise BTSyntaxError(f"unknown fsm statement {words[0]!r}", st[0].line, st[0].col)
        doc.sources["fsm"] = FSMSpec(states, initial or (states[0] if states else ""), trans, actions)

    def section_dt(self, doc, t):
        self.expect("{")
        self.skip_semis()
        doc.sources["dt"] = self.dt_node()
        self.skip_semis()
        self.expect("}")

    def dt_node(self) -> DecisionTree:
        t = self.word("decision")
        if t.text == "if":
            pred = self.word("predicate").text
            self.expect("{")
            self.skip_semis()
            yes = self.dt_node()
            self.skip_semis()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            self.skip_semis()
            no = self.dt_node()
            self.skip_semis()
            self.expect("}")
            return DecisionTree(pred, yes, no)
        if t.text == "do":
            return DecisionTree(action=self.word("action").text)
        self.error("expected 'if' or 'do'", t)


def _join(tokens) -> str:
    return "".join(x.text if x.kind != "str" else x.text for x in tokens)


def _pairs(st) -> dict:
    words = [x.text for x in st]
    return {words[i]: words[i + 1] for i in range(len(words) - 1)}


def _keyvals(tokens) -> dict:
    out, i = {}, 0
    while i < len(tokens):
        k = tokens[i]
        if i + 2 < len(tokens) + 1 and i + 1 < len(tokens) and tokens[i + 1].text == "=":
            if i + 2 >= len(tokens):
                raise BTSyntaxError(f"missing value for {k.text}", k.line, k.col)
            out[k.text] = tokens[i + 2].text
            i += 3
        else:
            raise BTSyntaxError(f"expected key=value, found {k.text!r}", k.line, k.col)
    return out


def _num(x: str) -> float:
    return math.inf if x in ("inf", "infinity") else float(x)


def make_profile(kind: str, p: dict) -> ActionProfile:
    f = {k: _num(v) for k, v in p.items()}
    if kind == "stochastic":
        return ActionProfile.stochastic(f["p_s"], f["mu"], f["nu"])
    if kind == "deterministic":
        return ActionProfile.deterministic(f["p_s"], f["tau_s"], f["tau_f"])
    if kind == "hybrid_det_success":
        return ActionProfile.hybrid_det_success(f["p_s"], f["tau_s"], f["nu"])
    if kind == "hybrid_det_failure":
        return ActionProfile.hybrid_det_failure(f["p_s"], f["mu"], f["tau_f"])
    if kind == "condition":
        return ActionProfile.condition(f["p_s"], **({"eps": f["eps"]} if "eps" in f else {}))
    raise InvalidProfile(f"unknown profile kind {kind!r}")


def check_references(doc: Document) -> None:
    names = {n.name for n in doc.tree.leaves()} if doc.tree is not None else set()
    bound = {}
    for section in ("profiles", "script", "models"):
        for name in getattr(doc, section):
            if doc.tree is None or name not in names:
                raise UnresolvedReference(f"{section} entry {name!r} names no leaf of the tree")
            if name in bound:
                raise UnresolvedReference(f"leaf {name!r} bound in both {bound[name]} and {section}")
            bound[name] = section


def parse(text: str) -> Document:
    return Parser(text).document()


# -- serialization ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def serialize_node(node: Node, indent: int = 0) -> str:
    pad = "    " * indent
    head = node.kind.value
    if node.kind == Kind.PARALLEL:
        head = f"parallel({node.m})"
    elif node.kind == Kind.DECORATOR:
        p = node.policy
        arg = {"invert": "", "max_n_tries": f" {p.n}", "max_t_seconds": f" {_fmt(p.t)}",
               "custom": f" {p.name}"}[p.kind]
        head = f"decorator({p.kind}{arg})"
    if node.kind.is_leaf:
        head += f" {node.name}"
    if node.id and not node.id.startswith("_"):
        head += f" id={node.id}"
    if node.kind.is_leaf:
        return f"{pad}{head};\n"
    body = "".join(serialize_node(c, indent + 1) for c in node.children)
    return f"{pad}{head} {{\n{body}{pad}}}\n"


def serialize_profile(p: ActionProfile) -> str:
    if p.is_condition:
        if p.mu == 1 / CONDITION_EPS:
            return f"condition p_s={_fmt(p.p_s)}"
        return f"condition p_s={_fmt(p.p_s)} eps={_fmt(1 / p.mu)}"
    if p.kind == "stochastic":
        return f"stochastic p_s={_fmt(p.p_s)} mu={_fmt(p.mu)} nu={_fmt(p.nu)}"
    if p.kind == "deterministic":
        return f"deterministic p_s={_fmt(p.p_s)} tau_s={_fmt(p.tau_s)} tau_f={_fmt(p.tau_f)}"
    if p.kind == "hybrid_det_success":
        return f"hybrid_det_success p_s={_fmt(p.p_s)} tau_s={_fmt(p.tau_s)} nu={_fmt(p.nu)}"
    return f"hybrid_det_failure p_s={_fmt(p.p_s)} mu={_fmt(p.mu)} tau_f={_fmt(p.tau_f)}"


def _dt_text(dt: DecisionTree, indent: int) -> str:
    pad = "    " * indent
    if dt.is_leaf:
        return f"{pad}do {dt.action};\n"
    return (f"{pad}if {dt.predicate} {{\n{_dt_text(dt.yes, indent + 1)}{pad}}} else {{\n"
            f"{_dt_text(dt.no, indent + 1)}{pad}}}\n")


def serialize(doc: Document) -> str:
    parts = []
    if doc.meta:
        body = "".join(f"    {k} {v};\n" for k, v in doc.meta.items())
        parts.append(f"meta {{\n{body}}}\n")
    if doc.tree is not None:
        parts.append(serialize_node(doc.tree))
    if doc.profiles:
        body = "".join(f"    {n} {serialize_profile(p)};\n" for n, p in doc.profiles.items())
        parts.append(f"profiles {{\n{body}}}\n")
    if doc.script:
        inv = {"Success": "S", "Failure": "F", "Running": "R"}
        body = "".join(f"    {n} {' '.join(inv[s] for s in seq)};\n" for n, seq in doc.script.items())
        parts.append(f"script {{\n{body}}}\n")
    if doc.models or doc.model_options:
        body = "".join(f"    {n} {m};\n" for n, m in doc.models.items())
        body += "".join(f"    {k} {' '.join(v)};\n" for k, v in doc.model_options.items())
        parts.append(f"models {{\n{body}}}\n")
    if doc.domain is not None:
        d = doc.domain
        lines = []
        for t in d["templates"]:
            params = f"({','.join(t['params'])})" if t["params"] else ""
            fields = [f"{k} {f};" for k in ("requires", "con", "eff") for f in t[k]]
            if t["duration"] != 1:
                fields.append(f"duration {t['duration']};")
            lines.append(f"    template {t['name']}{params} {{ {' '.join(fields)} }}")
        if d["objects"]:
            lines.append(f"    objects {' '.join(d['objects'])};")
        lines += [f"    init {f};" for f in d["init"]]
        lines += [f"    goal {f};" for f in d["goal"]]
        for k in sorted(d["script"]):
            lines.append(f"    at {k} {{ {' '.join(m + ';' for m in d['script'][k])} }}")
        parts.append("domain {\n" + "\n".join(lines) + "\n}\n")
    src = doc.sources
    if "subsumption" in src:
        body = "".join(f"    layer {l.name} wants {l.wants} action {l.action};\n"
                       for l in src["subsumption"].layers)
        parts.append(f"subsumption {{\n{body}}}\n")
    if "tr" in src:
        body = "".join(f"    rule {'else' if c is None else c} -> {a};\n" for c, a in src["tr"].rules)
        parts.append(f"tr {{\n{body}}}\n")
    if "fsm" in src:
        f = src["fsm"]
        body = f"    initial {f.initial};\n"
        body += "".join(f"    state {s} action {f.action(s)};\n" for s in f.states)
        body += "".join(f"    transition {s} {e} {t};\n" for s, e, t in f.transitions)
        parts.append(f"fsm {{\n{body}}}\n")
    if "dt" in src:
        parts.append(f"dt {{\n{_dt_text(src['dt'], 1)}}}\n")
    return "\n".join(parts)


# -- structural comparison -------------------------------------------------------

def same_tree(a: Optional[Node], b: Optional[Node]) -> bool:
    if a is None or b is None:
        return a is b
    explicit = lambda n: n.id if not n.id.startswith("_") else None
    if (a.kind, a.name, a.m, a.policy, explicit(a)) != (b.kind, b.name, b.m, b.policy, explicit(b)):
        return False
    return len(a.children) == len(b.children) and all(
        same_tree(x, y) for x, y in zip(a.children, b.children))


def same_document(a: Document, b: Document) -> bool:
    return (same_tree(a.tree, b.tree) and a.profiles == b.profiles and a.script == b.script
            and a.models == b.models and a.model_options == b.model_options
            and a.domain == b.domain and {k: str(v) for k, v in a.meta.items()}
            == {k: str(v) for k, v in b.meta.items()}
            and serialize(Document(sources=a.sources)) == serialize(Document(sources=b.sources)))


# -- domain helpers --------------------------------------------------------------

def planner_inputs(doc: Document):
    """(goal, templates, world) from the ``domain`` section."""
    d = doc.domain
    if d is None:
        raise MissingSection("document has no domain section")
    if not d["goal"]:
        raise MissingSection("domain section has no goal")
    templates = [ActionTemplate(t["name"], tuple(t["params"]), tuple(t["con"]), tuple(t["eff"]),
                                tuple(t["requires"]), t["duration"]) for t in d["templates"]]
    script = {k: [Mutation.parse(m) for m in v] for k, v in d["script"].items()}
    world = WorldState.from_fluents(d["init"], d["objects"], script)
    return [Fluent.parse(g) for g in d["goal"]], templates, world
