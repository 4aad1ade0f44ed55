"""``bt`` command line entry point.

Exit codes: 0 success, 1 root/plan failure, 2 budget exhausted,
3 bad input or analysis error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .. import converters, planner
from ..core import FAILURE, RUNNING, SUCCESS, BTError, ExecutionContext, Kind, Node, Status, tick
from ..reliability import analyze as reliability_analyze
from ..reliability import monte_carlo, static_success_probability
from ..reliability.analysis import FORMAT_VERSION, leaf_profile
from .dot import export_dot
from .textformat import (Document, DocumentError, MissingSection, UnresolvedReference, parse,
                         planner_inputs, serialize)

EXIT_OK, EXIT_FAIL, EXIT_BUDGET, EXIT_ERROR = 0, 1, 2, 3

EPILOG = """exit codes:
  0  root returned Success (run) / goal reached (plan) / command succeeded
  1  root returned Failure (run) / planning failed
  2  tick or iteration budget exhausted
  3  invalid input or analysis error (details on stderr)

The default seed comes from the BT_SEED environment variable, then the
document's meta section, then 0."""


def _seed(args, doc: Document) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BT_SEED")
    if env:
        return int(env)
    return doc.seed if doc.seed is not None else 0


def parse_grid(text, horizon):
    if text:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        return [float(x) for x in text.split(",")]
    if horizon is not None:
        return [float(x) for x in np.linspace(0.0, horizon, 101)]
    return []


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, default=_clean) + "\n")


# -- run -------------------------------------------------------------------------

class LeafSimulator:
    """Drivers for scripted and profiled leaves, one tick = ``dt`` time units."""

    def __init__(self, doc: Document, seed: int, dt: float = 1.0):
        self.doc = doc
        self.rng = np.random.default_rng(seed)
        self.dt = dt
        self.calls = {}
        self.episodes = {}

    def resolver(self, node: Node):
        name = node.name
        if name in self.doc.script:
            return lambda ctx: self._scripted(node)
        if name in self.doc.profiles:
            return lambda ctx: self._profiled(node)
        raise UnresolvedReference(f"leaf {name!r} has neither a script nor a profile")

    def _scripted(self, node):
        seq = self.doc.script[node.name]
        k = self.calls.get(node.id, 0)
        self.calls[node.id] = k + 1
        return Status(seq[min(k, len(seq) - 1)])

    def _profiled(self, node):
        p = leaf_profile(node, self.doc.profiles)
        if node.kind == Kind.CONDITION:
            return SUCCESS if self.rng.random() < p.p_s else FAILURE
        ep = self.episodes.get(node.id)
        if ep is None:
            ok = self.rng.random() < p.p_s
            if ok:
                d = p.tau_s if p.tau_s is not None else self.rng.exponential(1 / p.mu)
            else:
                d = p.tau_f if p.tau_f is not None else self.rng.exponential(1 / p.nu)
            ep = [ok, d, 0.0]
            self.episodes[node.id] = ep
        ep[2] += self.dt
        if ep[2] + 1e-12 >= ep[1]:
            del self.episodes[node.id]
            return SUCCESS if ep[0] else FAILURE
        return RUNNING

    def halt(self, leaf: Node):
        self.episodes.pop(leaf.id, None)


def cmd_run(doc: Document, args) -> int:
    if doc.tree is None:
        raise MissingSection("document has no tree")
    for leaf in doc.tree.leaves():
        if leaf.name not in doc.script and leaf.name not in doc.profiles:
            raise UnresolvedReference(f"leaf {leaf.name!r} has neither a script nor a profile")
    sim = LeafSimulator(doc, _seed(args, doc), args.dt)
    ctx = ExecutionContext(resolver=sim.resolver, on_halt=sim.halt)
    names = {n.id: n.name for n in doc.tree.walk()}
    for k in range(args.ticks):
        status = tick(doc.tree, ctx)
        emit({"tick": k, "status": str(status),
              "leaves": [[names[i], str(s)] for i, s in ctx.ticked if i in names
                         and doc.tree.find(i).kind.is_leaf]})
        if status is SUCCESS:
            return EXIT_OK
        if status is FAILURE:
            return EXIT_FAIL
    return EXIT_BUDGET


# -- analyze ---------------------------------------------------------------------

def _reliability(doc, args) -> dict:
    grid = parse_grid(args.grid, args.horizon)
    rep = reliability_analyze(doc.tree, doc.profiles, grid or None, doc.time_unit)
    out = rep.to_dict()
    try:
        p = {}
        for leaf in doc.tree.leaves():
            p[leaf.name] = leaf_profile(leaf, doc.profiles).p_s
        out["static_ps"] = static_success_probability(doc.tree, p)
    except Exception:
        pass
    return out


def _montecarlo(doc, args) -> dict:
    grid = parse_grid(args.grid, args.horizon)
    res = monte_carlo(doc.tree, doc.profiles, args.runs, _seed(args, doc), grid or None)
    out = res.to_dict()
    out.update({"format_version": FORMAT_VERSION, "kind": "montecarlo",
                "time_unit": doc.time_unit, "backend": res.backend})
    return out


def _model_pair(name: str):
    from .. import models
    if name not in models.MODELS:
        raise UnresolvedReference(f"unknown model {name!r}; known: {sorted(models.MODELS)}")
    return models.MODELS[name]()


def _statespace(doc, args) -> dict:
    from .. import models, statespace
    out = {"format_version": FORMAT_VERSION, "kind": "statespace", "time_unit": doc.time_unit,
           "lemmas": [], "notes": []}
    check = doc.model_options.get("check", [])
    if check and check[0] == "safety":
        bm = models.battery()
        rep = statespace.check_safety(bm.guarantee_power, bm.power_spec, bm.do_other_task,
                                      bm.obstacle, bm.init, bm.d, bm.reachable,
                                      steps=int(check[1]) if len(check) > 1 else 10000)
        out["safety"] = {"safe": bool(rep.safe), "collar_ok": bool(rep.collar_ok),
                         "trajectories_ok": bool(rep.trajectories_ok),
                         "max_step": float(rep.max_step), "d": float(rep.d),
                         "starts": int(rep.starts), "steps": int(rep.steps)}
        return out
    dom = doc.model_options.get("domain", ["humanoid"])
    if dom[0] != "humanoid":
        raise UnresolvedReference(f"unknown sampled domain {dom[0]!r}")
    domain = models.humanoid_domain(int(dom[1]) if len(dom) > 1 else 50)

    def build(node):
        if node.kind.is_leaf:
            if node.name not in doc.models:
                raise UnresolvedReference(f"leaf {node.name!r} has no model binding")
            bt, spec = _model_pair(doc.models[node.name])
            fts = statespace.check_fts(bt, spec, domain)
            out["lemmas"].append({"node": node.name, "kind": "leaf", "fts": bool(fts.is_fts),
                                  "tau": spec.tau, "worst_tau": int(fts.worst_tau)})
            return bt, spec
        if node.kind not in (Kind.SEQUENCE, Kind.FALLBACK):
            raise BTError(f"{node.label()} is outside the state-space composition subset")
        kids = [build(c) for c in node.children]
        kind = "sequence" if node.kind == Kind.SEQUENCE else "fallback"
        acc = kids[-1]
        for child in reversed(kids[:-1]):
            rep = statespace.check_composition_lemma(kind, child, acc, domain)
            entry = {"node": node.id, "kind": kind, "hypotheses_hold": bool(rep.hypotheses_hold),
                     "conclusion_holds": bool(rep.conclusion_holds), "tau0": int(rep.tau0)}
            if rep.conclusion is not None:
                entry["worst_tau"] = int(rep.conclusion.worst_tau)
            out["lemmas"].append(entry)
            out["notes"].extend(n for n in rep.notes if n not in out["notes"])
            acc = (rep.composed, rep.spec)
        return acc

    bt, spec = build(doc.tree)
    fts = statespace.check_fts(bt, spec, domain)
    out["fts"] = {"is_fts": bool(fts.is_fts), "tau": int(fts.tau) if fts.tau is not None else None,
                  "worst_tau": int(fts.worst_tau), "checked": int(fts.checked)}
    return out


def cmd_analyze(doc: Document, args) -> int:
    what = args.what
    if what is None:
        what = "reliability" if doc.profiles else "statespace" if (doc.models or doc.model_options) else None
    if what is None:
        raise MissingSection("nothing to analyze: add a profiles or models section")
    if doc.tree is None and what != "statespace":
        raise MissingSection("document has no tree")
    if what in ("reliability", "montecarlo") and not doc.profiles:
        raise MissingSection("reliability analysis needs a profiles section")
    fn = {"reliability": _reliability, "montecarlo": _montecarlo, "statespace": _statespace}[what]
    emit(fn(doc, args))
    return EXIT_OK


# -- plan / convert / dot --------------------------------------------------------

def cmd_plan(doc: Document, args) -> int:
    goal, templates, world = planner_inputs(doc)
    res = planner.pabt_run(goal, templates, world, max_iterations=args.max_iter,
                           max_ticks=args.ticks)
    for entry in res.trace:
        emit(entry)
    out = res.to_dict()
    emit(out)
    if res.outcome == "success":
        return EXIT_OK
    return EXIT_BUDGET if res.outcome == "budget" else EXIT_FAIL


def cmd_convert(doc: Document, args) -> int:
    src = args.source
    if src is None:
        if len(doc.sources) != 1:
            raise MissingSection("pick a source with --from")
        src = next(iter(doc.sources))
    if src not in doc.sources:
        raise MissingSection(f"document has no {src} section")
    tree = converters.CONVERTERS[src](doc.sources[src])
    text = serialize(Document(tree=tree))
    emit({"format_version": FORMAT_VERSION, "kind": "convert", "from": src,
          "document": text, "dot": export_dot(tree)})
    return EXIT_OK


def cmd_dot(doc: Document, args) -> int:
    if doc.tree is None:
        raise MissingSection("document has no tree")
    sys.stdout.write(export_dot(doc.tree))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bt", description="Behavior tree toolkit", epilog=EPILOG,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("file")
        p.add_argument("--seed", type=int, default=None)
        return p

    p = common(sub.add_parser("run", help="tick the tree and stream a JSON-lines trace"))
    p.add_argument("--ticks", type=int, default=1000)
    p.add_argument("--dt", type=float, default=1.0, help="time units per tick")
    p = common(sub.add_parser("analyze", help="reliability, Monte Carlo or state-space report"))
    p.add_argument("what", nargs="?", choices=["reliability", "montecarlo", "statespace"])
    p.add_argument("--grid", help="'start:stop:count' or comma-separated times")
    p.add_argument("--horizon", type=float)
    p.add_argument("--runs", type=int, default=80000)
    p = common(sub.add_parser("plan", help="plan and act on the document's domain"))
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--ticks", type=int, default=1000)
    p = common(sub.add_parser("convert", help="convert a source formalism to a tree"))
    p.add_argument("--from", dest="source", choices=sorted(converters.CONVERTERS))
    common(sub.add_parser("export-dot", help="print Graphviz DOT"))
    return ap


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "plan": cmd_plan, "convert": cmd_convert,
            "export-dot": cmd_dot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.file, encoding="utf-8") as fh:
            doc = parse(fh.read())
        return COMMANDS[args.command](doc, args)
    except (OSError, DocumentError, BTError, planner.PlannerError, ValueError, KeyError) as e:
        print(f"bt: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
