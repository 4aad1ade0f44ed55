"""Graphviz export."""
from __future__ import annotations

from ..core import Kind, Node

GLYPHS = {Kind.FALLBACK: "?", Kind.SEQUENCE: "→", Kind.PARALLEL: "⇉",
          Kind.FALLBACK_MEMORY: "?*", Kind.SEQUENCE_MEMORY: "→*"}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def node_label(node: Node) -> str:
    if node.kind == Kind.PARALLEL:
        return f"⇉ {node.m}"
    if node.kind in GLYPHS:
        return GLYPHS[node.kind]
    if node.kind == Kind.DECORATOR:
        return f"δ {node.policy}"
    return node.name


def export_dot(tree: Node, name: str = "bt") -> str:
    """DOT text with one graph node per tree node, children in order."""
    lines = [f"digraph {_quote(name)} {{", "  ordering=out;", "  node [fontname=Helvetica];"]
    edges = []
    counter = 0

    def visit(node):
        nonlocal counter
        me = f"n{counter}"
        counter += 1
        if node.kind == Kind.ACTION:
            shape = "box"
        elif node.kind == Kind.CONDITION:
            shape = "ellipse"
        elif node.kind == Kind.DECORATOR:
            shape = "diamond"
        else:
            shape = "square"
        lines.append(f"  {me} [label={_quote(node_label(node))}, shape={shape}];")
        for c in node.children:
            edges.append(f"  {me} -> {visit(c)};")
        return me

    visit(tree)
    return "\n".join(lines + edges + ["}"]) + "\n"
