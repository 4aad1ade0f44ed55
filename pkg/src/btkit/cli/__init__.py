"""Text format, DOT export and the ``bt`` command."""
from .dot import export_dot
from .textformat import (BTSyntaxError, Document, DocumentError, MissingSection, UnresolvedReference,
                         parse, planner_inputs, same_document, same_tree, serialize)

__all__ = ["BTSyntaxError", "Document", "DocumentError", "MissingSection", "UnresolvedReference",
           "export_dot", "parse", "planner_inputs", "same_document", "same_tree", "serialize"]
