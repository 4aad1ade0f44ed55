from btkit.core import FAILURE, RUNNING, SUCCESS, Action, Fallback, Sequence

STATUS = {"S": SUCCESS, "F": FAILURE, "R": RUNNING}
LETTER = {v: k for k, v in STATUS.items()}


def fixed(name, status):
    """Action leaf that always answers ``status``."""
    return Action(name, fn=lambda ctx: status)


def queue_driver(items):
    """Driver consuming scripted statuses, one per tick it receives."""
    it = iter(items)
    return lambda ctx: next(it)


def to_node(tree):
    """Oracle tuple tree to engine nodes (leaves are plain actions)."""
    if tree[0] == "leaf":
        return Action(tree[1])
    kids = [to_node(c) for c in tree[1]]
    return Sequence(*kids) if tree[0] == "seq" else Fallback(*kids)
