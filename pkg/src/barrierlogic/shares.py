"""Tree-shaped fractional permissions.

A share is a binary tree whose leaves are booleans.  ``False`` is the empty
share, ``True`` is the full share and an inner node is a 2-tuple
``(left, right)``.  Trees are kept canonical: no node has two equal leaf
children.  Everything here is a pure function on such values.
"""

from __future__ import annotations

import itertools
import re
from typing import Callable, Iterator, Optional, Union

Tree = Union[bool, tuple]

EMPTY: Tree = False
FULL: Tree = True
LEFT: Tree = (True, False)
RIGHT: Tree = (False, True)


class ShareSyntaxError(ValueError):
    pass


def node(left: Tree, right: Tree) -> Tree:
    """Build a node, collapsing equal leaves."""
    if left is right and isinstance(left, bool):
        return left
    return (left, right)


def canonical(t) -> Tree:
    if isinstance(t, bool):
        return t
    if not (isinstance(t, tuple) and len(t) == 2):
        raise TypeError(f"not a share tree: {t!r}")
    return node(canonical(t[0]), canonical(t[1]))


def is_canonical(t) -> bool:
    if isinstance(t, bool):
        return True
    if not (isinstance(t, tuple) and len(t) == 2):
        return False
    a, b = t
    if isinstance(a, bool) and a is b:
        return False
    return is_canonical(a) and is_canonical(b)


def depth(t: Tree) -> int:
    if isinstance(t, bool):
        return 0
    return 1 + max(depth(t[0]), depth(t[1]))


def _split(t: Tree) -> tuple:
    # a leaf unfolds into two copies of itself
    return (t, t) if isinstance(t, bool) else t


def pointwise(op: Callable[[bool, bool], bool], a: Tree, b: Tree) -> Tree:
    if isinstance(a, bool) and isinstance(b, bool):
        return op(a, b)
    a0, a1 = _split(a)
    b0, b1 = _split(b)
    return node(pointwise(op, a0, b0), pointwise(op, a1, b1))


def t_or(a: Tree, b: Tree) -> Tree:
    return pointwise(lambda x, y: x or y, a, b)


def t_and(a: Tree, b: Tree) -> Tree:
    return pointwise(lambda x, y: x and y, a, b)


def t_andnot(a: Tree, b: Tree) -> Tree:
    return pointwise(lambda x, y: x and not y, a, b)


def t_not(a: Tree) -> Tree:
    return pointwise(lambda x, y: not x, a, a)


def join(a: Tree, b: Tree) -> Optional[Tree]:
    """Disjoint union, or None when the shares overlap."""
    if t_and(a, b) is not EMPTY:
        return None
    return t_or(a, b)


def leq(a: Tree, b: Tree) -> bool:
    return t_and(a, b) == a


def lt(a: Tree, b: Tree) -> bool:
    return a != b and leq(a, b)


def minus(b: Tree, a: Tree) -> Optional[Tree]:
    """The unique c with a + c = b, or None if a is not below b."""
    if not leq(a, b):
        return None
    return t_andnot(b, a)


def is_positive(t: Tree) -> bool:
    return t is not EMPTY


# -- enumeration ---------------------------------------------------------

def trees_up_to(d: int) -> list:
    """All canonical trees of depth at most ``d``."""
    level = [EMPTY, FULL]
    for _ in range(d):
        nxt = [EMPTY, FULL]
        for a, b in itertools.product(level, level):
            t = node(a, b)
            if not isinstance(t, bool):
                nxt.append(t)
        level = nxt
    return level


def positive_trees_up_to(d: int) -> list:
    return [t for t in trees_up_to(d) if t is not EMPTY]


def to_mask(t: Tree, d: int) -> int:
    """Bitmask of the ``2**d`` leaves of ``t`` unfolded to depth ``d``."""
    if isinstance(t, bool):
        return (1 << (1 << d)) - 1 if t else 0
    if d == 0:
        raise ValueError("tree deeper than mask depth")
    half = 1 << (d - 1)
    return to_mask(t[0], d - 1) | (to_mask(t[1], d - 1) << half)


def from_mask(m: int, d: int) -> Tree:
    if d == 0:
        return bool(m & 1)
    half = 1 << (d - 1)
    lo = m & ((1 << half) - 1)
    return node(from_mask(lo, d - 1), from_mask(m >> half, d - 1))


# -- text syntax: [L], [LR,R], [.] and [] ---------------------------------

def _paths(t: Tree, prefix: str) -> Iterator[str]:
    if t is True:
        yield prefix
    elif isinstance(t, tuple):
        yield from _paths(t[0], prefix + "L")
        yield from _paths(t[1], prefix + "R")


def format_share(t: Tree) -> str:
    if t is True:
        return "[.]"
    return "[" + ",".join(_paths(t, "")) + "]"


def from_path(path: str) -> Tree:
    t: Tree = FULL
    for ch in reversed(path):
        t = node(t, EMPTY) if ch == "L" else node(EMPTY, t)
    return t


_PATH = re.compile(r"[LR]+")


def parse_share(text: str) -> Tree:
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise ShareSyntaxError(f"share constant must be bracketed: {text!r}")
    body = s[1:-1].replace(" ", "")
    if body == "":
        return EMPTY
    if body == ".":
        return FULL
    acc: Tree = EMPTY
    for path in body.split(","):
        if not _PATH.fullmatch(path):
            raise ShareSyntaxError(f"bad share path {path!r} in {text!r}")
        piece = from_path(path)
        nxt = join(acc, piece)
        if nxt is None:
            raise ShareSyntaxError(f"overlapping share paths in {text!r}")
        acc = nxt
    return acc


def share_from_paths(paths) -> Tree:
    return parse_share("[" + ",".join(paths) + "]")
