"""Prefix-vector algebra.

Vectors are plain tuples of opaque byte-string elements.  A reserved
sentinel ``BOT`` (distinct from every byte string) marks absent elements;
it only appears inside vectors at the wire-codec boundary, where short
vectors are padded to a fixed capacity.

All operations here are pure functions over immutable tuples and are safe
for concurrent use.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence, Union


class _Bot:
    """Singleton placeholder element, equal only to itself."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "BOT"

    def __reduce__(self):
        return (_bot_instance, ())


def _bot_instance() -> "_Bot":
    return BOT


BOT = _Bot()

Element = Union[bytes, _Bot]
Vector = tuple  # tuple[Element, ...]


def is_prefix(shorter: Sequence, longer: Sequence) -> bool:
    """True iff ``shorter`` is a (non-strict) prefix of ``longer``."""
    if len(shorter) > len(longer):
        return False
    return tuple(longer[: len(shorter)]) == tuple(shorter)


def is_strict_prefix(shorter: Sequence, longer: Sequence) -> bool:
    return len(shorter) < len(longer) and is_prefix(shorter, longer)


def consistent(a: Sequence, b: Sequence) -> bool:
    """True iff one vector is a prefix of the other."""
    if len(a) <= len(b):
        return is_prefix(a, b)
    return is_prefix(b, a)


def mcp(vectors: Iterable[Sequence]) -> Vector:
    """Maximum common prefix of a non-empty collection of vectors."""
    vecs = list(vectors)
    if not vecs:
        raise ValueError("mcp of an empty collection is undefined")
    first = min(vecs, key=len)
    cut = len(first)
    for vec in vecs:
        if cut == 0:
            break
        limit = min(cut, len(vec))
        i = 0
        while i < limit and vec[i] == first[i]:
            i += 1
        cut = i
    return tuple(first[:cut])


def mce(vectors: Iterable[Sequence]) -> Optional[Vector]:
    """Minimum common extension, or None when the vectors conflict.

    When every pair of vectors is consistent they form a chain, so the
    minimum common extension is simply the longest of them.
    """
    vecs = list(vectors)
    if not vecs:
        raise ValueError("mce of an empty collection is undefined")
    longest = max(vecs, key=len)
    for vec in vecs:
        if not is_prefix(vec, longest):
            return None
    return tuple(longest)


class _TrieNode:
    __slots__ = ("children", "count")

    def __init__(self) -> None:
        self.children: dict = {}
        self.count = 0


def _element_sort_key(elem: Element):
    if isinstance(elem, _Bot):
        return (0, b"")
    return (1, elem)


def longest_supported_prefix(vectors: Sequence[Sequence], support: int) -> Vector:
    """Deepest prefix extended by at least ``support`` of the given vectors.

    Equals the longest vector among the maximum common prefixes of all
    size-``support`` sub-multisets, computed in time linear in the total
    input size via a counting trie.  Whenever ``2*support`` exceeds the
    ballot count (every quorum-certification call site) the result is
    unique because any two supporting subsets share a vector; for smaller
    support values equally deep candidates are broken lexicographically.
    """
    vecs = list(vectors)
    if support <= 0:
        raise ValueError("support must be positive")
    if support > len(vecs):
        raise ValueError(f"support {support} exceeds vector count {len(vecs)}")

    root = _TrieNode()
    for vec in vecs:
        node = root
        node.count += 1
        for elem in vec:
            child = node.children.get(elem)
            if child is None:
                child = _TrieNode()
                node.children[elem] = child
            child.count += 1
            node = child

    majority = 2 * support > len(vecs)
    best: Vector = ()
    # Depth-first over the supported skeleton only: counts are monotone
    # along paths, so subtrees below an unsupported node are dead.
    stack: list = [(root, ())]
    while stack:
        node, path = stack.pop()
        if len(path) > len(best):
            best = path
        candidates = [
            (elem, child) for elem, child in node.children.items() if child.count >= support
        ]
        assert not (majority and len(candidates) > 1), "supported prefix not unique"
        # Reverse-sorted push so the lexicographically least branch is
        # explored (and wins depth ties) first.
        for elem, child in sorted(candidates, key=lambda ec: _element_sort_key(ec[0]), reverse=True):
            stack.append((child, path + (elem,)))
    return best
