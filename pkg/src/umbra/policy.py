"""Access policy trees and their textual grammar.

A policy is a threshold tree over attribute leaves:

    and(dept_a, or(clearance_2, clearance_3))
    2 of (alpha, beta, gamma)
    solo_attribute

``and``/``or``/``of`` are reserved words. Attribute identifiers match
[A-Za-z0-9_-]{1,64}. Children keep their authored order; formatting a
parsed policy reproduces the canonical spelling of the authored shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .errors import PolicyError, UnknownAttribute

ATTRIBUTE_RE = re.compile(r"[A-Za-z0-9_-]{1,64}$")
RESERVED = {"and", "or", "of"}

GATE_AND = "and"
GATE_OR = "or"
GATE_OF = "of"


@dataclass(frozen=True)
class PolicyNode:
    """A leaf (attribute set, no children) or a threshold gate."""

    attribute: str | None = None
    threshold: int = 0
    children: tuple["PolicyNode", ...] = ()
    gate: str | None = None  # authored spelling: and / or / of

    @property
    def is_leaf(self) -> bool:
        return self.attribute is not None

    def depth(self) -> int:
        """Longest leaf path in edges: a bare attribute is depth 0."""
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)


def attr(name: str) -> PolicyNode:
    if not ATTRIBUTE_RE.match(name) or name in RESERVED:
        raise PolicyError(f"invalid attribute identifier {name!r}")
    return PolicyNode(attribute=name)


def _gate(kind: str, k: int, children: tuple[PolicyNode, ...]) -> PolicyNode:
    if not children:
        raise PolicyError("gate requires at least one child")
    if not (1 <= k <= len(children)):
        raise PolicyError(f"threshold {k} outside [1, {len(children)}]")
    return PolicyNode(threshold=k, children=children, gate=kind)


def all_of(*children: PolicyNode) -> PolicyNode:
    return _gate(GATE_AND, len(children), tuple(children))


def any_of(*children: PolicyNode) -> PolicyNode:
    return _gate(GATE_OR, 1, tuple(children))


def at_least(k: int, *children: PolicyNode) -> PolicyNode:
    return _gate(GATE_OF, k, tuple(children))


def satisfies(attributes: set[str] | frozenset[str], node: PolicyNode) -> bool:
    """Reference decision procedure: does the attribute set satisfy the tree?"""
    if node.is_leaf:
        return node.attribute in attributes
    hits = sum(1 for c in node.children if satisfies(attributes, c))
    return hits >= node.threshold


def leaves(node: PolicyNode) -> Iterator[tuple[int, PolicyNode]]:
    """Yield (pre-order leaf index, leaf) pairs."""
    counter = [0]

    def walk(n: PolicyNode) -> Iterator[tuple[int, PolicyNode]]:
        if n.is_leaf:
            yield counter[0], n
            counter[0] += 1
            return
        for c in n.children:
            yield from walk(c)

    yield from walk(node)


def validate(node: PolicyNode, attribute_space: set[str] | frozenset[str]) -> None:
    """Raise UnknownAttribute if any leaf names an attribute outside the space."""
    for _, leaf in leaves(node):
        if leaf.attribute not in attribute_space:
            raise UnknownAttribute(f"attribute {leaf.attribute!r} not in the universe")


# --- grammar ---

_TOKEN_RE = re.compile(r"\s*([(),]|[A-Za-z0-9_-]+)")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise PolicyError(f"unexpected character at offset {pos}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise PolicyError("unexpected end of policy text")
        if expected is not None and tok != expected:
            raise PolicyError(f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def parse_node(self) -> PolicyNode:
        tok = self.take()
        if tok in (GATE_AND, GATE_OR):
            children = self.parse_children()
            k = len(children) if tok == GATE_AND else 1
            return _gate(tok, k, children)
        if tok.isdigit():
            k = int(tok)
            self.take(GATE_OF)
            children = self.parse_children()
            return _gate(GATE_OF, k, children)
        if tok in RESERVED or tok in "(),":
            raise PolicyError(f"unexpected token {tok!r}")
        return attr(tok)

    def parse_children(self) -> tuple[PolicyNode, ...]:
        self.take("(")
        children = [self.parse_node()]
        while self.peek() == ",":
            self.take(",")
            children.append(self.parse_node())
        self.take(")")
        return tuple(children)


def parse_policy(text: str) -> PolicyNode:
    """Parse policy text into a tree; PolicyError on any malformed input."""
    parser = _Parser(_tokenize(text))
    node = parser.parse_node()
    if parser.peek() is not None:
        raise PolicyError(f"trailing tokens after policy: {parser.peek()!r}")
    return node


def format_policy(node: PolicyNode) -> str:
    """Render a tree back to the grammar; inverse of parse_policy."""
    if node.is_leaf:
        return node.attribute
    inner = ", ".join(format_policy(c) for c in node.children)
    if node.gate == GATE_OF:
        return f"{node.threshold} of ({inner})"
    if node.gate in (GATE_AND, GATE_OR):
        return f"{node.gate}({inner})"
    # programmatically built node without an authored spelling
    if node.threshold == len(node.children):
        return f"and({inner})"
    if node.threshold == 1:
        return f"or({inner})"
    return f"{node.threshold} of ({inner})"
