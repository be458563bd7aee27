"""TOP-format bracketed semantic parse trees.

A parse is a rooted tree of intent and slot nodes whose leaves are utterance
tokens, written as e.g. ``[in:get_weather [sl:location sydney ] ]``. Opening
brackets are fused with their label into a single token and the closing
bracket is a standalone ``]`` token, so a canonical parse string is plain
whitespace-tokenizable text.

Everything here is immutable and pure; trees can be shared freely across
threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import (
    AlignmentFailed,
    BadLabel,
    BadToken,
    EmptyTree,
    InvalidNesting,
    RootNotIntent,
    SlotWithoutTokens,
    UnbalancedBrackets,
)

INTENT = "in"
SLOT = "sl"

_NAME_RE = re.compile(r"[a-z0-9_]+\Z")
_OPENER_RE = re.compile(r"\[(in|sl):([a-z0-9_]+)\Z")

Child = Union["Node", str]


def canonicalize(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, strip ends."""
    return " ".join(text.lower().split())


def _check_token(text: str) -> None:
    if not text:
        raise BadToken("empty leaf token")
    if any(ch.isspace() for ch in text):
        raise BadToken(f"leaf token {text!r} contains whitespace")
    if text != text.lower():
        raise BadToken(f"leaf token {text!r} is not lowercase")
    if text.startswith("[") or text == "]":
        raise BadToken(f"leaf token {text!r} collides with bracket syntax")


@dataclass(frozen=True)
class NodeLabel:
    kind: str  # INTENT or SLOT
    name: str

    def __post_init__(self) -> None:
        if self.kind not in (INTENT, SLOT):
            raise BadLabel(f"unknown label kind {self.kind!r}")
        if not _NAME_RE.match(self.name):
            raise BadLabel(f"bad label name {self.name!r}")

    @property
    def opener(self) -> str:
        return f"[{self.kind}:{self.name}"


@dataclass(frozen=True)
class Node:
    """An intent or slot node; children are sub-nodes or leaf tokens."""

    label: NodeLabel
    children: tuple[Child, ...] = ()

    def __post_init__(self) -> None:
        for child in self.children:
            if isinstance(child, Node):
                # Intents nest only slots and slots nest only intents.
                if child.label.kind == self.label.kind:
                    raise InvalidNesting(
                        f"{self.label.opener} ] may not directly contain "
                        f"{child.label.opener} ]"
                    )
            else:
                _check_token(child)
        if self.label.kind == SLOT and not _subtree_has_token(self):
            raise SlotWithoutTokens(f"slot {self.label.name!r} has no value tokens")


def _subtree_has_token(node: Node) -> bool:
    return any(
        isinstance(c, str) or _subtree_has_token(c) for c in node.children
    )


@dataclass(frozen=True)
class ParseTree:
    root: Node

    def __post_init__(self) -> None:
        if self.root.label.kind != INTENT:
            raise RootNotIntent(f"root is {self.root.label.opener} ]")


def intent(name: str, *children: Child) -> Node:
    return Node(NodeLabel(INTENT, name), tuple(children))


def slot(name: str, *children: Child) -> Node:
    return Node(NodeLabel(SLOT, name), tuple(children))


def parse_top(text: str) -> ParseTree:
    """Parse a TOP-format string into a tree.

    Input is canonicalized first, so case and whitespace variance are
    accepted; the result always satisfies serialize(parse_top(s)) ==
    canonicalize(s).
    """
    canon = canonicalize(text)
    if not canon:
        raise EmptyTree("no tokens")
    stack: list[tuple[NodeLabel, list[Child]]] = []
    root: Node | None = None
    for tok in canon.split(" "):
        if root is not None:
            raise UnbalancedBrackets(f"content after root tree closes: {tok!r}")
        if tok.startswith("["):
            m = _OPENER_RE.match(tok)
            if m is None:
                raise BadLabel(f"bad bracket label {tok!r}")
            label = NodeLabel(m.group(1), m.group(2))
            if not stack and label.kind != INTENT:
                raise RootNotIntent(f"root is {tok} ]")
            stack.append((label, []))
        elif tok == "]":
            if not stack:
                raise UnbalancedBrackets("']' without matching open bracket")
            label, children = stack.pop()
            node = Node(label, tuple(children))
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
        else:
            if not stack:
                raise UnbalancedBrackets(f"token outside any tree: {tok!r}")
            stack[-1][1].append(tok)
    if stack:
        raise UnbalancedBrackets(f"{len(stack)} unclosed bracket(s)")
    if root is None:
        raise EmptyTree("no tree found")
    return ParseTree(root)


def serialize(tree: ParseTree) -> str:
    """Render the canonical form: depth-first, single-space separated."""
    parts: list[str] = []

    def walk(node: Node) -> None:
        parts.append(node.label.opener)
        for child in node.children:
            if isinstance(child, Node):
                walk(child)
            else:
                parts.append(child)
        parts.append("]")

    walk(tree.root)
    return " ".join(parts)


def leaf_tokens(tree: ParseTree) -> list[str]:
    """In-order leaf tokens of the tree."""
    out: list[str] = []

    def walk(node: Node) -> None:
        for child in node.children:
            if isinstance(child, Node):
                walk(child)
            else:
                out.append(child)

    walk(tree.root)
    return out


def align_leaves(
    tree: ParseTree, utterance: tuple[str, ...] | list[str]
) -> list[tuple[int, int]]:
    """Match tree leaves to utterance positions, greedily left to right.

    Returns one (leaf_index, utterance_position) pair per leaf with strictly
    increasing positions; the greedy scan yields the lexicographically
    smallest valid position vector. Raises AlignmentFailed when the leaves
    are not an order-preserving subsequence of the utterance.
    """
    leaves = leaf_tokens(tree)
    pairs: list[tuple[int, int]] = []
    pos = 0
    for i, leaf in enumerate(leaves):
        while pos < len(utterance) and utterance[pos] != leaf:
            pos += 1
        if pos >= len(utterance):
            raise AlignmentFailed(
                f"leaf {leaf!r} (index {i}) not found in order in utterance"
            )
        pairs.append((i, pos))
        pos += 1
    return pairs
