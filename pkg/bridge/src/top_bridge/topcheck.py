"""Standalone canonical-form check for TOP-format parse strings.

The bridge returns parser decodes only when they are well-formed bracketed
trees in canonical form (lowercase, single-spaced, `[in:`/`[sl:` openers
fused with their label, standalone `]` closers, intent root, intents and
slots strictly alternating, every slot containing at least one token). This
is deliberately self-contained: the wire format is the contract with the
pipeline, not a shared library.
"""

from __future__ import annotations

import re

_OPENER = re.compile(r"\[(in|sl):([a-z0-9_]+)\Z")


def canonicalize(text: str) -> str:
    return " ".join(text.lower().split())


def canonical_or_none(text: str) -> str | None:
    """Canonicalized parse string if `text` is a valid tree, else None."""
    canon = canonicalize(text)
    if not canon:
        return None
    # stack of (kind, saw_token_in_subtree)
    stack: list[list] = []
    closed_root = False
    for token in canon.split(" "):
        if closed_root:
            return None
        if token.startswith("["):
            m = _OPENER.match(token)
            if m is None:
                return None
            kind = m.group(1)
            if not stack and kind != "in":
                return None
            if stack and stack[-1][0] == kind:
                return None  # intents nest slots and vice versa
            stack.append([kind, False])
        elif token == "]":
            if not stack:
                return None
            kind, saw_token = stack.pop()
            if kind == "sl" and not saw_token:
                return None
            if stack:
                stack[-1][1] = stack[-1][1] or saw_token
            else:
                closed_root = True
        else:
            if not stack:
                return None
            stack[-1][1] = True
    if stack or not closed_root:
        return None
    return canon
