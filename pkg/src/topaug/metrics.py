"""Exact-match accuracy over parses and word error rate over transcripts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyCorpus, EmptyReference, ParseError
from .top import canonicalize, parse_top, serialize


@dataclass(frozen=True)
class EmReport:
    n_total: int
    n_exact: int
    accuracy: float

    def as_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_exact": self.n_exact,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class WerReport:
    n_ref_words: int
    substitutions: int
    deletions: int
    insertions: int
    wer: float

    def as_dict(self) -> dict:
        return {
            "n_ref_words": self.n_ref_words,
            "sub": self.substitutions,
            "del": self.deletions,
            "ins": self.insertions,
            "wer": self.wer,
        }


def exact_match(hyp: str, ref: str) -> bool:
    """True iff both strings denote the same canonical parse.

    Comparison is on canonicalized text; when both sides parse as TOP trees
    they are additionally compared through re-serialization, so whitespace
    and case variance never break a match. Unparseable strings are compared
    as canonicalized text only; this never raises.
    """
    ch, cr = canonicalize(hyp), canonicalize(ref)
    if ch == cr:
        return True
    try:
        th, tr = parse_top(ch), parse_top(cr)
    except ParseError:
        return False
    return serialize(th) == serialize(tr)


def corpus_em(pairs: Iterable[tuple[str, str]]) -> EmReport:
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("no (hypothesis, reference) pairs")
    n_exact = sum(1 for hyp, ref in pairs if exact_match(hyp, ref))
    return EmReport(
        n_total=len(pairs), n_exact=n_exact, accuracy=n_exact / len(pairs)
    )


def wer(hyp: Sequence[str], ref: Sequence[str]) -> WerReport:
    """Word error rate under minimal-edit Levenshtein alignment, unit costs.

    Ties between equal-cost decompositions are broken by preferring
    substitutions, then deletions, then insertions.
    """
    if not ref:
        raise EmptyReference("reference transcript is empty")
    m, n = len(hyp), len(ref)
    # dp[j] = (cost, subs, dels, ins) for the current hyp prefix vs ref[:j]
    dp: list[tuple[int, int, int, int]] = [(j, 0, j, 0) for j in range(n + 1)]
    for i in range(1, m + 1):
        prev = dp
        dp = [(i, 0, 0, i)] + [(0, 0, 0, 0)] * n
        for j in range(1, n + 1):
            if hyp[i - 1] == ref[j - 1]:
                c, s, d, k = prev[j - 1]
                best = (c, s, d, k)
            else:
                c, s, d, k = prev[j - 1]
                best = (c + 1, s + 1, d, k)
            c, s, d, k = dp[j - 1]  # ref word unmatched: deletion
            if c + 1 < best[0]:
                best = (c + 1, s, d + 1, k)
            c, s, d, k = prev[j]  # hyp word unmatched: insertion
            if c + 1 < best[0]:
                best = (c + 1, s, d, k + 1)
            dp[j] = best
    _, subs, dels, ins = dp[n]
    return WerReport(
        n_ref_words=n,
        substitutions=subs,
        deletions=dels,
        insertions=ins,
        wer=(subs + dels + ins) / n,
    )
