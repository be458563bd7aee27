"""Mask-and-replace data augmentation with slot-value propagation.

For each source sample: draw a mask plan (a uniform ratio in [0, 0.2] turned
into at least one masked position), ask a proposer to fill the masks, mirror
replacements into the parse wherever a masked position is the aligned
position of a tree leaf, then keep only candidates whose augmented utterance
an oracle parses back to exactly the augmented parse.

All randomness is derived per (seed, sample id, attempt), so serial and
parallel runs emit identical output.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace as _replace
from typing import Iterable, Sequence

from .dataset import Manifest, Sample
from .errors import BadToken, NoProposal
from .metrics import exact_match
from .oracle import MASK, MaskQuery, ParserOracle, Proposal, TokenProposer
from .seeding import derive_seed
from .top import Child, Node, ParseTree, align_leaves, serialize

MAX_MASK_RATIO = 0.2

KEPT = "kept"
DROPPED_NO_PARSE = "dropped_no_parse"
DROPPED_MISMATCH = "dropped_mismatch"
DROPPED_DUPLICATE = "dropped_duplicate"


@dataclass(frozen=True)
class MaskPlan:
    sample_id: str
    mask_ratio: float
    positions: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.mask_ratio <= MAX_MASK_RATIO:
            raise ValueError(f"mask ratio {self.mask_ratio} outside [0, {MAX_MASK_RATIO}]")
        if list(self.positions) != sorted(set(self.positions)):
            raise ValueError("mask positions must be sorted and distinct")


@dataclass(frozen=True)
class AugmentedSample:
    id: str
    source_id: str
    attempt: int
    utterance: tuple[str, ...]
    parse: ParseTree
    replacements: tuple[tuple[int, str, str], ...]
    plan: MaskPlan
    verdict: str | None = None

    @property
    def text(self) -> str:
        return " ".join(self.utterance)

    def is_identity(self) -> bool:
        return all(old == new for _, old, new in self.replacements)


@dataclass
class AugReport:
    candidates: int = 0
    kept: int = 0
    dropped_no_parse: int = 0
    dropped_mismatch: int = 0
    dropped_duplicate: int = 0
    no_proposal: int = 0
    floored_plans: int = 0  # plans where round(ratio * len) == 0 forced up to one mask

    def as_dict(self) -> dict:
        return {
            "candidates": self.candidates,
            "kept": self.kept,
            "dropped_no_parse": self.dropped_no_parse,
            "dropped_mismatch": self.dropped_mismatch,
            "dropped_duplicate": self.dropped_duplicate,
            "no_proposal": self.no_proposal,
            "floored_plans": self.floored_plans,
        }


def mask_count(ratio: float, length: int) -> int:
    """Number of positions to mask: max(1, round(ratio * length))."""
    return max(1, round(ratio * length))


def draw_mask_plan(sample: Sample, seed: int) -> MaskPlan:
    """Draw ratio ~ U(0, 0.2) and that share of positions, at least one."""
    rng = random.Random(seed)
    ratio = rng.uniform(0.0, MAX_MASK_RATIO)
    n = mask_count(ratio, len(sample.utterance))
    positions = tuple(sorted(rng.sample(range(len(sample.utterance)), n)))
    return MaskPlan(sample_id=sample.id, mask_ratio=ratio, positions=positions, seed=seed)


def apply_mask(sample: Sample, plan: MaskPlan) -> MaskQuery:
    tokens = list(sample.utterance)
    for pos in plan.positions:
        tokens[pos] = MASK
    return MaskQuery(tokens=tuple(tokens), mask_positions=plan.positions)


def _replace_leaves(tree: ParseTree, replacements: dict[int, str]) -> ParseTree:
    """Rebuild the tree with leaf tokens at the given in-order indices swapped."""
    counter = [0]

    def walk(node: Node) -> Node:
        children: list[Child] = []
        for child in node.children:
            if isinstance(child, Node):
                children.append(walk(child))
            else:
                idx = counter[0]
                counter[0] += 1
                children.append(replacements.get(idx, child))
        return Node(node.label, tuple(children))

    return ParseTree(walk(tree.root))


def propagate(
    sample: Sample,
    plan: MaskPlan,
    proposals: Sequence[Proposal],
    attempt: int = 0,
) -> AugmentedSample:
    """Apply proposals to the utterance and mirror them into the parse.

    A masked position that is the aligned position of a tree leaf carries its
    replacement into that leaf; other leaves are untouched, so tree shape and
    labels are always preserved.
    """
    by_pos = {p.position: p.token for p in proposals}
    if sorted(by_pos) != list(plan.positions):
        raise NoProposal(
            f"need exactly one proposal per masked position {list(plan.positions)}, "
            f"got {sorted(by_pos)}"
        )
    tokens = list(sample.utterance)
    replacements = []
    for pos in plan.positions:
        old = sample.utterance[pos]
        tokens[pos] = by_pos[pos]
        replacements.append((pos, old, by_pos[pos]))
    position_to_leaf = {
        utt_pos: leaf_idx for leaf_idx, utt_pos in align_leaves(sample.parse, sample.utterance)
    }
    leaf_replacements = {
        position_to_leaf[pos]: by_pos[pos]
        for pos in plan.positions
        if pos in position_to_leaf
    }
    try:
        parse = _replace_leaves(sample.parse, leaf_replacements)
    except BadToken as exc:
        # e.g. a proposer emitted a bracket-like token for a slot value
        raise NoProposal(f"proposal not usable as a slot value: {exc}") from exc
    return AugmentedSample(
        id=f"{sample.id}@aug{attempt}",
        source_id=sample.id,
        attempt=attempt,
        utterance=tuple(tokens),
        parse=parse,
        replacements=tuple(replacements),
        plan=plan,
    )


def filter_candidates(
    candidates: Iterable[AugmentedSample],
    oracle: ParserOracle,
    jobs: int = 1,
) -> list[AugmentedSample]:
    """Assign a verdict to every candidate.

    Duplicates (of the candidate's own source pair, or of any earlier
    candidate in the stream) are dropped up front without consulting the
    oracle; the rest are kept iff the oracle parses the augmented utterance
    back to exactly the augmented parse. Oracle failures abort the whole
    batch so partial results are never emitted.
    """
    ordered = list(candidates)
    verdicts: dict[int, str] = {}
    to_query: list[tuple[int, AugmentedSample]] = []
    seen: set[tuple[str, str]] = set()
    for i, cand in enumerate(ordered):
        key = (cand.text, serialize(cand.parse))
        if cand.is_identity() or key in seen:
            verdicts[i] = DROPPED_DUPLICATE
            continue
        seen.add(key)
        to_query.append((i, cand))

    def ask(item: tuple[int, AugmentedSample]) -> tuple[int, str]:
        i, cand = item
        answer = oracle.parse(cand.text)
        if answer is None:
            return i, DROPPED_NO_PARSE
        if exact_match(answer, serialize(cand.parse)):
            return i, KEPT
        return i, DROPPED_MISMATCH

    if jobs > 1 and len(to_query) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(ask, to_query))
    else:
        results = [ask(item) for item in to_query]
    for i, verdict in results:
        verdicts[i] = verdict
    return [_replace(c, verdict=verdicts[i]) for i, c in enumerate(ordered)]


@dataclass
class AugmentationResult:
    manifest: Manifest
    report: AugReport
    candidates: list[AugmentedSample]


def augment_manifest(
    manifest: Manifest,
    proposer: TokenProposer,
    oracle: ParserOracle,
    factor: int,
    seed: int,
    jobs: int = 1,
) -> AugmentationResult:
    """Generate `factor` candidates per source sample and filter them.

    Candidate seeds are derived from (seed, sample id, attempt), output is
    sorted by (source id, attempt), and kept samples get ids
    ``<source_id>@aug<k>``; the result is identical for any worker count.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    report = AugReport()
    tasks = [(s, k) for s in manifest for k in range(1, factor + 1)]

    def generate(task: tuple[Sample, int]) -> AugmentedSample | None:
        sample, k = task
        plan = draw_mask_plan(sample, derive_seed(seed, sample.id, k))
        query = apply_mask(sample, plan)
        try:
            proposals = proposer.fill(query)
            return propagate(sample, plan, proposals, attempt=k)
        except NoProposal:
            return None

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            generated = list(pool.map(generate, tasks))
    else:
        generated = [generate(t) for t in tasks]

    candidates = sorted(
        (c for c in generated if c is not None),
        key=lambda c: (c.source_id, c.attempt),
    )
    report.no_proposal = len(tasks) - len(candidates)
    report.candidates = len(candidates)
    report.floored_plans = sum(
        1
        for c in candidates
        if round(c.plan.mask_ratio * len(c.utterance)) == 0
    )

    filtered = filter_candidates(candidates, oracle, jobs=jobs)
    by_source = {s.id: s for s in manifest}
    kept_samples: list[Sample] = []
    for cand in filtered:
        if cand.verdict == KEPT:
            report.kept += 1
            source = by_source[cand.source_id]
            kept_samples.append(
                Sample(
                    id=cand.id,
                    domain=source.domain,
                    utterance=cand.utterance,
                    parse=cand.parse,
                    split=source.split,
                    provenance={
                        "source_id": cand.source_id,
                        "p": cand.plan.mask_ratio,
                        "positions": list(cand.plan.positions),
                        "replacements": [list(r) for r in cand.replacements],
                    },
                )
            )
        elif cand.verdict == DROPPED_NO_PARSE:
            report.dropped_no_parse += 1
        elif cand.verdict == DROPPED_MISMATCH:
            report.dropped_mismatch += 1
        elif cand.verdict == DROPPED_DUPLICATE:
            report.dropped_duplicate += 1
    out = Manifest(
        tuple(kept_samples),
        provenance=f"augment({manifest.provenance!r}, factor={factor}, seed={seed})",
    )
    return AugmentationResult(manifest=out, report=report, candidates=filtered)
