"""Data toolkit for low-resource task-oriented semantic parsing.

Core pieces: TOP-format parse trees (parse/serialize/align), exact-match and
word-error-rate evaluation, manifest handling with upsampling, mask-and-
replace data augmentation with oracle filtering, and TF-IDF exemplar
retrieval for prompt construction. See the CLI (`topaug --help`) for the
batch pipeline surface.
"""

__version__ = "0.1.0"

from . import errors
from .augment import (
    AugmentationResult,
    AugmentedSample,
    AugReport,
    MaskPlan,
    apply_mask,
    augment_manifest,
    draw_mask_plan,
    filter_candidates,
    propagate,
)
from .dataset import (
    DOMAINS,
    Manifest,
    Sample,
    SPLITS,
    filter_domain,
    load_jsonl,
    load_tsv,
    make_sample,
    save_jsonl,
    upsample_mix,
)
from .metrics import EmReport, WerReport, corpus_em, exact_match, wer
from .oracle import (
    MASK,
    LexiconProposer,
    MaskQuery,
    MemorizingOracle,
    ParserOracle,
    Proposal,
    RemoteOracle,
    RemoteProposer,
    TokenProposer,
)
from .retrieval import (
    ExemplarPrompt,
    RetrievalHit,
    TfidfIndex,
    build_index,
    exemplars_for,
    load_index,
    query,
    render_prompt,
    sample_exemplars,
    save_index,
    top_k_exemplars,
)
from .top import (
    Node,
    NodeLabel,
    ParseTree,
    align_leaves,
    canonicalize,
    intent,
    leaf_tokens,
    parse_top,
    serialize,
    slot,
)

__all__ = [name for name in dir() if not name.startswith("_")]
