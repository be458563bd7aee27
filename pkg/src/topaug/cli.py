"""Batch command-line surface for the toolkit.

Exit codes: 0 success, 1 data error, 2 usage error, 3 remote-service
failure. Logs go to stderr; data goes to stdout or --out (written
atomically: temp file then rename). All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .augment import augment_manifest
from .dataset import (
    Manifest,
    dumps_jsonl,
    load_jsonl,
    load_tsv,
    upsample_mix,
    write_text_atomic,
)
from .errors import (
    DataError,
    EmptyCorpus,
    EmptyReference,
    RemoteError,
    ToolkitError,
    UsageError,
)
from .metrics import WerReport, corpus_em, exact_match, wer
from .oracle import (
    LexiconProposer,
    MemorizingOracle,
    ParserOracle,
    RemoteOracle,
    RemoteProposer,
    TokenProposer,
)
from .retrieval import (
    DEFAULT_GEOMETRIC_P,
    DEFAULT_K,
    DEFAULT_POOL_SIZE,
    DEFAULT_SEPARATOR,
    INDEX_FORMAT_VERSION,
    build_index,
    exemplars_for,
    load_index,
    query,
    save_index,
)
from .seeding import derive_seed

log = logging.getLogger("topaug")

DEFAULT_JOBS = 8  # bound on in-flight proposer/oracle requests

CONFIG_KEYS = {
    "seed",
    "factor",
    "k",
    "p_geom",
    "separator",
    "proposer",
    "oracle",
    "bridge_url",
    "jobs",
    "strict",
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path}: invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    unknown = set(config) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"config {path}: unknown key(s) {sorted(unknown)}")
    return config


def _setting(args: argparse.Namespace, config: dict, name: str, default):
    """Explicit flag wins, then config file, then the built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _strictness(args: argparse.Namespace, config: dict) -> bool:
    if getattr(args, "lenient", None):
        return False
    return bool(config.get("strict", True))


def _emit(args: argparse.Namespace, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        write_text_atomic(out, text)
    else:
        sys.stdout.write(text)


def _load_manifest(path: str, strict: bool, fmt: str = "auto") -> Manifest:
    if fmt == "auto":
        fmt = "tsv" if path.endswith(".tsv") else "jsonl"
    if fmt == "tsv":
        return load_tsv(path, strict=strict)
    return load_jsonl(path, strict=strict)


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _manifest_stats(manifest: Manifest) -> dict:
    return {
        "samples": len(manifest),
        "domains": dict(sorted(Counter(s.domain for s in manifest).items())),
        "splits": dict(sorted(Counter(s.split for s in manifest).items())),
    }


def _build_proposer(spec: str, config: dict, proposals_per_mask: int = 1) -> TokenProposer:
    kind, _, arg = spec.partition(":")
    if kind == "lexicon":
        if not arg:
            raise UsageError("proposer spec 'lexicon' needs a JSON table path")
        with open(arg, encoding="utf-8") as fh:
            table = json.load(fh)
        return LexiconProposer(table)
    if kind == "remote":
        url = arg or config.get("bridge_url")
        if not url:
            raise UsageError("proposer spec 'remote' needs a URL or config bridge_url")
        return RemoteProposer(url, proposals_per_mask=proposals_per_mask)
    raise UsageError(f"unknown proposer spec {spec!r} (use lexicon:PATH or remote:URL)")


def _build_oracle(spec: str, config: dict, strict: bool) -> ParserOracle:
    kind, _, arg = spec.partition(":")
    if kind == "memorizing":
        if not arg:
            raise UsageError("oracle spec 'memorizing' needs a manifest path")
        return MemorizingOracle.from_manifest(_load_manifest(arg, strict))
    if kind == "remote":
        url = arg or config.get("bridge_url")
        if not url:
            raise UsageError("oracle spec 'remote' needs a URL or config bridge_url")
        return RemoteOracle(url)
    raise UsageError(f"unknown oracle spec {spec!r} (use memorizing:PATH or remote:URL)")


def cmd_validate(args: argparse.Namespace, config: dict) -> int:
    manifest = _load_manifest(args.manifest, _strictness(args, config), args.format)
    stats = _manifest_stats(manifest)
    stats["ok"] = True
    _emit(args, json.dumps(stats) + "\n")
    return 0


def cmd_stats(args: argparse.Namespace, config: dict) -> int:
    manifest = _load_manifest(args.manifest, _strictness(args, config), args.format)
    _emit(args, json.dumps(_manifest_stats(manifest)) + "\n")
    return 0


def cmd_eval_em(args: argparse.Namespace, config: dict) -> int:
    hyp_lines = _read_lines(args.hyp)
    ref_lines = _read_lines(args.ref)
    if len(hyp_lines) != len(ref_lines):
        raise DataError(
            f"line count mismatch: {len(hyp_lines)} hypotheses vs {len(ref_lines)} references"
        )
    report = corpus_em(list(zip(hyp_lines, ref_lines)))
    _emit(args, json.dumps(report.as_dict()) + "\n")
    return 0


def cmd_eval_wer(args: argparse.Namespace, config: dict) -> int:
    hyp_lines = _read_lines(args.hyp)
    ref_lines = _read_lines(args.ref)
    if len(hyp_lines) != len(ref_lines):
        raise DataError(
            f"line count mismatch: {len(hyp_lines)} hypotheses vs {len(ref_lines)} references"
        )
    if not ref_lines:
        raise EmptyCorpus("no transcript pairs")
    subs = dels = ins = n_ref = 0
    for line_no, (hyp_line, ref_line) in enumerate(zip(hyp_lines, ref_lines), start=1):
        hyp_tokens = hyp_line.lower().split()
        ref_tokens = ref_line.lower().split()
        if not ref_tokens:
            raise EmptyReference(f"{args.ref} line {line_no}: empty reference")
        line_report = wer(hyp_tokens, ref_tokens)
        subs += line_report.substitutions
        dels += line_report.deletions
        ins += line_report.insertions
        n_ref += line_report.n_ref_words
    report = WerReport(
        n_ref_words=n_ref,
        substitutions=subs,
        deletions=dels,
        insertions=ins,
        wer=(subs + dels + ins) / n_ref,
    )
    _emit(args, json.dumps(report.as_dict()) + "\n")
    return 0


def cmd_mix(args: argparse.Namespace, config: dict) -> int:
    strict = _strictness(args, config)
    held_in = _load_manifest(args.held_in, strict)
    low = _load_manifest(args.low, strict)
    factor = int(_setting(args, config, "factor", 20))
    seed = int(_setting(args, config, "seed", 0))
    mixed = upsample_mix(held_in, low, factor=factor, seed=seed)
    log.info("mixed %d held-in + %d x %d low-resource -> %d samples",
             len(held_in), len(low), factor, len(mixed))
    _emit(args, dumps_jsonl(mixed))
    return 0


def cmd_augment(args: argparse.Namespace, config: dict) -> int:
    strict = _strictness(args, config)
    manifest = _load_manifest(args.manifest, strict)
    proposer_spec = _setting(args, config, "proposer", None)
    oracle_spec = _setting(args, config, "oracle", None)
    if not proposer_spec or not oracle_spec:
        raise UsageError("augment needs --proposer and --oracle (or config entries)")
    proposer = _build_proposer(proposer_spec, config, args.proposals_per_mask)
    oracle = _build_oracle(oracle_spec, config, strict)
    result = augment_manifest(
        manifest,
        proposer,
        oracle,
        factor=int(_setting(args, config, "factor", 1)),
        seed=int(_setting(args, config, "seed", 0)),
        jobs=int(_setting(args, config, "jobs", DEFAULT_JOBS)),
    )
    report_json = json.dumps(result.report.as_dict())
    log.info("augment report: %s", report_json)
    if args.report:
        write_text_atomic(args.report, report_json + "\n")
    _emit(args, dumps_jsonl(result.manifest))
    return 0


def cmd_index_build(args: argparse.Namespace, config: dict) -> int:
    manifest = _load_manifest(args.manifest, _strictness(args, config))
    index = build_index(manifest)
    save_index(index, args.out)
    log.info("indexed %d documents, %d terms -> %s",
             len(index), len(index.vocabulary), args.out)
    return 0


def cmd_index_query(args: argparse.Namespace, config: dict) -> int:
    index = load_index(args.index)
    k = int(_setting(args, config, "k", DEFAULT_K))
    exclude = set(args.exclude.split(",")) if args.exclude else set()
    hits = query(index, args.text.lower().split(), m=k, exclude=exclude)
    payload = [{"id": h.sample_id, "rank": h.rank, "score": h.score} for h in hits]
    _emit(args, json.dumps(payload) + "\n")
    return 0


def cmd_prompt_render(args: argparse.Namespace, config: dict) -> int:
    strict = _strictness(args, config)
    corpus_manifest = _load_manifest(args.corpus, strict)
    index = load_index(args.index) if args.index else build_index(corpus_manifest)
    targets = (
        _load_manifest(args.manifest, strict) if args.manifest else corpus_manifest
    )
    corpus = corpus_manifest.by_id()
    k = int(_setting(args, config, "k", DEFAULT_K))
    p_geom = float(_setting(args, config, "p_geom", DEFAULT_GEOMETRIC_P))
    separator = _setting(args, config, "separator", DEFAULT_SEPARATOR)
    seed = int(_setting(args, config, "seed", 0))
    jobs = int(_setting(args, config, "jobs", DEFAULT_JOBS))
    epochs = args.resample_epochs

    tasks = [(sample, epoch) for epoch in range(1, epochs + 1) for sample in targets]

    def render(task) -> str:
        sample, epoch = task
        prompt = exemplars_for(
            index,
            corpus,
            sample,
            mode=args.mode,
            k=k,
            p_geom=p_geom,
            seed=derive_seed(seed, sample.id, epoch),
            separator=separator,
        )
        record = {
            "id": sample.id,
            "epoch": epoch,
            "rendered": prompt.rendered,
            "exemplars": [
                {"id": h.sample_id, "rank": h.rank, "score": h.score}
                for _, _, h in prompt.exemplars
            ],
        }
        return json.dumps(record) + "\n"

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            lines = list(pool.map(render, tasks))
    else:
        lines = [render(t) for t in tasks]
    _emit(args, "".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topaug",
        description="TOP-format parse data toolkit: validate, evaluate, mix, augment, retrieve.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"topaug {__version__} (index format {INDEX_FORMAT_VERSION})",
    )
    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--config", help="JSON config file; explicit flags win")
    common = argparse.ArgumentParser(add_help=False, parents=[cfg])
    common.add_argument("--out", help="output file (default: stdout)")
    loader = argparse.ArgumentParser(add_help=False)
    loader.add_argument(
        "--lenient",
        action="store_const",
        const=True,
        default=None,
        help="skip malformed rows instead of aborting",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common, loader], help="strictly load a manifest")
    p.add_argument("manifest")
    p.add_argument("--format", choices=["auto", "jsonl", "tsv"], default="auto")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", parents=[common, loader], help="per-domain/split counts")
    p.add_argument("manifest")
    p.add_argument("--format", choices=["auto", "jsonl", "tsv"], default="auto")
    p.set_defaults(func=cmd_stats)

    p_eval = sub.add_parser("eval", help="evaluation metrics")
    eval_sub = p_eval.add_subparsers(dest="metric", required=True)
    p = eval_sub.add_parser("em", parents=[common], help="exact-match accuracy over parse files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_eval_em)
    p = eval_sub.add_parser("wer", parents=[common], help="word error rate over transcript files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_eval_wer)

    p = sub.add_parser("mix", parents=[common, loader], help="upsample and mix manifests")
    p.add_argument("--held-in", dest="held_in", required=True)
    p.add_argument("--low", required=True)
    p.add_argument("--factor", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("augment", parents=[common, loader], help="mask-and-replace augmentation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--factor", type=int)
    p.add_argument("--proposer", help="lexicon:TABLE.json or remote[:URL]")
    p.add_argument("--oracle", help="memorizing:MANIFEST or remote[:URL]")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument(
        "--proposals-per-mask",
        dest="proposals_per_mask",
        type=int,
        default=1,
        help="candidates requested per mask from a remote proposer; the best usable one is applied",
    )
    p.add_argument("--report", help="also write the report JSON here")
    p.set_defaults(func=cmd_augment)

    p_index = sub.add_parser("index", help="TF-IDF index operations")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p = index_sub.add_parser("build", parents=[cfg, loader], help="build and save an index")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="index file to write")
    p.set_defaults(func=cmd_index_build)
    p = index_sub.add_parser("query", parents=[common], help="query a saved index")
    p.add_argument("--index", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--exclude", help="comma-separated sample ids to exclude")
    p.set_defaults(func=cmd_index_query)

    p_prompt = sub.add_parser("prompt", help="exemplar prompt construction")
    prompt_sub = p_prompt.add_subparsers(dest="prompt_command", required=True)
    p = prompt_sub.add_parser("render", parents=[common, loader], help="render exemplar prompts")
    p.add_argument("--corpus", required=True, help="manifest exemplars are retrieved from")
    p.add_argument("--manifest", help="samples to render prompts for (default: the corpus)")
    p.add_argument("--index", help="prebuilt index file (default: build from corpus)")
    p.add_argument("--mode", choices=["sample", "topk"], default="topk")
    p.add_argument("--k", type=int)
    p.add_argument("--p-geom", dest="p_geom", type=float)
    p.add_argument("--separator")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--resample-epochs", type=int, default=1)
    p.set_defaults(func=cmd_prompt_render)

    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else 0 if code is None else 2
    if not logging.getLogger().handlers:
        logging.basicConfig(
            stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
        )
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except UsageError as exc:
        log.error("%s", exc)
        return 2
    except RemoteError as exc:
        log.error("%s", exc)
        return 3
    except (ToolkitError, OSError) as exc:
        log.error("%s", exc)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
