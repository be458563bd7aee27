"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every criterion pins its tolerance and (where stated) a wall-clock
budget.
"""

import json
import random
import time
from contextlib import contextmanager

from topaug.augment import MaskPlan, apply_mask, augment_manifest, propagate
from topaug.cli import cli_main
from topaug.dataset import Manifest, load_jsonl, make_sample, save_jsonl, upsample_mix
from topaug.metrics import wer
from topaug.oracle import LexiconProposer, MemorizingOracle
from topaug.retrieval import RetrievalHit, build_index, query, sample_exemplars
from topaug.top import parse_top, serialize

from helpers import assert_hits_match_oracle, dense_tfidf_all, edit_distance, random_tree


@contextmanager
def criterion(name, limit=None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if limit is not None and elapsed >= limit:
        print(f"\nACCEPTANCE {name}: FAIL (took {elapsed:.2f}s, budget {limit}s)")
        raise AssertionError(f"{name} exceeded its {limit}s budget: {elapsed:.2f}s")
    budget = f", budget {limit}s" if limit is not None else ""
    print(f"\nACCEPTANCE {name}: PASS ({elapsed:.2f}s{budget})")


def test_weather_pipeline_vector():
    with criterion("mask-replace-propagate vector", limit=1.0):
        sample = make_sample(
            "t1",
            "weather",
            "how ' s the weather in sydney",
            "[in:get_weather [sl:location sydney ] ]",
        )
        plan = MaskPlan(sample.id, 1 / 7, (6,), seed=0)
        query_ = apply_mask(sample, plan)
        assert " ".join(query_.tokens) == "how ' s the weather in [MASK]"
        proposer = LexiconProposer({"in": ["london"]})
        proposals = proposer.fill(query_)
        aug = propagate(sample, plan, proposals)
        assert aug.text == "how ' s the weather in london"
        assert serialize(aug.parse) == "[in:get_weather [sl:location london ] ]"


def test_parser_roundtrip_fuzz():
    with criterion("parser round-trip, 10^4 random trees", limit=10.0):
        rng = random.Random(20240501)
        for _ in range(10_000):
            tree = random_tree(rng, max_depth=6, max_arity=5)
            assert parse_top(serialize(tree)) == tree


def test_wer_oracle_equivalence():
    with criterion("WER vs independent DP oracle", limit=5.0):
        rng = random.Random(777)
        alphabet = ["a", "b", "c", "d", "e"]
        for _ in range(1000):
            hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
            ref = [rng.choice(alphabet) for _ in range(rng.randint(1, 12))]
            report = wer(hyp, ref)
            total = report.substitutions + report.deletions + report.insertions
            assert total == edit_distance(hyp, ref)
        report = wer(
            "how ' s the weather in london".split(),
            "how ' s the weather in sydney".split(),
        )
        assert abs(report.wer - 1 / 7) < 1e-12


def test_tfidf_oracle_equivalence():
    with criterion("TF-IDF vs dense brute-force oracle, 100 corpora", limit=30.0):
        rng = random.Random(4242)
        vocab = [f"t{i}" for i in range(30)]
        for _ in range(100):
            n_docs = rng.randint(1, 50)
            texts = [
                " ".join(rng.choices(vocab, k=rng.randint(1, 9)))
                for _ in range(n_docs)
            ]
            manifest = Manifest(
                tuple(
                    make_sample(
                        f"d{i:03d}",
                        "music",
                        text,
                        f"[in:play_music [sl:song {text.split()[0]} ] ]",
                    )
                    for i, text in enumerate(texts)
                )
            )
            index = build_index(manifest)
            docs = [list(s.utterance) for s in manifest]
            ids = [s.id for s in manifest]
            for _ in range(3):
                tokens = rng.choices(vocab, k=rng.randint(1, 6))
                m = rng.randint(1, n_docs)
                hits = query(index, tuple(tokens), m=m)
                oracle_all = dense_tfidf_all(docs, ids, tokens)
                assert_hits_match_oracle(hits, oracle_all, m, tol=1e-9)


def test_geometric_sampling_law():
    with criterion("geometric sampling law, 10^5 seeded draws", limit=10.0):
        pool = [
            RetrievalHit(sample_id=f"d{r}", rank=r, score=1.0 / r) for r in range(1, 6)
        ]
        trials = 100_000
        counts = [0] * 5
        for seed in range(trials):
            picked = sample_exemplars(pool, k=1, p_geom=0.1, seed=seed)
            counts[picked[0].rank - 1] += 1
        # closed form: p / (1 - (1-p)^5) at rank 1
        expected_rank1 = 0.1 / (1.0 - 0.9**5)
        assert abs(expected_rank1 - 0.244195) < 1e-6
        assert abs(counts[0] / trials - expected_rank1) < 0.01
        for left, right in zip(counts, counts[1:]):
            assert left > right  # strictly decreasing in rank


def test_upsampling_count_and_multiset():
    with criterion("20x upsampling of a 162-sample manifest", limit=1.0):
        low = Manifest(
            tuple(
                make_sample(
                    f"w{i:03d}",
                    "weather",
                    f"weather in city{i}",
                    f"[in:get_weather [sl:location city{i} ] ]",
                )
                for i in range(162)
            )
        )
        held_in = Manifest(
            tuple(
                make_sample(
                    f"m{i:03d}",
                    "music",
                    f"play track{i}",
                    f"[in:play_music [sl:song track{i} ] ]",
                )
                for i in range(100)
            )
        )
        mixed = upsample_mix(held_in, low, factor=20, seed=9)
        assert len(mixed) == 100 + 162 * 20 == 100 + 3240
        from collections import Counter

        got = Counter((s.text, serialize(s.parse)) for s in mixed)
        want = Counter((s.text, serialize(s.parse)) for s in held_in)
        for s in low:
            want[(s.text, serialize(s.parse))] += 20
        assert got == want


# -- filter soundness fixture ------------------------------------------------
# 20 three-token samples, lexicon proposer keyed on left context, factor 1,
# seed 2024. The drawn mask positions are deterministic, yielding 13 distinct
# candidates and 7 copies of "check weather paris" (6 of them duplicates).
# Five of the distinct candidates are designated as known to the oracle.

FILTER_SEED = 2024
DESIGNATED = {
    "verify weather city1": "[in:get_weather [sl:location city1 ] ]",
    "check climate city2": "[in:get_weather [sl:location city2 ] ]",
    "verify weather city8": "[in:get_weather [sl:location city8 ] ]",
    "check climate city14": "[in:get_weather [sl:location city14 ] ]",
    "verify weather city19": "[in:get_weather [sl:location city19 ] ]",
}
DESIGNATED_IDS = ["s01@aug1", "s02@aug1", "s08@aug1", "s14@aug1", "s19@aug1"]


def _filter_toy_manifest():
    return Manifest(
        tuple(
            make_sample(
                f"s{i:02d}",
                "weather",
                f"check weather city{i}",
                f"[in:get_weather [sl:location city{i} ] ]",
            )
            for i in range(20)
        )
    )


def _filter_lexicon():
    return {"^": ["verify"], "check": ["climate"], "weather": ["paris"]}


def test_filter_soundness():
    with criterion("filter keeps exactly the designated pairs", limit=5.0):
        manifest = _filter_toy_manifest()
        oracle = MemorizingOracle.from_manifest(manifest)
        for utterance, parse in DESIGNATED.items():
            oracle.add(utterance, parse)
        result = augment_manifest(
            manifest,
            LexiconProposer(_filter_lexicon()),
            oracle,
            factor=1,
            seed=FILTER_SEED,
        )
        assert [s.id for s in result.manifest] == DESIGNATED_IDS
        assert {(s.text, serialize(s.parse)) for s in result.manifest} == {
            (u, p) for u, p in DESIGNATED.items()
        }
        report = result.report.as_dict()
        assert report["candidates"] == 20
        assert report["kept"] == 5
        assert report["dropped_no_parse"] == 9
        assert report["dropped_mismatch"] == 0
        assert report["dropped_duplicate"] == 6
        # every non-kept candidate carries an explicit drop verdict
        for cand in result.candidates:
            assert cand.verdict in (
                "kept",
                "dropped_no_parse",
                "dropped_mismatch",
                "dropped_duplicate",
            )
        # re-querying the oracle on every kept sample reproduces the match
        for s in result.manifest:
            answer = oracle.parse(s.text)
            assert answer == serialize(s.parse)


def _write_filter_fixture(tmp_path):
    manifest_path = tmp_path / "toy20.jsonl"
    save_jsonl(_filter_toy_manifest(), manifest_path)
    lexicon_path = tmp_path / "lexicon.json"
    lexicon_path.write_text(json.dumps(_filter_lexicon()), encoding="utf-8")
    oracle_samples = list(_filter_toy_manifest().samples) + [
        make_sample(f"k{i:02d}", "weather", utterance, parse)
        for i, (utterance, parse) in enumerate(DESIGNATED.items())
    ]
    oracle_path = tmp_path / "oracle.jsonl"
    save_jsonl(Manifest(tuple(oracle_samples)), oracle_path)
    return manifest_path, lexicon_path, oracle_path


def test_determinism_across_worker_counts(tmp_path):
    with criterion("byte-identical outputs at --jobs 1 and --jobs 8"):
        manifest_path, lexicon_path, oracle_path = _write_filter_fixture(tmp_path)
        augment_outputs = []
        for jobs, name in ((1, "aug1.jsonl"), (8, "aug8.jsonl")):
            out = tmp_path / name
            code = cli_main(
                [
                    "augment",
                    "--manifest", str(manifest_path),
                    "--factor", "1",
                    "--seed", str(FILTER_SEED),
                    "--jobs", str(jobs),
                    "--proposer", f"lexicon:{lexicon_path}",
                    "--oracle", f"memorizing:{oracle_path}",
                    "--out", str(out),
                ]
            )
            assert code == 0
            augment_outputs.append(out.read_bytes())
        assert augment_outputs[0] == augment_outputs[1]
        assert len(load_jsonl(tmp_path / "aug1.jsonl")) == 5

        prompt_outputs = []
        for jobs, name in ((1, "p1.jsonl"), (8, "p8.jsonl")):
            out = tmp_path / name
            code = cli_main(
                [
                    "prompt", "render",
                    "--corpus", str(manifest_path),
                    "--mode", "sample",
                    "--k", "4",
                    "--seed", "5",
                    "--jobs", str(jobs),
                    "--out", str(out),
                ]
            )
            assert code == 0
            prompt_outputs.append(out.read_bytes())
        assert prompt_outputs[0] == prompt_outputs[1]


def test_prompt_structure(tmp_path, capsys):
    with criterion("prompt structure: 9 segments, no self-exemplar"):
        corpus = Manifest(
            tuple(
                make_sample(
                    f"c{i:02d}",
                    "music",
                    f"play song{i} for me",
                    f"[in:play_music [sl:song song{i} ] ]",
                )
                for i in range(10)
            )
        )
        corpus_path = tmp_path / "corpus10.jsonl"
        save_jsonl(corpus, corpus_path)
        code = cli_main(
            [
                "prompt", "render",
                "--corpus", str(corpus_path),
                "--mode", "sample",
                "--k", "4",
                "--seed", "21",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 10
        for line in lines:
            record = json.loads(line)
            segments = record["rendered"].split(" ; ")
            assert len(segments) == 9
            assert record["id"] not in [e["id"] for e in record["exemplars"]]
            # segments alternate utterance / parse after the base utterance
            for parse_segment in segments[2::2]:
                parse_top(parse_segment)
