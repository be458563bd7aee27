"""Fixtures: tiny randomly initialized models so the service runs offline.

Protocol conformance only needs *a* masked-LM behind the endpoints; a
one-layer random-weight model with a small wordpiece vocabulary exercises
every code path (tokenization, mask location, top-k filtering, decoding)
without network access or real checkpoints.
"""

import os

import pytest
import torch
from transformers import (
    BertConfig,
    BertForMaskedLM,
    BertTokenizer,
    EncoderDecoderConfig,
    EncoderDecoderModel,
)

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
CONTINUATIONS = ["##ing", "##s", "##er"]
WORDS = [
    "how", "'", "s", "the", "weather", "in", "sydney", "london", "paris",
    "rain", "sunny", "cold", "warm", "today", "tomorrow", "please", "check",
    "verify", "climate", "ask", "city", "tokyo", "oslo", "berlin", "rome",
    "snow", "wind", "fog", "night", "morning",
]


def _write_vocab(directory, words):
    path = os.path.join(directory, "vocab.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(words) + "\n")
    return path


def _bert_config(vocab_size, **extra):
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        **extra,
    )


@pytest.fixture(scope="session")
def tiny_mlm_dir(tmp_path_factory):
    directory = str(tmp_path_factory.mktemp("tiny-mlm"))
    vocab = SPECIALS + WORDS + CONTINUATIONS
    tokenizer = BertTokenizer(_write_vocab(directory, vocab))
    tokenizer.save_pretrained(directory)
    torch.manual_seed(1234)
    BertForMaskedLM(_bert_config(len(vocab))).save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def tiny_parser_dir(tmp_path_factory):
    directory = str(tmp_path_factory.mktemp("tiny-parser"))
    vocab = SPECIALS + WORDS + ["[in:get_weather", "[sl:location", "]"]
    tokenizer = BertTokenizer(_write_vocab(directory, vocab))
    tokenizer.save_pretrained(directory)
    torch.manual_seed(7)
    config = EncoderDecoderConfig.from_encoder_decoder_configs(
        _bert_config(len(vocab)),
        _bert_config(len(vocab), is_decoder=True, add_cross_attention=True),
    )
    model = EncoderDecoderModel(config=config)
    model.config.decoder_start_token_id = tokenizer.cls_token_id
    model.config.pad_token_id = tokenizer.pad_token_id
    model.config.eos_token_id = tokenizer.sep_token_id
    model.generation_config.decoder_start_token_id = tokenizer.cls_token_id
    model.generation_config.pad_token_id = tokenizer.pad_token_id
    model.save_pretrained(directory)
    return directory
