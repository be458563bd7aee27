"""Model wrappers: masked-LM mask filling and seq2seq utterance parsing.

Both run greedy/deterministic inference on an eval-mode model, so identical
requests yield identical responses within one process lifetime.
"""

from __future__ import annotations

import torch
from transformers import AutoModelForMaskedLM, AutoModelForSeq2SeqLM, AutoTokenizer

from .topcheck import canonical_or_none

MASK_SENTINEL = "[MASK]"


class UndeclaredMask(ValueError):
    """The token list contains mask sentinels not named in mask_positions."""


class MaskFiller:
    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(model_id).to(device).eval()
        self.special_tokens = set(self.tokenizer.all_special_tokens)

    def _usable(self, token: str) -> bool:
        if token in self.special_tokens:
            return False
        if token.startswith("##"):  # wordpiece continuation, not a whole word
            return False
        if not token or any(ch.isspace() for ch in token):
            return False
        return True

    def propose(
        self, tokens: list[str], mask_positions: list[int], top_k: int
    ) -> list[dict]:
        """Up to top_k usable predictions per mask, (position, score-desc) order.

        A position where nothing usable survives yields one {"token": None}
        slot so the caller always sees every mask accounted for.
        """
        words = [
            self.tokenizer.mask_token if t == MASK_SENTINEL else t for t in tokens
        ]
        encoding = self.tokenizer(" ".join(words), return_tensors="pt").to(self.device)
        input_ids = encoding["input_ids"][0]
        mask_rows = (input_ids == self.tokenizer.mask_token_id).nonzero(as_tuple=True)[0]
        if len(mask_rows) != len(mask_positions):
            raise UndeclaredMask(
                f"found {len(mask_rows)} mask sentinel(s) after tokenization "
                f"but {len(mask_positions)} declared position(s)"
            )
        with torch.no_grad():
            logits = self.model(**encoding).logits[0]
        proposals: list[dict] = []
        for row, position in zip(mask_rows.tolist(), mask_positions):
            scores = logits[row].softmax(-1)
            found = 0
            for token_id in torch.argsort(logits[row], descending=True).tolist():
                token = self.tokenizer.convert_ids_to_tokens(token_id)
                if not self._usable(token):
                    continue
                proposals.append(
                    {
                        "position": position,
                        "token": token.lower(),
                        "score": float(scores[token_id]),
                    }
                )
                found += 1
                if found >= top_k:
                    break
            if found == 0:
                proposals.append({"position": position, "token": None})
        return proposals


class Seq2SeqParser:
    def __init__(self, model_id: str, device: str = "cpu", max_new_tokens: int = 128):
        self.model_id = model_id
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device).eval()
        # decoding past the decoder's position table crashes mid-generation
        decoder_config = getattr(self.model.config, "decoder", self.model.config)
        position_limit = getattr(decoder_config, "max_position_embeddings", None)
        if position_limit:
            max_new_tokens = min(max_new_tokens, position_limit - 1)
        self.max_new_tokens = max_new_tokens

    def parse(self, utterance: str) -> str | None:
        """Greedy decode canonicalized to a valid parse string, else None."""
        encoding = self.tokenizer(utterance, return_tensors="pt").to(self.device)
        with torch.no_grad():
            generated = self.model.generate(
                **encoding,
                max_new_tokens=self.max_new_tokens,
                num_beams=1,
                do_sample=False,
            )
        text = self.tokenizer.decode(generated[0], skip_special_tokens=True)
        return canonical_or_none(text)
