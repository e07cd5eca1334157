"""Model wrapper: greedy decoding and whole-word first-position probabilities.

The prompt convention is ``"<event> <relation>"``; the model then
continues with the inference text.  Word probabilities chain sub-word
conditionals along the word's own token sequence (a single teacher-forced
forward pass), so the tokenizer never leaks across the wire protocol.
Model access is serialized with a lock; responses are pure functions of
(request, checkpoint) under greedy decoding.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

RELATIONS = (
    "xIntent", "xNeed", "xAttr", "xReact", "xEffect", "xWant",
    "oReact", "oEffect", "oWant",
)


@dataclass
class AdapterConfig:
    model_id: str
    device: str = "cpu"
    decode: str = "greedy"
    max_new_tokens: int = 16
    host: str = "127.0.0.1"
    port: int = 8321

    def __post_init__(self):
        if self.decode != "greedy":
            raise ValueError("only greedy decoding is supported; the protocol pins top-1")


class GreedyScorer:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModelForCausalLM.from_pretrained(config.model_id)
        self.model.to(config.device)
        self.model.eval()
        self._lock = threading.Lock()
        self._special_ids = set(self.tokenizer.all_special_ids)
        self._identity = self._fingerprint()

    def _fingerprint(self) -> str:
        blob = self.model.config.to_json_string(use_diff=False).encode("utf-8")
        digest = hashlib.sha256(blob).hexdigest()[:8]
        name = str(self.config.model_id).rstrip("/").rsplit("/", 1)[-1]
        return f"{name}@{digest}"

    @property
    def identity(self) -> str:
        return self._identity

    def _prompt_ids(self, event: str, relation: str) -> list[int]:
        return self.tokenizer.encode(f"{event} {relation}", add_special_tokens=False)

    def _word_ids(self, word: str) -> list[int]:
        # leading space keeps BPE vocabularies on their mid-sentence pieces
        ids = self.tokenizer.encode(" " + word, add_special_tokens=False)
        return ids or self.tokenizer.encode(word, add_special_tokens=False)

    @torch.no_grad()
    def generate(self, event: str, relation: str) -> str:
        ids = self._prompt_ids(event, relation)
        eos = self.tokenizer.eos_token_id
        produced: list[int] = []
        with self._lock:
            for step in range(self.config.max_new_tokens):
                inputs = torch.tensor([ids + produced], device=self.config.device)
                logits = self.model(inputs).logits[0, -1]
                if step == 0:
                    # never answer with only a special token
                    for special in self._special_ids:
                        logits[special] = float("-inf")
                next_id = int(torch.argmax(logits))
                if next_id == eos and produced:
                    break
                if next_id == eos:
                    break
                produced.append(next_id)
        text = self.tokenizer.decode(produced, skip_special_tokens=True).strip()
        return text or self.tokenizer.convert_ids_to_tokens(produced[:1])[0]

    @torch.no_grad()
    def word_prob(self, event: str, relation: str, word: str) -> float:
        prompt = self._prompt_ids(event, relation)
        word_ids = self._word_ids(word)
        inputs = torch.tensor([prompt + word_ids], device=self.config.device)
        with self._lock:
            logits = self.model(inputs).logits[0]
        log_probs = torch.log_softmax(logits.float(), dim=-1)
        total = 0.0
        for offset, token_id in enumerate(word_ids):
            position = len(prompt) - 1 + offset
            total += float(log_probs[position, token_id])
        return float(min(1.0, torch.exp(torch.tensor(total)).item()))


@dataclass
class ScorerStats:
    generate_calls: int = 0
    word_prob_calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, op: str):
        with self._lock:
            if op == "generate":
                self.generate_calls += 1
            else:
                self.word_prob_calls += 1
