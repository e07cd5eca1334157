import socket
import threading
import time

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Whitespace
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from commonsense_adapter.app import create_app
from commonsense_adapter.scorer import RELATIONS, AdapterConfig, GreedyScorer

DICTIONARY_WORDS = (
    "surprised", "disgusted", "sad", "happy", "angry", "fearful", "trusting", "excited",
)

EVENT_WORDS = (
    "Tom", "Mary", "won", "lost", "the", "race", "keys", "her", "smiled", "cried",
    "to", "feel", "good", "bad", "a", "prize", "went", "home", "friend", "made", ".",
)


def build_tiny_checkpoint(path) -> str:
    """Write a deterministic random mini causal LM plus a word tokenizer."""
    vocab_words = ["<unk>", "<eos>", *DICTIONARY_WORDS, *RELATIONS, *EVENT_WORDS]
    vocab = {w: i for i, w in enumerate(vocab_words)}
    tok = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = Whitespace()
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", eos_token="<eos>", pad_token="<eos>"
    )
    torch.manual_seed(20240)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=64,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=vocab["<eos>"],
        eos_token_id=vocab["<eos>"],
    )
    model = GPT2LMHeadModel(config)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    return build_tiny_checkpoint(tmp_path_factory.mktemp("tiny-model"))


@pytest.fixture(scope="session")
def scorer(checkpoint_dir):
    return GreedyScorer(AdapterConfig(model_id=checkpoint_dir))


@pytest.fixture(scope="session")
def server_url(scorer):
    import uvicorn

    with socket.socket() as probe_sock:
        probe_sock.bind(("127.0.0.1", 0))
        port = probe_sock.getsockname()[1]
    config = uvicorn.Config(
        create_app(scorer), host="127.0.0.1", port=port, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("adapter server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
