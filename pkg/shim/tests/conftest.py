import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2Model, PreTrainedTokenizerFast

from attnshim import ShimService

WORDS = (
    "Alpha", "beta", "Gamma", "delta", "Pick", "one",
    "Movie", "title", "Night", "Ferry", "The", "user", "rated", "it",
    "out", "of", "Which", "movie", "did", "the", "watch",
    "4", "5", ".", ",", ":", "?",
)


def build_tokenizer() -> PreTrainedTokenizerFast:
    vocab = {"[UNK]": 0, "[PAD]": 1}
    for word in WORDS:
        vocab.setdefault(word, len(vocab))
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]",
                                   pad_token="[PAD]")


def build_model(vocab_size: int) -> GPT2Model:
    torch.manual_seed(7)
    config = GPT2Config(
        vocab_size=vocab_size, n_positions=128, n_embd=16, n_layer=3, n_head=2,
        bos_token_id=0, eos_token_id=0, attn_implementation="eager",
    )
    return GPT2Model(config)


@pytest.fixture(scope="session")
def service() -> ShimService:
    tokenizer = build_tokenizer()
    model = build_model(tokenizer.vocab_size)
    return ShimService(model, tokenizer, max_input_tokens=32, device="cpu",
                       name="tiny-wordlevel-gpt2")
