"""Checkpoint loading and last-token attention extraction.

The service renders the canonical (history, task) prompt exactly as the
client library does, tokenizes that one string with a fast tokenizer, and
returns the final token's attention row per head at the requested layer.
Raw token spans from the tokenizer leave gaps at whitespace, so they are
widened here until they tile the prompt: concatenating the spans reproduces
the submitted text character for character, and every span start at or past
the document's end marks a task/template token. Only the last row is ever
shipped, keeping payloads O(heads x tokens) rather than O(tokens squared).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import torch

from attnpress.providers import render_prompt


class ShimRequestError(Exception):
    """A rejected request, carrying the HTTP status it should be answered with."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class ShimConfig:
    """Startup settings: which checkpoint to serve, where, and input bounds."""

    model: str
    device: str = "cpu"
    max_input_tokens: int = 4096
    host: str = "127.0.0.1"
    port: int = 8301

    def __post_init__(self):
        if self.max_input_tokens < 1:
            raise ValueError(
                f"max_input_tokens must be >= 1, got {self.max_input_tokens}"
            )


def _tiled_offsets(starts: list[int], total: int) -> list[list[int]]:
    """Half-open spans that tile [0, total), one per token start."""
    spans = []
    for i, start in enumerate(starts):
        begin = 0 if i == 0 else start
        end = starts[i + 1] if i + 1 < len(starts) else total
        spans.append([begin, end])
    return spans


class ShimService:
    """One loaded model plus its tokenizer; forward passes are serialized."""

    def __init__(self, model, tokenizer, *, max_input_tokens: int = 4096,
                 device: str = "cpu", name: str = ""):
        if max_input_tokens < 1:
            raise ValueError(f"max_input_tokens must be >= 1, got {max_input_tokens}")
        self.model = model.to(device).eval()
        self.tokenizer = tokenizer
        self.max_input_tokens = max_input_tokens
        self.device = device
        self.name = name or str(getattr(model.config, "name_or_path", "") or "unnamed")
        self.num_layers = int(model.config.num_hidden_layers)
        self._lock = threading.Lock()
        self._check_attentions()

    def _check_attentions(self):
        """Fail at construction, not first request, if attentions are absent."""
        probe = torch.zeros((1, 1), dtype=torch.long, device=self.device)
        with torch.no_grad():
            out = self.model(probe, output_attentions=True)
        if not out.attentions:
            raise ValueError(
                "model reports no attention weights; load the checkpoint with "
                'attn_implementation="eager"'
            )

    def extract(self, text: str, task: str, layer: int) -> dict:
        """One wire-protocol response body; bad input raises ShimRequestError."""
        if not 0 <= layer < self.num_layers:
            raise ShimRequestError(
                400, f"layer {layer} out of range [0, {self.num_layers})"
            )
        prompt = render_prompt(text, task)
        enc = self.tokenizer(prompt, return_offsets_mapping=True,
                             add_special_tokens=False)
        ids = enc["input_ids"]
        if not ids:
            raise ShimRequestError(400, "prompt produced no tokens")
        if len(ids) > self.max_input_tokens:
            raise ShimRequestError(
                413,
                f"{len(ids)} tokens exceed the limit of {self.max_input_tokens}",
            )
        offsets = _tiled_offsets(
            [int(start) for start, _ in enc["offset_mapping"]], len(prompt)
        )
        batch = torch.tensor([ids], dtype=torch.long, device=self.device)
        with self._lock, torch.no_grad():
            out = self.model(batch, output_attentions=True)
        row = out.attentions[layer][0, :, -1, :]
        return {
            "layer": layer,
            "num_heads": int(row.shape[0]),
            "heads": row.tolist(),
            "token_offsets": offsets,
            "task_token_count": sum(
                1 for start, _ in offsets if start >= len(text)
            ),
        }


def load_service(config: ShimConfig) -> ShimService:
    """Load the configured checkpoint, ready to serve."""
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model, use_fast=True)
    model = AutoModel.from_pretrained(config.model, attn_implementation="eager")
    return ShimService(
        model, tokenizer,
        max_input_tokens=config.max_input_tokens,
        device=config.device,
        name=config.model,
    )
