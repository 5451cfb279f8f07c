"""Toy-scale BERT-style models over compound (4-dimension) tokens.

Deliberately small (two layers, 64-wide) — these exist to overfit toy
sets and exercise the exchange formats, not to reproduce full-scale
training results.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
from torch import nn

from .vocab import PAD_IDS, SEQ_LEN, VOCAB_SIZES


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    dropout: float = 0.0

    def to_dict(self):
        return asdict(self)


class CompoundEmbedding(nn.Module):
    """Sum of the four per-dimension embeddings plus a learned position."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.tables = nn.ModuleList(
            [nn.Embedding(size, cfg.d_model) for size in VOCAB_SIZES])
        self.positions = nn.Embedding(SEQ_LEN, cfg.d_model)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        # tokens: [B, T, 4]
        x = sum(table(tokens[..., i]) for i, table in enumerate(self.tables))
        pos = torch.arange(tokens.shape[1], device=tokens.device)
        return x + self.positions(pos)[None]


def pad_mask(tokens: torch.Tensor) -> torch.Tensor:
    """True at PAD positions (key padding mask convention)."""
    return tokens[..., 0] == PAD_IDS[0]


class Encoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.embed = CompoundEmbedding(cfg)
        layer = nn.TransformerEncoderLayer(
            cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout,
            batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, cfg.n_layers,
                                             enable_nested_tensor=False)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.encoder(self.embed(tokens),
                            src_key_padding_mask=pad_mask(tokens))


class MLMModel(nn.Module):
    """Encoder with one classification head per token dimension."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.heads = nn.ModuleList(
            [nn.Linear(cfg.d_model, size) for size in VOCAB_SIZES])

    def forward(self, tokens: torch.Tensor):
        h = self.encoder(tokens)
        return [head(h) for head in self.heads]   # 4 x [B, T, V_d]


class NRModel(nn.Module):
    """Encoder with a single keep/drop classifier per position."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.classifier = nn.Linear(cfg.d_model, 1)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.encoder(tokens)).squeeze(-1)  # [B, T] logits


class R2FModel(nn.Module):
    """Encoder-decoder: two stacks of the same size chained through
    cross-attention, with a causal mask on the decoder side."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.dec_embed = CompoundEmbedding(cfg)
        layer = nn.TransformerDecoderLayer(
            cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout,
            batch_first=True, norm_first=True)
        self.decoder = nn.TransformerDecoder(layer, cfg.n_layers)
        self.heads = nn.ModuleList(
            [nn.Linear(cfg.d_model, size) for size in VOCAB_SIZES])

    def forward(self, encoder_tokens: torch.Tensor,
                decoder_tokens: torch.Tensor):
        memory = self.encoder(encoder_tokens)
        tgt = self.dec_embed(decoder_tokens)
        n = decoder_tokens.shape[1]
        causal = torch.triu(
            torch.ones(n, n, dtype=torch.bool, device=decoder_tokens.device),
            diagonal=1)
        h = self.decoder(tgt, memory, tgt_mask=causal,
                         tgt_key_padding_mask=pad_mask(decoder_tokens),
                         memory_key_padding_mask=pad_mask(encoder_tokens))
        return [head(h) for head in self.heads]
