"""Loaders for the three JSONL training-set formats."""
from __future__ import annotations

import json
from dataclasses import dataclass

import torch

from .vocab import IGNORE, SEQ_LEN


def _read_jsonl(path):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


@dataclass
class PretrainData:
    ids: list           # sequence ids, row-aligned with the tensors
    masked: torch.Tensor    # [N, 512, 4] long
    target: torch.Tensor    # [N, 512, 4] long, IGNORE where unmasked


@dataclass
class NRData:
    ids: list
    tokens: torch.Tensor    # [N, 512, 4] long
    labels: torch.Tensor    # [N, 512] long in {0, 1, IGNORE}


@dataclass
class R2FData:
    ids: list
    encoder: torch.Tensor   # [N, 512, 4] long
    outputs: list           # per pair: [L, 4] long, BOS ... EOS, L <= 512


def load_pretrain(path) -> PretrainData:
    ids, masked, target = [], [], []
    for obj in _read_jsonl(path):
        ids.append(obj["id"])
        masked.append(obj["masked"])
        target.append(obj["target"])
    if not ids:
        raise ValueError(f"empty pre-training dataset: {path}")
    return PretrainData(ids, torch.tensor(masked, dtype=torch.long),
                        torch.tensor(target, dtype=torch.long))


def load_nr(path) -> NRData:
    ids, tokens, labels = [], [], []
    for obj in _read_jsonl(path):
        ids.append(obj["id"])
        tokens.append(obj["tokens"])
        labels.append(obj["labels"])
    if not ids:
        raise ValueError(f"empty NR dataset: {path}")
    return NRData(ids, torch.tensor(tokens, dtype=torch.long),
                  torch.tensor(labels, dtype=torch.long))


def load_r2f(path) -> R2FData:
    ids, encoder, outputs = [], [], []
    for obj in _read_jsonl(path):
        ids.append(obj["id"])
        encoder.append(obj["input"])
        out = torch.tensor(obj["output"], dtype=torch.long)
        if len(out) > SEQ_LEN:
            raise ValueError(f"output of {obj['id']!r} exceeds {SEQ_LEN} tokens")
        outputs.append(out)
    if not ids:
        raise ValueError(f"empty R2F dataset: {path}")
    return R2FData(ids, torch.tensor(encoder, dtype=torch.long), outputs)
