"""Fine-tuning: per-token keep classification and reduced-to-full
generation, each exporting predictions in the bridge exchange formats."""
from __future__ import annotations

import json

import torch
from torch.nn import functional as F

from .checkpoint import Checkpoint, transfer_encoder
from .data import load_nr, load_r2f
from .model import ModelConfig, NRModel, R2FModel
from .vocab import (BOS_IDS, EOS_IDS, IGNORE, PAD_IDS, REGULAR_SIZES, SEQ_LEN,
                    coerce_token)


def finetune_nr(dataset_path, base: Checkpoint | None = None,
                epochs: int = 200, seed: int = 0, lr: float = 2e-3,
                weight_decay: float = 0.01,
                config: ModelConfig = ModelConfig(),
                predictions_path=None):
    """Train the keep/drop classifier; optionally warm-start from a
    pre-trained encoder and export a keep-mask JSONL."""
    data = load_nr(dataset_path)
    torch.manual_seed(seed)
    model = NRModel(base.config if base else config)
    if base is not None:
        transfer_encoder(base, model)
    opt = torch.optim.AdamW(model.parameters(), lr=lr,
                            weight_decay=weight_decay)
    sel = data.labels != IGNORE
    if not sel.any():
        raise ValueError("dataset has no labeled positions")
    target = data.labels.float().clamp(min=0.0)
    log = []
    for epoch in range(1, epochs + 1):
        model.train()
        opt.zero_grad()
        logits = model(data.tokens)
        loss = F.binary_cross_entropy_with_logits(logits[sel], target[sel])
        loss.backward()
        opt.step()
        log.append({"epoch": epoch, "loss": float(loss.detach())})
    ckpt = Checkpoint(kind="nr", config=model.cfg, state=model.state_dict())
    if predictions_path is not None:
        write_keep_masks(model, data, predictions_path)
    return ckpt, log


def write_keep_masks(model: "NRModel", data, path) -> None:
    model.eval()
    with torch.no_grad():
        probs = torch.sigmoid(model(data.tokens))
    with open(path, "w") as fh:
        for seq_id, row in zip(data.ids, probs):
            fh.write(json.dumps({"id": seq_id,
                                 "keep": [round(float(p), 6) for p in row]})
                     + "\n")


# ---------------------------------------------------------------------------
# reduced-to-full

def _r2f_batch(outputs):
    """Teacher forcing tensors: decoder input is the output stream minus
    its last token, the target is the same stream left-shifted by one."""
    max_len = max(len(out) for out in outputs) - 1
    dec_in = torch.tensor(PAD_IDS).repeat(len(outputs), max_len, 1)
    target = torch.full((len(outputs), max_len, 4), IGNORE, dtype=torch.long)
    for i, out in enumerate(outputs):
        dec_in[i, :len(out) - 1] = out[:-1]
        target[i, :len(out) - 1] = out[1:]
    return dec_in, target


def _seq_loss(logits, target):
    loss = 0.0
    for d, head_logits in enumerate(logits):
        loss = loss + F.cross_entropy(
            head_logits.reshape(-1, head_logits.shape[-1]),
            target[..., d].reshape(-1), ignore_index=IGNORE)
    return loss


def generate(model: "R2FModel", encoder_tokens: torch.Tensor,
             max_len: int = SEQ_LEN) -> list:
    """Greedy decoding: start from BOS, stop on EOS or at max_len tokens
    including BOS. Returns generated id 4-tuples without BOS/EOS."""
    model.eval()
    enc = encoder_tokens[None]
    partial = [BOS_IDS]
    with torch.no_grad():
        while len(partial) < max_len:
            dec = torch.tensor(partial, dtype=torch.long)[None]
            logits = [head[0, -1] for head in model(enc, dec)]
            raw = [int(l.argmax()) for l in logits]
            regular = [int(l[:size].argmax())
                       for l, size in zip(logits, REGULAR_SIZES)]
            ids = coerce_token(raw, regular)
            if ids == EOS_IDS:
                break
            partial.append(ids)
    return [tuple(ids) for ids in partial[1:]]


def finetune_r2f(dataset_path, base: Checkpoint | None = None,
                 epochs: int = 300, seed: int = 0, lr: float = 2e-3,
                 weight_decay: float = 0.01,
                 config: ModelConfig = ModelConfig(),
                 predictions_path=None):
    """Train the encoder-decoder on (reduced, full) pairs; export the
    generated streams as a replay prediction JSONL."""
    data = load_r2f(dataset_path)
    torch.manual_seed(seed)
    model = R2FModel(base.config if base else config)
    if base is not None:
        transfer_encoder(base, model)
    opt = torch.optim.AdamW(model.parameters(), lr=lr,
                            weight_decay=weight_decay)
    dec_in, target = _r2f_batch(data.outputs)
    log = []
    for epoch in range(1, epochs + 1):
        model.train()
        opt.zero_grad()
        loss = _seq_loss(model(data.encoder, dec_in), target)
        loss.backward()
        opt.step()
        log.append({"epoch": epoch, "loss": float(loss.detach())})
    ckpt = Checkpoint(kind="r2f", config=model.cfg, state=model.state_dict())
    if predictions_path is not None:
        write_generated(model, data, predictions_path)
    return ckpt, log


def write_generated(model: "R2FModel", data, path) -> None:
    with open(path, "w") as fh:
        for seq_id, enc in zip(data.ids, data.encoder):
            tokens = generate(model, enc)
            fh.write(json.dumps({"id": seq_id,
                                 "tokens": [list(t) for t in tokens]}) + "\n")
