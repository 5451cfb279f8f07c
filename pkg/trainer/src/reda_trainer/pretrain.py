"""Masked-token pre-training over the pretrain JSONL format."""
from __future__ import annotations

import torch
from torch.nn import functional as F

from .checkpoint import Checkpoint
from .data import load_pretrain
from .model import MLMModel, ModelConfig
from .vocab import DIMS, IGNORE


def _mlm_loss(logits, target):
    """Sum of the four per-dimension cross-entropies over masked positions."""
    loss = 0.0
    for d, head_logits in enumerate(logits):
        loss = loss + F.cross_entropy(
            head_logits.reshape(-1, head_logits.shape[-1]),
            target[..., d].reshape(-1), ignore_index=IGNORE)
    return loss


def _masked_accuracy(logits, target):
    accs = {}
    for d, head_logits in enumerate(logits):
        tgt = target[..., d]
        sel = tgt != IGNORE
        pred = head_logits.argmax(-1)
        accs[DIMS[d]] = float((pred[sel] == tgt[sel]).float().mean())
    return accs


def pretrain(dataset_path, epochs: int = 200, seed: int = 0,
             lr: float = 2e-3, weight_decay: float = 0.01,
             config: ModelConfig = ModelConfig(),
             stop_accuracy: float | None = None):
    """Train an MLM model to convergence on a (small) dataset.

    Returns (Checkpoint, log) where log holds one entry per epoch:
    {"epoch", "loss", "accuracy": {dim: value}}. Raises ValueError if
    the dataset contains no masked positions (nothing to learn).
    """
    data = load_pretrain(dataset_path)
    if not (data.target != IGNORE).any():
        raise ValueError("dataset has no masked targets (mask_prob 0?)")
    torch.manual_seed(seed)
    model = MLMModel(config)
    opt = torch.optim.AdamW(model.parameters(), lr=lr,
                            weight_decay=weight_decay)
    log = []
    for epoch in range(1, epochs + 1):
        model.train()
        opt.zero_grad()
        logits = model(data.masked)
        loss = _mlm_loss(logits, data.target)
        loss.backward()
        opt.step()
        with torch.no_grad():
            model.eval()
            accs = _masked_accuracy(model(data.masked), data.target)
        log.append({"epoch": epoch, "loss": float(loss.detach()), "accuracy": accs})
        if stop_accuracy is not None and \
                min(accs.values()) >= stop_accuracy:
            break
    ckpt = Checkpoint(kind="mlm", config=config, state=model.state_dict())
    return ckpt, log
