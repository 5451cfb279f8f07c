"""Checkpoint save/load with vocabulary fingerprint enforcement."""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .model import MLMModel, ModelConfig, NRModel, R2FModel
from .vocab import FINGERPRINT

_KINDS = {"mlm": MLMModel, "nr": NRModel, "r2f": R2FModel}


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    kind: str               # "mlm" | "nr" | "r2f"
    config: ModelConfig
    state: dict             # model state_dict
    fingerprint: str = FINGERPRINT

    def build_model(self):
        if self.fingerprint != FINGERPRINT:
            raise CheckpointError(
                f"checkpoint vocab fingerprint {self.fingerprint} does not "
                f"match the tokenizer's {FINGERPRINT}")
        model = _KINDS[self.kind](self.config)
        model.load_state_dict(self.state)
        return model


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    torch.save({"kind": ckpt.kind, "config": ckpt.config.to_dict(),
                "state": ckpt.state, "fingerprint": ckpt.fingerprint}, path)


def load_checkpoint(path) -> Checkpoint:
    obj = torch.load(path, weights_only=False)
    ckpt = Checkpoint(kind=obj["kind"], config=ModelConfig(**obj["config"]),
                      state=obj["state"], fingerprint=obj["fingerprint"])
    if ckpt.fingerprint != FINGERPRINT:
        raise CheckpointError(
            f"checkpoint vocab fingerprint {ckpt.fingerprint} does not "
            f"match the tokenizer's {FINGERPRINT}")
    return ckpt


def transfer_encoder(source: Checkpoint, target_model) -> None:
    """Copy the pre-trained encoder weights into a fine-tuning model."""
    if source.fingerprint != FINGERPRINT:
        raise CheckpointError("refusing to transfer from a mismatched vocab")
    encoder_state = {k[len("encoder."):]: v for k, v in source.state.items()
                     if k.startswith("encoder.")}
    target_model.encoder.load_state_dict(encoder_state)
