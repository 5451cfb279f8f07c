"""Toy-scale trainer for the reda compound-token sequence formats."""
from .checkpoint import (Checkpoint, CheckpointError, load_checkpoint,
                         save_checkpoint, transfer_encoder)
from .data import load_nr, load_pretrain, load_r2f
from .finetune import finetune_nr, finetune_r2f, generate
from .model import MLMModel, ModelConfig, NRModel, R2FModel
from .pretrain import pretrain
from .vocab import FINGERPRINT, REGULAR_SIZES, SEQ_LEN, VOCAB_SIZES

__version__ = "0.1.0"
