"""Token vocabulary layout shared with the reda tokenizer.

The trainer only ever sees 4-integer token ids; this module pins down the
per-dimension vocabulary sizes and the special-token ids, and carries the
fingerprint used to refuse checkpoints trained against a different layout.
"""
from __future__ import annotations

from reda.tokenizer import vocab_spec

DIMS = ("bar", "position", "pitch", "duration")

_SPEC = vocab_spec()
FINGERPRINT: str = _SPEC["fingerprint"]
VOCAB_SIZES = tuple(_SPEC[d]["size"] for d in DIMS)
REGULAR_SIZES = tuple(_SPEC[d]["regular"] for d in DIMS)
SPECIAL_IDS = {
    name: tuple(_SPEC[d]["specials"][name] for d in DIMS)
    for name in _SPEC[DIMS[0]]["specials"]
}
BOS_IDS = SPECIAL_IDS["BOS"]
EOS_IDS = SPECIAL_IDS["EOS"]
PAD_IDS = SPECIAL_IDS["PAD"]

IGNORE = -1
SEQ_LEN = 512


def coerce_token(per_dim_argmax, per_dim_regular_argmax):
    """Snap raw per-dimension argmaxes to a well-formed token.

    The four classification heads are independent, so early in training
    they can disagree about whether a position is special. The bar
    dimension decides: a special bar id selects that special token in
    every dimension, otherwise the other dimensions use their best
    *regular* id.
    """
    bar = int(per_dim_argmax[0])
    if bar >= REGULAR_SIZES[0]:
        for name, ids in SPECIAL_IDS.items():
            if ids[0] == bar:
                return ids
        raise ValueError(f"impossible bar id {bar}")
    return (bar,) + tuple(int(v) for v in per_dim_regular_argmax[1:])
