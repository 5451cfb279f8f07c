"""reda: piano reduction toolkit.

MIDI parsing and quantization, Compound-Word tokenization, dataset
preparation for semi-supervised training, skyline extraction, a
rule-based reduction baseline, iterative post-processing, and the
evaluation metrics, all wired together by the ``reda`` CLI.
"""

from .errors import RedaError, MidiParseError, QuantizeError, StructuralError
from .midi import (Note, Score, QNote, QuantizedScore, parse_midi, write_midi,
                   quantize, dequantize, merge_to_single_channel, filter_corpus)
from .tokenizer import (CPToken, tokenize, detokenize, vocab_spec,
                        BOS, EOS, PAD, MASK, ABS)
from .dataset import (TokenSequence, R2FPair, build_pretrain_sequences,
                      apply_mlm_masking, label_keep, build_nr_dataset,
                      build_r2f_dataset)
from .skyline import skyline_top, skyline_bottom, select_melody_track
from .dbm import (AccompanimentEntry, AccompanimentDB, build_accomp_db,
                  detect_bar_chord, match_accompaniment, reduce_dbm)
from .postprocess import cluster_beat, simplify, transpose, postprocess
from .metrics import tonal_similarity, one_sample_ttest, survey_means
from .bridge import (Predictor, ScriptedPredictor, FileReplayPredictor,
                     decode_r2f, apply_keep_mask, r2f_to_score)
from .config import PipelineConfig, load_config

__version__ = "0.1.0"
