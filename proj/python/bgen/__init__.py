"""Python facade over the bgen core: corpus synthesis, training, decoding,
evaluation, and ablations, plus the BLEU / schedule primitives.

Command wrappers take a config dict (same schema as the CLI JSON files) and
an output directory, and return the run's report as a dict.
"""

import json

from ._core import (
    Vocabulary,
    bleu,
    lr_at,
    checkpoint_info as _checkpoint_info,
    synthdata_json as _synthdata_json,
    train_json as _train_json,
    decode_json as _decode_json,
    eval_json as _eval_json,
    ablate_json as _ablate_json,
)

__all__ = [
    "Vocabulary",
    "bleu",
    "lr_at",
    "checkpoint_info",
    "synthdata",
    "train",
    "decode",
    "evaluate",
    "ablate",
]


def checkpoint_info(path):
    """Checkpoint metadata: step, model config, task registry, tensor names."""
    return json.loads(_checkpoint_info(path))


def synthdata(config, out):
    """Synthesize task corpora; returns the emitted artifact paths."""
    return json.loads(_synthdata_json(json.dumps(config), out))


def train(config, out):
    """Run the training loop; returns the summary (steps, checkpoint, logs)."""
    return json.loads(_train_json(json.dumps(config), out))


def decode(config, out):
    """Greedy-decode a corpus under a checkpoint; returns the hypotheses path."""
    return json.loads(_decode_json(json.dumps(config), out))


def evaluate(config, out):
    """Score hypotheses or run the congruence / zero-shot protocols."""
    return json.loads(_eval_json(json.dumps(config), out))


def ablate(config, out):
    """Run the initialization or multi-task ablation; returns variants + summary path."""
    return json.loads(_ablate_json(json.dumps(config), out))
