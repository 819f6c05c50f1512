# SPDX-License-Identifier: Apache-2.0
"""Text-conditioned SMILES embedding diffusion."""

from ._core import (
    SmidiffError,
    Vocabulary,
    bleu,
    build_vocab,
    corrupt,
    decode,
    encode,
    evaluate,
    generate,
    levenshtein,
    posterior_coefficients,
    run_cli,
    schedule,
    split_tokens,
    synth_dataset,
    tanimoto,
    validate,
)

__all__ = [
    "SmidiffError",
    "Vocabulary",
    "bleu",
    "build_vocab",
    "corrupt",
    "decode",
    "encode",
    "evaluate",
    "generate",
    "levenshtein",
    "posterior_coefficients",
    "run_cli",
    "schedule",
    "split_tokens",
    "synth_dataset",
    "tanimoto",
    "validate",
]
