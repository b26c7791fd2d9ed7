"""Latent flow transformer: optimal-transport diagnostics, flow training on
toy data, and teacher inspection, backed by the float64 C++ core."""

from ._lft import (
    ContractError,
    DimensionError,
    InputError,
    Teacher,
    ToyRun,
    __version__,
    cost_matrix,
    gen_pairs,
    kl_categorical,
    load_checkpoint,
    load_teacher,
    make_corpus,
    nmse,
    ot_assign,
    pair_preservation,
    perplexity,
    recoupling_ratio,
    run_toy,
    straightness,
)

__all__ = [
    "ContractError",
    "DimensionError",
    "InputError",
    "Teacher",
    "ToyRun",
    "__version__",
    "cost_matrix",
    "gen_pairs",
    "kl_categorical",
    "load_checkpoint",
    "load_teacher",
    "make_corpus",
    "nmse",
    "ot_assign",
    "pair_preservation",
    "perplexity",
    "recoupling_ratio",
    "run_toy",
    "straightness",
]
