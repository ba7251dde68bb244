"""Python bindings for the PACRR re-ranking core."""

from ._pacrr import (
    ConfigError,
    DataError,
    Model,
    cosine,
    distill_firstk,
    distill_kwindow,
    err_at_k,
    eval,
    gradcheck,
    hinge_loss,
    kmax_per_row,
    kwindow_selection,
    ndcg_at_k,
    pair_accuracy,
    pairacc,
    rerank,
    sim_matrix,
    synth,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "cosine",
    "distill_firstk",
    "distill_kwindow",
    "err_at_k",
    "eval",
    "gradcheck",
    "hinge_loss",
    "kmax_per_row",
    "kwindow_selection",
    "ndcg_at_k",
    "pair_accuracy",
    "pairacc",
    "rerank",
    "sim_matrix",
    "synth",
    "train",
]
