"""Pipelined turbo MIMO-OFDM receiver with soft-decision-directed channel estimation."""

__version__ = "0.1.0"

from . import analysis, channel, decoder, demapper, estimator, pipeline, runner, txchain

__all__ = [
    "analysis",
    "channel",
    "decoder",
    "demapper",
    "estimator",
    "pipeline",
    "runner",
    "txchain",
    "__version__",
]
