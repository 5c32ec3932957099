"""Contextual biasing toolkit for CTC posteriors."""

from ._core import (
    ConfigError,
    DomainError,
    OracleRefusedError,
    ParseError,
    __version__,
    ctc_loss,
    ctc_loss_oracle,
    prefix_beam_decode,
    psc,
    run_cli,
    score,
    selfcheck,
    soc,
    soc_oracle,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "OracleRefusedError",
    "ParseError",
    "__version__",
    "ctc_loss",
    "ctc_loss_oracle",
    "prefix_beam_decode",
    "psc",
    "run_cli",
    "score",
    "selfcheck",
    "soc",
    "soc_oracle",
]
