"""Server configuration."""

from dataclasses import dataclass

__all__ = ["ServerConfig", "PROJECTION_CONVENTIONS"]

PROJECTION_CONVENTIONS = ("postnorm", "prenorm")


@dataclass(frozen=True)
class ServerConfig:
    """How to load and expose one model.

    ``model_dir`` points at a local directory of causal-LM artifacts
    (config + weights).  ``projection`` picks the convention for projecting
    intermediate hidden states through the output head: ``postnorm`` applies
    the model's final normalization first, ``prenorm`` projects the raw
    block output.  The convention is recorded in the advertised model name
    so clients can tell what they are getting.  Batching is intentionally
    fixed at one request per forward.
    """

    model_dir: str
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8600
    projection: str = "postnorm"
    max_batch: int = 1

    def __post_init__(self):
        if self.projection not in PROJECTION_CONVENTIONS:
            raise ValueError(
                f"projection must be one of {PROJECTION_CONVENTIONS}, got {self.projection!r}"
            )
        if self.max_batch != 1:
            raise ValueError("this server serves exactly one request per forward")
