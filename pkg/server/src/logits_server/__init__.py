"""Reference HTTP server for the remote logits protocol.

Loads a local causal language model and exposes next-token logits plus
per-layer logit projections over four JSON endpoints (/v1/meta,
/v1/tokenize, /v1/detokenize, /v1/forward).
"""

from .app import create_app
from .config import PROJECTION_CONVENTIONS, ServerConfig
from .model import LoadedModel, load_model, make_tiny_model
from .service import LogitsService, ProtocolError

__version__ = "0.1.0"

__all__ = [
    "PROJECTION_CONVENTIONS",
    "ServerConfig",
    "LoadedModel",
    "load_model",
    "make_tiny_model",
    "LogitsService",
    "ProtocolError",
    "create_app",
    "__version__",
]
