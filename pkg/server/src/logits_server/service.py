"""Request handling: validation, tokenization, forwards, layer projections."""

import os
import threading

import torch

from .config import ServerConfig
from .model import load_model

__all__ = ["ProtocolError", "LogitsService"]


class ProtocolError(Exception):
    """Client-visible failure; serialized as {"error": {"code", "message"}}."""

    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class LogitsService:
    """One model instance behind the wire protocol.

    Stateless across requests; forwards are serialized with a lock so a
    single model instance never runs two at once (protocol-level
    concurrency is the client's job).  All responses are pure functions of
    the request: the model runs in inference mode with no sampling and no
    caching, so identical requests produce identical bytes.
    """

    def __init__(self, config: ServerConfig):
        self._config = config
        self._loaded = load_model(config.model_dir, config.device)
        self._lock = threading.Lock()
        base = os.path.basename(os.path.normpath(config.model_dir))
        self._name = f"{base}:{config.projection}-lens"

    @property
    def name(self) -> str:
        return self._name

    def meta(self) -> dict:
        m = self._loaded
        body = {
            "vocab_size": m.vocab_size,
            "num_layers": m.num_layers,
            "max_context": m.max_context,
            "name": self._name,
        }
        if m.eos_token_id is not None:
            body["eos_token_id"] = int(m.eos_token_id)
        return body

    def tokenize(self, text: str) -> dict:
        return {"tokens": list(text.encode("utf-8"))}

    def detokenize(self, tokens: list) -> dict:
        self._check_token_range(tokens)
        return {"text": bytes(tokens).decode("utf-8", errors="replace")}

    def forward(self, tokens: list, layers: list) -> dict:
        m = self._loaded
        if not tokens:
            raise ProtocolError("context_length", "token sequence is empty")
        if len(tokens) > m.max_context:
            raise ProtocolError(
                "context_length",
                f"{len(tokens)} tokens exceed max_context {m.max_context}",
            )
        self._check_token_range(tokens)
        for layer in layers:
            if not 1 <= layer <= m.num_layers:
                raise ProtocolError(
                    "invalid_layer",
                    f"layer {layer} outside 1..{m.num_layers}",
                )

        with self._lock, torch.inference_mode():
            ids = torch.tensor([tokens], dtype=torch.long, device=self._config.device)
            out = m.model(ids, output_hidden_states=bool(layers))
            body = {"final": out.logits[0, -1].float().tolist()}
            if layers:
                body["layers"] = {
                    str(layer): self._project(out.hidden_states[layer][0, -1], layer)
                    for layer in layers
                }
        return body

    def _project(self, hidden, layer: int) -> list:
        m = self._loaded
        # The model applies its final normalization before recording the
        # last entry of hidden_states, so the deepest layer projects
        # directly; re-normalizing it would double-apply.
        if layer < m.num_layers and self._config.projection == "postnorm":
            hidden = m.final_norm(hidden)
        return m.head(hidden).float().tolist()

    def _check_token_range(self, tokens: list) -> None:
        vocab = self._loaded.vocab_size
        for token in tokens:
            if not 0 <= token < vocab:
                raise ProtocolError(
                    "invalid_token", f"token {token} outside 0..{vocab - 1}"
                )
