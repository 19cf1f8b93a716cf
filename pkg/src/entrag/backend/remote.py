"""HTTP client for the remote logits protocol.

Endpoints (JSON bodies, UTF-8):

* ``POST /v1/meta``        -> {"vocab_size", "num_layers", "max_context", "name"}
* ``POST /v1/tokenize``    {"text"}   -> {"tokens": [int]}
* ``POST /v1/detokenize``  {"tokens"} -> {"text": str}
* ``POST /v1/forward``     {"tokens", "layers"} -> {"final": [float],
  "layers": {"<idx>": [float]}}

Hosts serialize logits from 32-bit floats; the engine widens to float64 on
arrival.  Errors come back as {"error": {"code", "message"}} with a 4xx/5xx
status; the code string is mapped onto the engine's exception types.
"""

from typing import Iterable, Sequence

import httpx
import numpy as np

from ..errors import (
    BackendError,
    BackendUnavailableError,
    ContextLengthError,
    InvalidLayerError,
    InvalidTokenError,
)
from . import Backend, BackendMeta, ForwardResponse

__all__ = ["RemoteBackend"]

_ERROR_CODES = {
    "context_length": ContextLengthError,
    "invalid_layer": InvalidLayerError,
    "invalid_token": InvalidTokenError,
}


class RemoteBackend(Backend):
    """Client for a remote logits host.

    The underlying httpx client is thread-safe, so one RemoteBackend can
    multiplex the decoder's per-step fan-out; the host decides how many
    requests it actually runs concurrently.
    """

    def __init__(self, base_url: str, timeout: float = 60.0):
        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)
        self._meta = self._fetch_meta()

    def meta(self) -> BackendMeta:
        return self._meta

    def tokenize(self, text: str) -> list[int]:
        body = self._post("/v1/tokenize", {"text": text})
        return [int(t) for t in body["tokens"]]

    def detokenize(self, ids: Sequence[int]) -> str:
        body = self._post("/v1/detokenize", {"tokens": [int(t) for t in ids]})
        return body["text"]

    def forward(self, tokens: Sequence[int], layers: Iterable[int] = ()) -> ForwardResponse:
        body = self._post(
            "/v1/forward",
            {"tokens": [int(t) for t in tokens], "layers": [int(l) for l in layers]},
        )
        final = np.asarray(body["final"], dtype=np.float64)
        per_layer = {
            int(idx): np.asarray(vals, dtype=np.float64)
            for idx, vals in body.get("layers", {}).items()
        }
        return ForwardResponse(final=final, per_layer=per_layer)

    def close(self) -> None:
        self._client.close()

    # -- internals ---------------------------------------------------------

    def _fetch_meta(self) -> BackendMeta:
        body = self._post("/v1/meta", {})
        eos = body.get("eos_token_id")
        return BackendMeta(
            vocab_size=int(body["vocab_size"]),
            num_layers=int(body["num_layers"]),
            max_context=int(body["max_context"]),
            name=str(body["name"]),
            eos_token_id=None if eos is None else int(eos),
        )

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(f"backend unreachable at {path}: {exc}") from exc
        if resp.status_code >= 400:
            raise self._error_from(resp, path)
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"malformed JSON from {path}") from exc

    @staticmethod
    def _error_from(resp: httpx.Response, path: str) -> Exception:
        code, message = "unknown", resp.text[:200]
        try:
            err = resp.json().get("error", {})
            code = err.get("code", code)
            message = err.get("message", message)
        except ValueError:
            pass
        exc_type = _ERROR_CODES.get(code, BackendError)
        exc = exc_type(f"{path} failed ({resp.status_code}, {code}): {message}")
        return exc
