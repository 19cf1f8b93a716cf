"""FastAPI wiring for the wire protocol.

Request bodies are parsed and validated by hand rather than through
response models so every failure, including malformed JSON and wrong field
types, comes back in the protocol's own error shape:

    {"error": {"code": ..., "message": ...}}

with a 4xx status.  Recognized codes: ``context_length``,
``invalid_layer``, ``invalid_token``; anything else (``bad_request``,
``internal``) is a generic failure to clients.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .service import LogitsService, ProtocolError

__all__ = ["create_app"]


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as exc:
        raise ProtocolError("bad_request", f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError("bad_request", "body must be a JSON object")
    return body


def _str_field(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str):
        raise ProtocolError("bad_request", f"{key!r} must be a string")
    return value


def _int_list_field(body: dict, key: str, required: bool = True) -> list:
    value = body.get(key)
    if value is None and not required:
        return []
    if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
        raise ProtocolError("bad_request", f"{key!r} must be a list of integers")
    return value


def create_app(service: LogitsService) -> FastAPI:
    app = FastAPI(title="logits-server", docs_url=None, redoc_url=None)

    @app.exception_handler(ProtocolError)
    async def _protocol_error(_request, exc: ProtocolError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(Exception)
    async def _unexpected_error(_request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"error": {"code": "internal", "message": str(exc)}},
        )

    @app.post("/v1/meta")
    async def meta(request: Request):
        await _json_body(request)
        return service.meta()

    @app.post("/v1/tokenize")
    async def tokenize(request: Request):
        body = await _json_body(request)
        return service.tokenize(_str_field(body, "text"))

    @app.post("/v1/detokenize")
    async def detokenize(request: Request):
        body = await _json_body(request)
        return service.detokenize(_int_list_field(body, "tokens"))

    @app.post("/v1/forward")
    async def forward(request: Request):
        body = await _json_body(request)
        return service.forward(
            _int_list_field(body, "tokens"),
            _int_list_field(body, "layers", required=False),
        )

    return app
