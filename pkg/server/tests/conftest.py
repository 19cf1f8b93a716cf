"""Shared fixtures: the tiny model, a live server, a toy dataset, eval runs."""

import json
import subprocess
import sys
import threading
import time

import pytest

from logits_server import LogitsService, ServerConfig, create_app, make_tiny_model


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny-model") / "model"
    return make_tiny_model(str(out), seed=0)


@pytest.fixture(scope="session")
def service(model_dir):
    return LogitsService(ServerConfig(model_dir=model_dir))


@pytest.fixture(scope="session")
def base_url(service):
    import uvicorn

    config = uvicorn.Config(
        create_app(service), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 60
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server failed to start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """20 questions, 4 short scored documents each; fits the tiny context."""
    path = tmp_path_factory.mktemp("data") / "toy.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(20):
            docs = []
            for j in range(4):
                docs.append(
                    {
                        "title": f"Entry {i}.{j}",
                        "text": (
                            f"Catalogue page {i}{j} lists the item called "
                            f"widget{i} with code {i * 7 + j}."
                        ),
                        "score": float(4 - j),
                        "is_oracle": j == 0,
                    }
                )
            row = {
                "id": f"toy-{i:02d}",
                "question": f"What is the name of item {i}?",
                "answers": [f"widget{i}"],
                "documents": docs,
            }
            fh.write(json.dumps(row) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def run_eval(base_url, toy_dataset, tmp_path_factory):
    """Run `entrag eval` against the live server once per distinct invocation.

    Returns (aggregate, records); results are cached for the session so the
    per-method tests and the cross-method comparisons share runs.
    """
    cache = {}
    outdir = tmp_path_factory.mktemp("records")

    def _run(method, *extra):
        key = (method,) + extra
        if key not in cache:
            records_path = outdir / ("-".join(key).replace("/", "_") + ".jsonl")
            cmd = [
                sys.executable, "-m", "entrag.cli", "eval",
                "--backend", "remote", "--base-url", base_url,
                "--dataset", toy_dataset, "--method", method,
                "--max-new-tokens", "8", "--out", str(records_path), *extra,
            ]
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=900)
            assert proc.returncode == 0, f"{method} eval failed: {proc.stderr}"
            records = [
                json.loads(line)
                for line in records_path.read_text(encoding="utf-8").splitlines()
            ]
            cache[key] = (json.loads(proc.stdout), records)
        return cache[key]

    return _run
