"""Command-line entry point.

Subcommands: ``decode`` (one question), ``eval`` (score a dataset),
``sweep`` (EM versus gold-document position), ``analyze`` (entropy-gap or
per-layer profile).  Exit codes: 0 success, 1 runtime failure, 2 usage or
configuration error.  Every run embeds its fully resolved configuration in
the JSON it emits; errors go to stderr as one-line JSON objects.
"""

import argparse
import csv
import dataclasses
import json
import sys
from typing import Optional

from .backend import Backend
from .backend.mock import MockBackend, MockModelSpec
from .backend.remote import RemoteBackend
from .config import get_preset, load_config_file, merge_config, parse_layer_spec
from .contrast import LayerStrategy
from .decoder import DecodeConfig, decode
from .errors import ConfigurationError, EntragError, PromptError
from .evaluation import (
    first_token_entropy_gap,
    layer_entropy_profile,
    load_dataset,
    position_sweep,
    run_eval,
)
from .prompting import Document

__all__ = ["main", "build_parser"]

_USAGE_ERRORS = (ConfigurationError, PromptError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrag",
        description="Retrieval-augmented decoding with entropy-weighted "
        "ensembles and layer-contrastive refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--method", choices=[
            "naive", "avg_ens", "replug", "leens", "clehe", "cad", "closed_book",
        ])
        p.add_argument("--tau", type=float, help="entropy-weight temperature")
        p.add_argument("--beta", type=float, help="contrast strength")
        p.add_argument("--layers", help="candidate layers, e.g. '18-32:even' or '2,4,6'")
        p.add_argument(
            "--layer-strategy",
            help="max-entropy (default), last, max-jsd, or fixed:N",
        )
        p.add_argument("--preset", help="named hyperparameter preset")
        p.add_argument("--backend", choices=["mock", "remote"])
        p.add_argument("--base-url", help="remote backend URL")
        p.add_argument("--seed", type=int, help="mock backend seed")
        p.add_argument("--mock-spec", help="JSON file describing the mock model")
        p.add_argument("--max-new-tokens", type=int)
        p.add_argument("--overflow", choices=["skip", "truncate", "error"])
        p.add_argument("--top-k", type=int, help="use only the first K documents")
        p.add_argument("--parallelism", type=int, help="forward fan-out threads per step")
        p.add_argument("--out", help="output file path")
        p.add_argument("--trace", action="store_true", help="include per-step traces")
        p.add_argument("--config", help="TOML file of option defaults; flags win")

    p_decode = sub.add_parser("decode", help="answer a single question")
    add_common(p_decode)
    p_decode.add_argument("--question")
    p_decode.add_argument("--docs", help="JSONL file of document objects")
    p_decode.add_argument("--dataset", help="JSONL dataset (use with --id)")
    p_decode.add_argument("--id", help="example id to pick from --dataset")

    p_eval = sub.add_parser("eval", help="score a dataset with exact match")
    add_common(p_eval)
    p_eval.add_argument("--dataset", help="JSONL dataset path")

    p_sweep = sub.add_parser("sweep", help="EM as the gold document moves through positions")
    add_common(p_sweep)
    p_sweep.add_argument("--dataset", help="JSONL dataset path (needs oracle labels)")

    p_analyze = sub.add_parser("analyze", help="entropy-gap or per-layer profile")
    add_common(p_analyze)
    p_analyze.add_argument("--dataset", help="JSONL dataset path (needs oracle labels)")
    p_analyze.add_argument(
        "--analysis", choices=["entropy-gap", "layer-profile"], default="entropy-gap"
    )

    return parser


_OVERFLOW_MAP = {"skip": "skip", "truncate": "truncate_documents", "error": "error"}


def _resolve(args: argparse.Namespace) -> dict:
    """Merge config file, preset and flags into one resolved options dict."""
    flag_values = {
        k: getattr(args, k, None)
        for k in (
            "method", "tau", "beta", "layers", "layer_strategy", "preset",
            "backend", "base_url", "seed", "mock_spec", "max_new_tokens",
            "overflow", "top_k", "parallelism", "out", "dataset", "docs",
            "question",
        )
    }
    file_values = load_config_file(args.config) if args.config else {}
    opts = merge_config(file_values, flag_values)

    preset = None
    if opts.get("preset"):
        preset = get_preset(opts["preset"])
    opts.setdefault("method", "leens")
    if opts.get("tau") is None:
        opts["tau"] = preset.tau if preset else 0.1
    if opts.get("beta") is None:
        opts["beta"] = preset.beta if preset else 0.25
    if opts.get("layers") is None and preset:
        opts["layers"] = ",".join(str(l) for l in preset.candidate_layers)
    opts.setdefault("layer_strategy", "max-entropy")
    opts.setdefault("backend", "mock")
    opts.setdefault("seed", None)
    opts.setdefault("max_new_tokens", 32)
    opts.setdefault("overflow", "skip")
    opts.setdefault("parallelism", 0)
    opts["trace"] = bool(getattr(args, "trace", False) or opts.get("trace", False))
    if opts["backend"] == "remote" and not opts.get("base_url"):
        raise ConfigurationError("--base-url is required with --backend remote")
    if opts["overflow"] not in _OVERFLOW_MAP:
        raise ConfigurationError(f"unknown overflow policy {opts['overflow']!r}")
    return opts


def _layer_strategy(opts: dict) -> LayerStrategy:
    candidates = parse_layer_spec(opts["layers"]) if opts.get("layers") else None
    name = opts["layer_strategy"]
    if name == "max-entropy":
        return LayerStrategy.max_entropy(candidates)
    if name == "last":
        return LayerStrategy.last_layer()
    if name == "max-jsd":
        return LayerStrategy.max_jsd(candidates)
    if name.startswith("fixed:"):
        try:
            layer = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad fixed layer in {name!r}") from None
        return LayerStrategy.fixed(layer)
    raise ConfigurationError(
        f"unknown layer strategy {name!r}; expected max-entropy, last, max-jsd or fixed:N"
    )


def _decode_config(opts: dict) -> DecodeConfig:
    return DecodeConfig(
        method=opts["method"],
        tau=float(opts["tau"]),
        beta=float(opts["beta"]),
        layer_strategy=_layer_strategy(opts),
        max_new_tokens=int(opts["max_new_tokens"]),
        overflow_policy=_OVERFLOW_MAP[opts["overflow"]],
        fanout_workers=int(opts.get("parallelism") or 0),
    )


def _backend(opts: dict) -> Backend:
    if opts["backend"] == "mock":
        if opts.get("mock_spec"):
            spec = MockModelSpec.from_json_file(opts["mock_spec"])
        else:
            spec = MockModelSpec()
        return MockBackend(spec, seed=opts.get("seed"))
    return RemoteBackend(opts["base_url"])


def _resolved_config_dict(opts: dict, cfg: DecodeConfig) -> dict:
    d = cfg.to_dict()
    d["backend"] = {
        "kind": opts["backend"],
        "base_url": opts.get("base_url"),
        "seed": opts.get("seed"),
        "mock_spec": opts.get("mock_spec"),
    }
    d["preset"] = opts.get("preset")
    d["top_k"] = opts.get("top_k")
    d["dataset"] = opts.get("dataset")
    return d


def _load_docs_file(path: str) -> list[Document]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            text = obj.get("text", obj.get("content"))
            if not isinstance(text, str) or not text:
                raise ConfigurationError(
                    f"{path}:{lineno}: document needs a non-empty 'text' field"
                )
            docs.append(
                Document(
                    content=text,
                    title=obj.get("title"),
                    retriever_score=(
                        float(obj["score"]) if obj.get("score") is not None else None
                    ),
                    is_oracle=bool(obj.get("is_oracle", False)),
                )
            )
    return docs


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_decode(args: argparse.Namespace) -> int:
    opts = _resolve(args)
    cfg = _decode_config(opts)

    if opts.get("dataset") and getattr(args, "id", None):
        examples = load_dataset(opts["dataset"])
        matches = [ex for ex in examples if ex.id == args.id]
        if not matches:
            raise ConfigurationError(f"no example with id {args.id!r} in {opts['dataset']}")
        question, docs = matches[0].question, list(matches[0].documents)
    else:
        if not opts.get("question"):
            raise ConfigurationError("decode needs --question with --docs, or --dataset with --id")
        question = opts["question"]
        docs = _load_docs_file(opts["docs"]) if opts.get("docs") else []

    if opts.get("top_k") is not None:
        docs = docs[: int(opts["top_k"])]

    backend = _backend(opts)
    try:
        result = decode(question, docs, cfg, backend)
    finally:
        backend.close()

    payload = {
        "answer": result.answer,
        "stop_reason": result.stop_reason,
        "skipped": result.skipped,
        "tokens": result.tokens,
        "config": _resolved_config_dict(opts, cfg),
    }
    if opts["trace"]:
        payload["trace"] = result.trace.to_dicts()
    _emit(payload, opts.get("out"))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    opts = _resolve(args)
    if not opts.get("dataset"):
        raise ConfigurationError("eval needs --dataset")
    cfg = _decode_config(opts)
    examples = load_dataset(opts["dataset"])
    backend = _backend(opts)
    run_config = _resolved_config_dict(opts, cfg)
    try:
        report = run_eval(
            examples,
            cfg,
            backend,
            top_k=opts.get("top_k"),
            keep_traces=opts["trace"],
            run_config=run_config,
        )
    finally:
        backend.close()
    if opts.get("out"):
        report.write(opts["out"])
    aggregate = report.aggregate_dict()
    print(json.dumps(aggregate, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    opts = _resolve(args)
    if not opts.get("dataset"):
        raise ConfigurationError("sweep needs --dataset")
    cfg = _decode_config(opts)
    examples = load_dataset(opts["dataset"])
    if opts.get("top_k") is not None:
        examples = [
            dataclasses.replace(ex, documents=ex.documents[: int(opts["top_k"])])
            for ex in examples
        ]
    backend = _backend(opts)
    run_config = _resolved_config_dict(opts, cfg)
    try:
        result = position_sweep(examples, cfg, backend, run_config=run_config)
    finally:
        backend.close()
    if opts.get("out"):
        _write_csv(
            opts["out"],
            ["position", "em"],
            [[pos, em] for pos, em in sorted(result["em_by_position"].items())],
        )
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    opts = _resolve(args)
    if not opts.get("dataset"):
        raise ConfigurationError("analyze needs --dataset")
    cfg = _decode_config(opts)
    examples = load_dataset(opts["dataset"])
    backend = _backend(opts)
    run_config = _resolved_config_dict(opts, cfg)
    try:
        if args.analysis == "entropy-gap":
            rows = first_token_entropy_gap(examples, cfg, backend)
            payload = {"analysis": "entropy-gap", "rows": rows, "config": run_config}
            if opts.get("out"):
                _write_csv(
                    opts["out"],
                    ["id", "oracle_entropy", "mean_distractor_entropy", "gap"],
                    [
                        [r["id"], r.get("oracle_entropy"), r.get("mean_distractor_entropy"), r["gap"]]
                        for r in rows
                        if not r["skipped"]
                    ],
                )
        else:
            layers = (
                parse_layer_spec(opts["layers"])
                if opts.get("layers")
                else cfg.layer_strategy.resolve(backend.meta().num_layers)
            )
            rows = layer_entropy_profile(examples, cfg, backend, layers)
            payload = {"analysis": "layer-profile", "rows": rows, "config": run_config}
            if opts.get("out"):
                _write_csv(
                    opts["out"],
                    ["layer", "em", "mean_step_entropy"],
                    [[r["layer"], r["em"], r["mean_step_entropy"]] for r in rows],
                )
    finally:
        backend.close()
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "decode": cmd_decode,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        _print_error(exc)
        return 2
    except EntragError as exc:
        _print_error(exc)
        return 1
    except OSError as exc:
        _print_error(exc)
        return 1


def _print_error(exc: Exception) -> None:
    print(
        json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
