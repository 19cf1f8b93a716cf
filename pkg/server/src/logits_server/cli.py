"""Command line front end: serve a model directory, or build the tiny test model."""

import argparse
import sys

from .config import PROJECTION_CONVENTIONS, ServerConfig

__all__ = ["main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logits-server",
        description="HTTP server exposing next-token logits and per-layer projections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="serve a local model directory")
    serve.add_argument("--model", required=True, help="path to model artifacts")
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8600)
    serve.add_argument(
        "--projection",
        choices=PROJECTION_CONVENTIONS,
        default="postnorm",
        help="intermediate-layer projection convention",
    )

    make = sub.add_parser("make-model", help="build the seeded tiny byte-vocabulary model")
    make.add_argument("--out", required=True, help="output directory")
    make.add_argument("--seed", type=int, default=0)
    make.add_argument("--layers", type=int, default=4)
    make.add_argument("--embed", type=int, default=64)
    make.add_argument("--heads", type=int, default=4)
    make.add_argument("--positions", type=int, default=1024)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "make-model":
        from .model import make_tiny_model

        out = make_tiny_model(
            args.out,
            seed=args.seed,
            n_layer=args.layers,
            n_embd=args.embed,
            n_head=args.heads,
            n_positions=args.positions,
        )
        print(out)
        return 0

    import uvicorn

    from .app import create_app
    from .service import LogitsService

    config = ServerConfig(
        model_dir=args.model,
        device=args.device,
        host=args.host,
        port=args.port,
        projection=args.projection,
    )
    service = LogitsService(config)
    print(f"serving {service.name} on http://{config.host}:{config.port}", file=sys.stderr)
    uvicorn.run(create_app(service), host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
