"""Command line: serve the model or probe a running endpoint."""

from __future__ import annotations

import argparse
import sys

from . import __version__


def cmd_serve(args) -> int:
    import uvicorn

    from .app import create_app
    from .scorer import AdapterConfig, GreedyScorer

    config = AdapterConfig(
        model_id=args.model,
        device=args.device,
        max_new_tokens=args.max_new_tokens,
        host=args.host,
        port=args.port,
    )
    try:
        scorer = GreedyScorer(config)
    except Exception as exc:  # model load failure: exit nonzero
        print(f"failed to load model {args.model!r}: {exc}", file=sys.stderr)
        return 1
    print(f"serving {scorer.identity} on http://{config.host}:{config.port}")
    uvicorn.run(create_app(scorer), host=config.host, port=config.port, log_level="warning")
    return 0


def cmd_probe(args) -> int:
    from .probe import probe

    report = probe(args.url, args.fixture, timeout=args.timeout)
    text = report.to_text()
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0 if not report.violations else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="commonsense-adapter")
    parser.add_argument("--version", action="version", version=f"commonsense-adapter {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("serve", help="serve a model behind the wire protocol")
    p.add_argument("--model", required=True, help="checkpoint path or hub identifier")
    p.add_argument("--device", default="cpu")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--max-new-tokens", type=int, default=16)
    p.set_defaults(func=cmd_serve)

    p = subs.add_parser("probe", help="run the conformance probe against an endpoint")
    p.add_argument("--url", required=True)
    p.add_argument("--fixture", required=True, help="JSONL file of protocol requests")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--out", help="write the report here as well")
    p.set_defaults(func=cmd_probe)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
