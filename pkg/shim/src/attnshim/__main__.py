"""Command-line entry: load a checkpoint and serve it."""

import argparse

import uvicorn

from .app import create_app
from .service import ShimConfig, load_service


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attnshim",
        description="Serve a transformer's per-head last-token attention over HTTP.",
    )
    parser.add_argument("--model", required=True,
                        help="checkpoint path or hub identifier")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-input-tokens", dest="max_input_tokens",
                        type=int, default=4096)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8301)
    ns = parser.parse_args(argv)
    config = ShimConfig(
        model=ns.model, device=ns.device, max_input_tokens=ns.max_input_tokens,
        host=ns.host, port=ns.port,
    )
    app = create_app(loader=lambda: load_service(config))
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
