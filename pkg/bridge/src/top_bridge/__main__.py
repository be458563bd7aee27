"""Run the bridge: `python -m top_bridge --config bridge.json`.

Environment overrides: BRIDGE_PORT, BRIDGE_MLM, BRIDGE_PARSER.
"""

import argparse
import logging

import uvicorn

from .config import load_config
from .service import create_app


def main() -> None:
    parser = argparse.ArgumentParser(prog="top-bridge")
    parser.add_argument("--config", help="JSON config file (see README)")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    config = load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
