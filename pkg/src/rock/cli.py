"""Command-line client for the pipeline service.

The CLI is a thin HTTP client: every command builds a request and sends it
to the FastAPI app, in-process by default or to a remote server given with
``--server``.  Failures print a single machine-parsable line
``error category=<token>: <detail>`` and exit with code 2 for schema errors,
1 otherwise.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from . import __version__
from .config import load_config
from .errors import ConfigError, RockError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rock",
        description="Learn ODE vector fields and evolution PDEs from trajectories.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument(
            "--config", required=config_required, help="experiment config JSON"
        )
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--output", default=None, help="override output directory")
        p.add_argument("--force", action="store_true", help="ignore cached results")
        p.add_argument("--server", default=None, help="remote service URL")

    add_common(sub.add_parser("generate", help="generate a dataset"))
    add_common(sub.add_parser("train", help="train a model"))

    p = sub.add_parser("evaluate", help="evaluate a stored model")
    p.add_argument("--model", required=True, help="model container path")
    p.add_argument("--test", required=True, help="test dataset directory")
    p.add_argument("--output", default=None, help="report output directory")
    p.add_argument("--method", default="rk4", choices=["rk4", "euler"])
    p.add_argument("--server", default=None)

    add_common(sub.add_parser("sweep", help="two-stage hyperparameter search"))

    p = sub.add_parser("forecast", help="roll a stored model forward")
    p.add_argument("--model", required=True)
    p.add_argument("--x0", default=None, help="comma-separated initial state")
    p.add_argument("--u0", default=None, help="initial field (csv/container/dataset)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--method", default="rk4", choices=["rk4", "euler"])
    p.add_argument("--output", default=None, help="forecast CSV path")
    p.add_argument("--server", default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _config_payload(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output_dir = args.output
    return cfg.canonical_dict()


async def _post(server: str | None, path: str, payload: dict):
    if server:
        client = httpx.AsyncClient(base_url=server, timeout=None)
    else:
        from .service.app import app

        client = httpx.AsyncClient(
            transport=httpx.ASGITransport(app=app),
            base_url="http://rock.internal",
            timeout=None,
        )
    async with client:
        resp = await client.post(path, json=payload)
        try:
            body = resp.json()
        except json.JSONDecodeError:
            body = {"category": "internal", "detail": resp.text}
        return resp.status_code, body


def _call(server, path, payload) -> int:
    status, body = asyncio.run(_post(server, path, payload))
    if status >= 400:
        category = body.get("category", "internal")
        detail = body.get("detail", json.dumps(body))
        print(f"error category={category}: {detail}", file=sys.stderr)
        return 2 if category == "schema" else 1
    print(json.dumps(body, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            import uvicorn

            from .service.app import app

            uvicorn.run(app, host=args.host, port=args.port)
            return 0
        if args.command in ("generate", "train", "sweep"):
            payload = {"config": _config_payload(args), "force": args.force}
            return _call(args.server, f"/{args.command}", payload)
        if args.command == "evaluate":
            payload = {
                "model_path": args.model,
                "test_path": args.test,
                "output_dir": args.output,
                "method": args.method,
            }
            return _call(args.server, "/evaluate", payload)
        if args.command == "forecast":
            x0 = None
            if args.x0 is not None:
                try:
                    x0 = [float(v) for v in args.x0.split(",") if v.strip()]
                except ValueError:
                    raise ConfigError(f"could not parse --x0 {args.x0!r}") from None
            payload = {
                "model_path": args.model,
                "x0": x0,
                "u0_path": args.u0,
                "steps": args.steps,
                "dt": args.dt,
                "method": args.method,
                "output_path": args.output,
            }
            return _call(args.server, "/forecast", payload)
        raise ConfigError(f"unknown command {args.command!r}")  # pragma: no cover
    except RockError as exc:
        print(f"error category={exc.category}: {exc}", file=sys.stderr)
        return 2 if exc.category == "schema" else 1
    except httpx.HTTPError as exc:
        print(f"error category=io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
