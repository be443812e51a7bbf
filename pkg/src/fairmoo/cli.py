"""Command-line client. Talks to a running server (``--server`` or ``FAIRMOO_SERVER``) or to an in-process app."""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import httpx

SERVER_ENV = "FAIRMOO_SERVER"


class CLIError(RuntimeError):
    pass


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path} is not valid JSON: {exc}") from exc


def _post(client, route: str, payload: dict) -> dict:
    resp = client.post(route, json=payload)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise CLIError(f"{route} failed ({resp.status_code}): {detail}")
    return resp.json()


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_train(args, client) -> int:
    _emit(_post(client, "/train", {"config": _read_json(args.config), "write": not args.no_write}))
    return 0


def cmd_eval(args, client) -> int:
    _emit(_post(client, "/eval", {"config": _read_json(args.config), "checkpoint": args.checkpoint}))
    return 0


def cmd_compare(args, client) -> int:
    payload = {"configs": [_read_json(p) for p in args.configs], "seeds": args.seeds, "out_root": args.out_root}
    result = _post(client, "/compare", payload)
    if args.json:
        _emit(result)
    else:
        print(result["table"])
    return 0


def cmd_solve_weights(args, client) -> int:
    gram = _read_json(args.gram)
    result = _post(client, "/solve-weights", {"k": gram.get("k"), "entries": gram.get("entries"), "oracle": args.oracle})
    print(json.dumps(result))
    return 0


def cmd_synth(args, client) -> int:
    payload = {"count": args.count, "seed": args.seed, "out_dir": args.out, "image_size": args.image_size,
               "latent_factor": args.latent_factor, "eval_count": args.eval_count}
    _emit(_post(client, "/synth", payload))
    return 0


def cmd_gradcheck(args, client) -> int:
    result = _post(client, "/gradcheck", {"seed": args.seed, "count": args.count})
    _emit(result)
    return 0 if result["passed"] else 1


def cmd_serve(args, _client_unused) -> int:
    import uvicorn

    uvicorn.run("fairmoo.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairmoo", description=__doc__)
    p.add_argument("--server", default=os.environ.get(SERVER_ENV),
                   help=f"base URL of a running service (default: ${SERVER_ENV}, else in-process)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="run one training job")
    s.add_argument("--config", required=True)
    s.add_argument("--no-write", action="store_true", help="skip writing the run directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a saved adapter checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", help="train several strategies on matched configs and tabulate")
    s.add_argument("--configs", nargs="+", required=True)
    s.add_argument("--seeds", nargs="+", type=int)
    s.add_argument("--out-root")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("solve-weights", help="fair weights for a Gram matrix")
    s.add_argument("--gram", required=True)
    s.add_argument("--oracle", action="store_true", help="use the numerical least-squares solver")
    s.set_defaults(func=cmd_solve_weights)

    s = sub.add_parser("synth", help="export a synthetic dataset")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--image-size", type=int, default=32)
    s.add_argument("--latent-factor", type=int, default=1)
    s.add_argument("--eval-count", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return args.func(args, None)
        with _client(args.server) as client:
            return args.func(args, client)
    except (CLIError, httpx.HTTPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
