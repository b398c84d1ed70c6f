"""Command-line front end: a thin client over the HTTP service.

Every command talks to the service layer — by default an in-process
instance, or a remote one when ``--server URL`` is given — so the CLI
contains no simulation logic of its own.  ``run`` renders a preset's file
bundle into a directory, ``analytics`` prints the closed-form estimates
table, and ``serve`` starts the service under uvicorn.

Exit codes: 0 on success, 2 for parse errors (the offending line or flag
is named), 3 for constraint violations, 4 for I/O errors.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import sys
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import httpx

from .netsim import SimConfig
from .presets import FIELD_ALIASES, PRESETS

EXIT_PARSE = 2
EXIT_CONSTRAINT = 3
EXIT_IO = 4

# flag name -> SimConfig field (plain fields use their own name)
_ALIASES = FIELD_ALIASES
_FIELD_FLAGS: Dict[str, str] = {}
for _f in dataclasses.fields(SimConfig):
    _FIELD_FLAGS[_f.name] = _f.name
for _alias, _field in _ALIASES.items():
    _FIELD_FLAGS[_alias] = _field
    del _FIELD_FLAGS[_field]


class CliError(Exception):
    """Carries the exit code alongside the message."""

    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _classify(detail: str) -> int:
    if detail.startswith("parse-error"):
        return EXIT_PARSE
    if detail.startswith("constraint-violation"):
        return EXIT_CONSTRAINT
    return 1


@contextlib.contextmanager
def _client(server: Optional[str]) -> Iterator[httpx.Client]:
    """Yield an HTTP client: remote when a URL is given, else in-process."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            yield client
        return
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")
        from fastapi.testclient import TestClient

    from .service import app

    with TestClient(app) as client:
        yield client


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"io-error: {exc}", EXIT_IO) from exc
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text)
        raise CliError(str(detail), _classify(str(detail)))
    return resp.json()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="betdag", description="Betting-consensus simulator front end."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Render a preset's file bundle into a directory.")
    run.add_argument("--preset", required=True, choices=sorted(PRESETS), help="Experiment preset name.")
    run.add_argument("--out", required=True, help="Output directory (created if missing).")
    run.add_argument("--config", help="Flat key=value config file; flags override it.")
    run.add_argument("--server", help="Service URL; defaults to an in-process service.")
    for flag, field in sorted(_FIELD_FLAGS.items()):
        run.add_argument(
            f"--{flag.replace('_', '-')}",
            dest=f"cfg_{field}",
            metavar="VALUE",
            help=f"Override the {field} config field.",
        )

    an = sub.add_parser("analytics", help="Print the closed-form estimates table.")
    an.add_argument("--n", type=int, default=150, help="Total player count.")
    an.add_argument(
        "--n-c",
        dest="n_c",
        type=float,
        action="append",
        help="Coalition size; repeat for several rows (default: 37.5 and 50).",
    )
    an.add_argument("--k", type=int, default=3, help="Fork-size tolerance of the labelling rule.")
    an.add_argument("--pun", type=float, default=6.0, help="Losing-bet penalty.")
    an.add_argument("--c", type=float, default=1.0, help="Winning-block reward.")
    an.add_argument("--server", help="Service URL; defaults to an in-process service.")

    srv = sub.add_parser("serve", help="Start the HTTP service.")
    srv.add_argument("--host", default="127.0.0.1", help="Bind address.")
    srv.add_argument("--port", type=int, default=8000, help="Bind port.")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config_text = None
    if args.config:
        try:
            config_text = Path(args.config).read_text()
        except OSError as exc:
            raise CliError(f"io-error: cannot read {args.config}: {exc}", EXIT_IO) from exc
    overrides = {
        field: value
        for field in _FIELD_FLAGS.values()
        if (value := getattr(args, f"cfg_{field}")) is not None
    }
    with _client(args.server) as client:
        body = _post(
            client,
            f"/presets/{args.preset}",
            {"config_text": config_text, "overrides": overrides},
        )
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(body["files"]):
            (out_dir / name).write_text(body["files"][name])
    except OSError as exc:
        raise CliError(f"io-error: cannot write to {args.out}: {exc}", EXIT_IO) from exc
    for name in sorted(body["files"]):
        print(out_dir / name)
    return 0


def _cmd_analytics(args: argparse.Namespace) -> int:
    payload = {
        "n": args.n,
        "sizes": args.n_c if args.n_c else [37.5, 50.0],
        "k": args.k,
        "pun": args.pun,
        "c": args.c,
    }
    with _client(args.server) as client:
        body = _post(client, "/analytics", payload)
    rows = [line.split(",") for line in body["csv"].splitlines()]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "analytics": _cmd_analytics, "serve": _cmd_serve}
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
