"""Command-line front end.

Each subcommand mirrors one request model: every model field becomes a
flag, and an optional flat key=value config file supplies defaults
underneath the flags (precedence flags > file > built-in defaults).  By
default commands run in-process; with --server URL they post the same
request to a running service instead.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import sys
import types
import typing
from pathlib import Path
from typing import Literal, Sequence, Union

import httpx
from pydantic import ValidationError

from . import __version__
from .errors import ConfigError, DsukitError
from .pipeline import (
    run_analyze,
    run_bitrate,
    run_bpe_train,
    run_convert,
    run_encode,
    run_fit,
)
from .schemas import (
    AnalyzeRequest,
    BitrateRequest,
    BpeTrainRequest,
    ConvertRequest,
    EncodeRequest,
    FitRequest,
)

_COMMANDS = {
    "fit": (FitRequest, run_fit, "/fit", "Fit preprocessing and k-means on a corpus."),
    "encode": (EncodeRequest, run_encode, "/encode", "Encode a corpus into unit sequences."),
    "analyze": (AnalyzeRequest, run_analyze, "/analyze", "Centroid and component reports."),
    "bpe-train": (BpeTrainRequest, run_bpe_train, "/bpe/train", "Learn BPE merges from units."),
    "bitrate": (BitrateRequest, run_bitrate, "/bitrate", "Mean bit-rate of a unit file."),
    "convert": (ConvertRequest, run_convert, "/convert", "Import .npy or text into DSUK."),
}

# Keys any command understands; config files may carry keys for several
# commands, but a key no command knows is treated as a typo.
_ALL_KEYS = frozenset(k for model, *_ in _COMMANDS.values() for k in model.model_fields)

_HELP = {
    "manifest": "TSV manifest: id<TAB>path<TAB>frames<TAB>duration_s",
    "outdir": "directory for output artifacts",
    "preprocessing": "linear transform fitted before k-means",
    "metric": "k-means distance",
    "k": "number of clusters",
    "sample_fraction": "fraction of pooled frames used for fitting",
    "ica_iters": "ICA iteration count",
    "seed": "RNG seed for sampling and k-means init",
    "kmeans_max_iters": "Lloyd iteration cap",
    "kmeans_tol": "relative centroid-movement stopping tolerance",
    "fit_on_full": "fit the transform on all frames, not the sample",
    "model_path": "fitted k-means model (.dsum)",
    "transform_path": "fitted transform (.dsut)",
    "bpe_path": "trained BPE merge table",
    "threads": "per-utterance encode parallelism",
    "labels": "segment label TSV: id<TAB>start<TAB>end<TAB>label",
    "bins": "similarity histogram bin count",
    "neighbors": "pooled neighbors listed per centroid",
    "extremes": "segments listed per ICA component direction",
    "units": "unit sequence file",
    "out": "output path",
    "base_vocab": "unit vocabulary size before any merges",
    "vocab_size": "target vocabulary size",
    "dedup": "collapse repeated units before training",
    "input": "source array (.npy or whitespace-separated text)",
    "output": "destination .dsuk path",
}


def _flag_type(ann):
    """Unwrap Optional and map an annotation to argparse settings."""
    if typing.get_origin(ann) in (Union, types.UnionType):
        inner = [a for a in typing.get_args(ann) if a is not type(None)]
        if len(inner) == 1:
            ann = inner[0]
    return ann


def _add_model_flags(parser: argparse.ArgumentParser, model_cls) -> None:
    for name, field in model_cls.model_fields.items():
        ann = _flag_type(field.annotation)
        flag = "--" + name.replace("_", "-")
        help_text = _HELP.get(name, "")
        if ann is bool:
            parser.add_argument(
                flag, action=argparse.BooleanOptionalAction, default=None, help=help_text
            )
        elif typing.get_origin(ann) is Literal:
            parser.add_argument(
                flag, choices=list(typing.get_args(ann)), default=None, help=help_text
            )
        elif ann is int:
            parser.add_argument(flag, type=int, default=None, help=help_text)
        elif ann is float:
            parser.add_argument(flag, type=float, default=None, help=help_text)
        else:
            parser.add_argument(flag, default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsukit", description="Discrete speech unit toolkit.")
    parser.add_argument("--version", action="version", version=f"dsukit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, (model_cls, _, _, summary) in _COMMANDS.items():
        p = sub.add_parser(cmd, help=summary, description=summary)
        p.add_argument("--config", default=None, help="flat key=value file with defaults")
        p.add_argument("--server", default=None, help="run against this service URL")
        _add_model_flags(p, model_cls)
    serve = sub.add_parser("serve", help="Run the HTTP service.")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _read_config(path: str) -> dict[str, str]:
    """Flat key=value lines; # starts a comment; keys may use - or _."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{p}:{lineno}: expected key=value, got {raw.strip()!r}")
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"{p}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{p}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _build_request(cmd: str, model_cls, args: argparse.Namespace):
    file_cfg = _read_config(args.config) if args.config else {}
    unknown = sorted(k for k in file_cfg if k not in _ALL_KEYS)
    if unknown:
        raise ConfigError(f"{args.config}: unknown config keys: {', '.join(unknown)}")
    merged: dict[str, object] = {
        k: v for k, v in file_cfg.items() if k in model_cls.model_fields
    }
    for name in model_cls.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    try:
        return model_cls(**merged)
    except ValidationError as e:
        issues = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or cmd}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{cmd}: {issues}") from None


def _run_remote(server: str, route: str, req) -> int:
    url = server.rstrip("/") + route
    try:
        resp = httpx.post(url, json=req.model_dump(), timeout=600.0)
    except httpx.HTTPError as e:
        raise ConfigError(f"cannot reach server at {url}: {e}") from None
    if resp.status_code == 200:
        print(resp.text)
        return 0
    print(resp.text, file=sys.stderr)
    try:
        return int(resp.json()["exit_code"])
    except (ValueError, KeyError, TypeError):
        return 1


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        model_cls, runner, route, _ = _COMMANDS[args.command]
        req = _build_request(args.command, model_cls, args)
        if args.server:
            return _run_remote(args.server, route, req)
        print(runner(req).model_dump_json(indent=2))
        return 0
    except DsukitError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
