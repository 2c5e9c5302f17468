"""Command-line driver: ``compress``, ``sweep`` and ``verify``.

Exit codes: 0 ok, 1 configuration error, 2 data error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import PipelineError, RunConfig, VerificationError, emit_report, run, sweep
from .errors import ConfigError, ContainerError, CorruptStreamError, LoadError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


def _exit_code(exc) -> int:
    cause = exc.cause if isinstance(exc, PipelineError) else exc
    if isinstance(cause, (VerificationError, CorruptStreamError, ContainerError)):
        return EXIT_VERIFY
    if isinstance(cause, (LoadError, OSError)):
        return EXIT_DATA
    return EXIT_CONFIG


def _parser():
    ap = argparse.ArgumentParser(prog="hamsham", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress one weight matrix and report")
    c.add_argument("--input", required=True)
    c.add_argument("--format", choices=["npy", "csv", "raw-f64"])
    c.add_argument("--shape", type=int, nargs=2, metavar=("N", "M"), help="dimensions of a raw-f64 file")
    c.add_argument("--method", choices=["none", "pr", "ws", "pq", "pr-ws", "pr-pq"], default="none")
    c.add_argument("--p", type=float, nargs="+", default=[90.0], help="pruning percentile(s)")
    c.add_argument("--k", type=int, nargs="+", default=[32], help="weight-sharing cluster count(s)")
    c.add_argument("--b", type=int, nargs="+", default=[32], help="PQ interval count(s)")
    c.add_argument("--pq-mode", choices=["quantile", "uniform"], default="quantile")
    c.add_argument("--order", choices=["a", "b"], default="a")
    c.add_argument("--store", choices=["dense", "csc", "ham", "sham"], default="sham")
    c.add_argument("--word-bits", type=int, default=32)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=int, default=5)
    c.add_argument("--task", choices=["regression"])
    c.add_argument("--out", help="report path (stdout if omitted)")
    c.add_argument("--emit", choices=["json", "csv", "markdown"], default="json")
    c.add_argument("--container", help="also write the HAM/sHAM container here")

    s = sub.add_parser("sweep", help="run a grid of configurations")
    s.add_argument("--grid", required=True, help="JSON list of configs, or {'runs': [...], ...}")
    s.add_argument("--out")
    s.add_argument("--emit", choices=["json", "csv", "markdown"], default="markdown")

    v = sub.add_parser("verify", help="roundtrip-check a serialized container")
    v.add_argument("--container", required=True)
    return ap


def _single(vals):
    return vals[0] if len(vals) == 1 else vals


def cmd_compress(args):
    cfg = RunConfig(
        input=args.input, input_format=args.format, shape=tuple(args.shape) if args.shape else None,
        method=args.method, p=_single(args.p), k=_single(args.k), b=_single(args.b),
        pq_mode=args.pq_mode, order=args.order, store=args.store, word_bits=args.word_bits,
        seed=args.seed, trials=args.trials, task=args.task,
    )
    report = run(cfg)
    text = emit_report(report, args.emit, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if args.container:
        if args.store not in ("ham", "sham"):
            raise ConfigError("--container needs --store ham or sham")
        from .bench import compress_matrix
        from .ham import ham_encode, save_container, sham_encode
        from .matrix import as_matrix, load_matrix
        W0 = load_matrix(cfg.input, cfg.input_format, cfg.shape)
        W = as_matrix(compress_matrix(W0, cfg)[0])
        enc = ham_encode if args.store == "ham" else sham_encode
        save_container(enc(W, args.word_bits), args.container)
    return EXIT_OK


def cmd_sweep(args):
    try:
        with open(args.grid) as f:
            spec = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.grid}: {exc}") from exc
    if isinstance(spec, dict):
        base = {k: v for k, v in spec.items() if k != "runs"}
        runs = [{**base, **r} for r in spec.get("runs", [])]
    else:
        runs = spec
    if not runs:
        raise ConfigError("grid has no runs")
    grid = [RunConfig.from_dict(r).validate() for r in runs]
    text = emit_report(sweep(grid), args.emit, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args):
    from .ham import (HamContainer, dot_ham, dot_sham, from_bytes, ham_decode, ham_encode,
                      sham_decode, sham_encode, to_bytes)
    with open(args.container, "rb") as f:
        raw = f.read()
    C = from_bytes(raw)
    is_ham = isinstance(C, HamContainer)
    W = (ham_decode if is_ham else sham_decode)(C)
    again = (ham_encode if is_ham else sham_encode)(W, C.word_bits)
    if to_bytes(again) != raw:
        raise VerificationError("re-encoding the decoded matrix does not reproduce the container")
    x = np.random.default_rng(0).normal(size=C.rows)
    got = (dot_ham if is_ham else dot_sham)(x, C)
    scale = np.maximum(np.abs(W).T @ np.abs(x), 1.0)
    if np.any(np.abs(got - W.T @ x) > 1e-9 * scale):
        raise VerificationError("compressed dot product disagrees with the decoded matrix")
    print(f"ok: {'HAM' if is_ham else 'sHAM'} {C.rows}x{C.cols}, {C.stream.bit_length} payload bits")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"compress": cmd_compress, "sweep": cmd_sweep, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except (PipelineError, ConfigError, LoadError, VerificationError, CorruptStreamError,
            ContainerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
