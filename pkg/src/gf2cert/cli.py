"""Command line entry point: ``gf2cert build|verify|oracle|gen-config``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import certificate as cc
from .errors import Gf2CertError, MalformedCertificate, ParseError, ValidationError
from .gf2 import FinVec, is_independent, rank


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _summary(cert: dict) -> None:
    for v in cert["verdicts"]:
        print(f"{v['verdict']:<13} {v['check']:<22} {v['detail']}", file=sys.stderr)
    print(f"status: {cert['status']}", file=sys.stderr)


def cmd_build(args) -> int:
    rc = cc.load_config(args.config)
    cert = cc.run_build(rc)
    cert, code = cc.run_verify(cert)
    _write(args.out, cc.dumps(cert))
    _summary(cert)
    return code


def cmd_verify(args) -> int:
    try:
        text = Path(args.cert).read_text()
    except OSError as exc:
        raise ParseError(f"{args.cert}: {exc.strerror or exc}") from None
    cert, code = cc.run_verify(cc.loads(text), window_width=args.budget_width)
    if args.out:
        _write(args.out, cc.dumps(cert))
    _summary(cert)
    return code


def cmd_oracle(args) -> int:
    try:
        raw = json.loads(Path(args.vectors).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{args.vectors}: {exc}") from None
    if isinstance(raw, dict):
        raw = raw.get("vectors")
    if not isinstance(raw, list):
        raise ValidationError("vectors", "expected a list of finite sets")
    try:
        family = [FinVec.parse(v) for v in raw]
    except (ValueError, TypeError) as exc:
        raise ValidationError("vectors", str(exc)) from None
    verdict = is_independent(family)
    out = {"independent": bool(verdict), "rank": rank(family), "size": len(family)}
    if not verdict:
        out["witness"] = list(verdict.witness)
    print(json.dumps(out, sort_keys=True))
    return cc.EXIT_PASS if verdict else cc.EXIT_FAIL


def cmd_gen_config(args) -> int:
    cfg = cc.gen_config(args.seed, args.k, args.stages)
    cc.parse_config(cfg)  # generated configs must load
    _write(args.out, cc.canonical(cfg))
    return cc.EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gf2cert", description="Build and check GF(2) stage certificates.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="run the recursion and write a verified certificate")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_build)

    v = sub.add_parser("verify", help="recompute every verdict of a certificate")
    v.add_argument("--cert", required=True)
    v.add_argument("--budget-width", type=int, default=None, help="window width for pattern checks")
    v.add_argument("--out", default=None, help="write the certificate with fresh verdicts")
    v.set_defaults(fn=cmd_verify)

    o = sub.add_parser("oracle", help="standalone GF(2) tools")
    osub = o.add_subparsers(dest="tool", required=True)
    oi = osub.add_parser("independence", help="independence and rank of a vector family")
    oi.add_argument("--vectors", required=True)
    oi.set_defaults(fn=cmd_oracle)

    g = sub.add_parser("gen-config", help="write a seeded valid config")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--stages", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValidationError, MalformedCertificate) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return cc.EXIT_INPUT
    except Gf2CertError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return cc.EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
