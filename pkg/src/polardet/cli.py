"""Command-line front end.

    polardet code-info
    polardet calibrate --target 1e-2 --decoder scl2
    polardet bler --decoder sc --ebn0 3.0:6.0:0.5
    polardet mdr --method re --iters 15,50 --B 1:44 --ebn0 4.286

Sweep flags accept ``start:stop[:step]`` (inclusive) and comma lists.
Options may also come from a YAML/JSON file given with ``--config``;
command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import yaml

from .decoders.fastssc import NodeKind, fastssc_build_tree
from .detection import Method
from .polar_core import build_code
from .sim import (DEFAULT_DECODERS, DecoderSpec, StopRule, TrialConfig, calibrate_operating_point,
                  run_bler, run_mdr, write_csv)

log = logging.getLogger("polardet")


class UsageError(Exception):
    pass


def parse_range(text: str, kind=float) -> list:
    """``"3:6:0.5"`` -> [3.0, 3.5, ..., 6.0]; ``"1:4"`` -> [1, 2, 3, 4]; ``"2,5"`` -> [2, 5]."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            out.append(kind(part))
            continue
        fields = part.split(":")
        if len(fields) not in (2, 3):
            raise UsageError(f"bad range {part!r}")
        start, stop = kind(fields[0]), kind(fields[1])
        step = kind(fields[2]) if len(fields) == 3 else kind(1)
        if step <= 0:
            raise UsageError(f"range step must be positive in {part!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise UsageError(f"empty range {part!r}")
        out.extend(kind(round(start + i * step, 10)) for i in range(count))
    if not out:
        raise UsageError(f"empty sweep {text!r}")
    return out


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("code")
    g.add_argument("--N", type=int, default=256)
    g.add_argument("--K", type=int, default=24)
    g.add_argument("--C", type=int, default=16)
    g.add_argument("--design-param", type=float, default=0.5,
                   help="Bhattacharyya seed z0 for code construction")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--config", help="YAML/JSON file with option defaults")
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polardet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("code-info", help="print frozen/information sets and the Fast-SSC tree")
    _add_common(p)

    p = sub.add_parser("calibrate", help="find the Eb/N0 reaching a target BLER")
    _add_common(p)
    p.add_argument("--target", type=float, default=1e-2)
    p.add_argument("--decoder", default="scl2")
    p.add_argument("--lo", type=float, default=2.0)
    p.add_argument("--hi", type=float, default=7.0)
    p.add_argument("--resolution", type=float, default=0.02)
    p.add_argument("--tol", type=float, default=0.1, help="relative BLER tolerance")

    p = sub.add_parser("bler", help="block-error-rate curves")
    _add_common(p)
    p.add_argument("--decoder", action="append",
                   help=f"decoder (repeatable or comma list); default: {','.join(DEFAULT_DECODERS)}")
    p.add_argument("--ebn0", default="3.0:6.0:0.25", help="Eb/N0 sweep in dB")
    p.add_argument("--min-blocks", type=int, default=50_000)
    p.add_argument("--min-errors", type=int, default=500)
    p.add_argument("--max-blocks", type=int, default=5_000_000)
    p.add_argument("--noiseless", action="store_true", help="smoke test without noise")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("mdr", help="missed-detection rate versus retained candidates")
    _add_common(p)
    p.add_argument("--method", required=False, choices=[m.value for m in Method])
    p.add_argument("--iters", help="BP iteration sweep (ls/fs/re)")
    p.add_argument("--t", dest="t", help="contributing-leaf sweep (fastssc)")
    spc = p.add_mutually_exclusive_group()
    spc.add_argument("--include-spc", dest="include_spc", action="store_true", default=True)
    spc.add_argument("--no-spc", dest="include_spc", action="store_false")
    p.add_argument("--B", dest="B", help="retained-candidate sweep (default 1:M)")
    p.add_argument("--M", dest="M", type=int, default=44)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--ebn0", default="auto",
                   help="operating Eb/N0 in dB, or 'auto' to calibrate CA-SCL L=2 to BLER 1e-2")
    p.add_argument("--list-size", type=int, default=2)
    p.add_argument("--second-stage", action="store_true",
                   help="also run the CA-SCL stage on every retained set")
    p.add_argument("--out")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh) or {}
        if not isinstance(cfg, dict):
            parser.error("config file must hold a mapping")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _code(args, allow_empty=False):
    try:
        return build_code(args.N, args.K, args.C, args.design_param, allow_empty)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "quiet")}


def cmd_code_info(args) -> int:
    code = _code(args, allow_empty=True)
    tree = fastssc_build_tree(code)
    out = sys.stdout
    out.write(f"N: {code.N}\nK: {code.K}\nC: {code.C}\ndesign_param: {code.design_param}\n")
    out.write(f"info_set ({code.info_set.size}):\n")
    out.writelines(f"{i}\n" for i in code.info_set)
    out.write(f"frozen_set ({code.frozen_set.size}):\n")
    out.writelines(f"{i}\n" for i in code.frozen_set)
    out.write("fastssc_leaves (t, kind, start, size):\n")
    t = t_nospc = 0
    for leaf in tree.leaves():
        mark = "-"
        if leaf.kind in (NodeKind.RATE0, NodeKind.REP, NodeKind.SPC):
            t += 1
            mark = str(t)
        if leaf.kind in (NodeKind.RATE0, NodeKind.REP):
            t_nospc += 1
        out.write(f"{mark} {leaf.kind.name} {leaf.start} {leaf.size}\n")
    out.write(f"contributing_leaves: {t}\n")
    out.write(f"contributing_leaves_without_spc: {t_nospc}\n")
    return 0


def cmd_calibrate(args) -> int:
    code = _code(args)
    try:
        spec = DecoderSpec.parse(args.decoder)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not 0 < args.target < 1:
        raise UsageError("--target must lie in (0, 1)")
    cal = calibrate_operating_point(code, args.target, spec, args.lo, args.hi, root_seed=args.seed,
                                    workers=args.workers, resolution=args.resolution, rel_tol=args.tol)
    lo, hi = cal.ci
    print(f"decoder: {spec.label}")
    print(f"target_bler: {args.target:g}")
    print(f"ebn0_db: {cal.ebn0_db:.4f}")
    print(f"measured_bler: {cal.point.y:.4e} ({cal.point.count}/{cal.point.n})")
    print(f"bler_95ci: [{lo:.4e}, {hi:.4e}]")
    return 0


def cmd_bler(args) -> int:
    code = _code(args)
    names = []
    for d in args.decoder or [",".join(DEFAULT_DECODERS)]:
        names.extend(x for x in d.split(",") if x.strip())
    try:
        specs = [DecoderSpec.parse(n) for n in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = parse_range(args.ebn0, float)
    stop = StopRule(args.min_blocks, args.min_errors,
                    args.min_blocks if args.noiseless else max(args.max_blocks, args.min_blocks))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        sim_grid = [math.inf] * len(grid) if args.noiseless else grid
        points = run_bler(code, spec, sim_grid, stop, args.seed, args.workers)
        if args.noiseless:
            points = [type(p)(x, p.y, p.count, p.n) for x, p in zip(grid, points)]
        path = out_dir / f"bler_{spec.label}.csv"
        header = _resolved(args) | {"decoder": spec.label}
        write_csv(points, path, header)
        log.info("wrote %s", path)
    return 0


def resolve_ebn0(args, code) -> float:
    if str(args.ebn0).lower() != "auto":
        return float(args.ebn0)
    cal = calibrate_operating_point(code, 1e-2, DecoderSpec("scl", list_size=args.list_size),
                                    root_seed=args.seed, workers=args.workers)
    log.info("calibrated operating point: %.4f dB (BLER %.3e)", cal.ebn0_db, cal.point.y)
    return cal.ebn0_db


def cmd_mdr(args) -> int:
    if not args.method:
        raise UsageError("--method is required")
    method = Method(args.method)
    code = _code(args)
    if method is Method.FASTSSC:
        if args.iters:
            raise UsageError("use --t for fastssc")
        efforts = parse_range(args.t or f"1:{fastssc_build_tree(code).n_contributing(args.include_spc)}", int)
    else:
        if args.t:
            raise UsageError("use --iters for BP-based methods")
        efforts = parse_range(args.iters or "1:15", int)
        if method is Method.LS and min(efforts) < 2:
            raise UsageError("method ls tracks sign changes between iterations: "
                             "at least two decoding iterations are required (--iters >= 2)")
    Bs = parse_range(args.B, int) if args.B else None
    try:
        probe = TrialConfig(method, tuple(efforts), 0.0, args.M, tuple(Bs) if Bs else None,
                            args.trials, args.seed, args.include_spc, args.list_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ebn0 = resolve_ebn0(args, code)
    cfg = TrialConfig(method, tuple(efforts), ebn0, args.M, probe.B_values, args.trials, args.seed,
                      args.include_spc, args.list_size, args.second_stage, workers=args.workers)
    result = run_mdr(cfg, code)
    path = Path(args.out or f"mdr_{cfg.label}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _resolved(args) | {"ebn0_resolved": repr(ebn0), "decodable_fraction":
                                repr(float(result.run.decodable.mean()))}
    write_csv(result.rows, path, header)
    if result.second_stage_success:
        for (e, B), rate in sorted(result.second_stage_success.items()):
            log.info("second stage: effort=%d B=%d success=%.4f", e, B, rate)
    log.info("wrote %s", path)
    return 0


COMMANDS = {"code-info": cmd_code_info, "calibrate": cmd_calibrate, "bler": cmd_bler, "mdr": cmd_mdr}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"polardet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"polardet {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
