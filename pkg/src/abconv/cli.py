"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import cost_model as cm
from .errors import ABConvError, NonDivisibleGroup, ParseError
from .group_select import select_group
from .model_transform import (
    BUNDLED_MODELS,
    ModelIR,
    apply_policy,
    dump_model,
    load_bundled_model,
    parse_model,
    parse_policy,
    summarize,
    write_report_csv,
)
from .roofline import (
    LatencySample,
    detect_step_size,
    estimate_latency,
    load_profile,
    read_latency_csv,
    read_staircase_csv,
    roofline_points,
    staircase_sweep,
    write_roofline_csv,
    write_staircase_csv,
)
from .tensor_ref import check_equivalence

log = logging.getLogger("abconv")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class WriteError(Exception):
    pass


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _profile(args):
    return load_profile(args.hw)


def _spec(args) -> cm.ConvSpec:
    try:
        return cm.ConvSpec(args.so, args.k, args.cin, args.cout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_model(source: str) -> ModelIR:
    path = Path(source)
    if not path.is_file() and path.name.removesuffix(".json") in BUNDLED_MODELS:
        return load_bundled_model(path.name)
    return parse_model(path.read_text())


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# --- subcommands -----------------------------------------------------------

ANALYZE_HEADER = ["variant", "g", "macs", "params", "weight_ai", "activation_ai", "whole_ai",
                  "est_latency_us"]


def cmd_analyze(args) -> int:
    spec = _spec(args)
    profile = _profile(args)
    kind = cm.Kind.parse(args.variant)
    g = args.g
    if args.select:
        if kind not in (cm.Kind.ABCONV, cm.Kind.ABCONV_EXP):
            raise UsageError("--select needs --variant abconv or abconv_exp")
        sel = select_group(spec, profile.t_in, profile.t_out, is_exp=kind is cm.Kind.ABCONV_EXP)
        if not sel.sw_rep:
            log.warning("group selection declined the rewrite; reporting the standard conv")
            kind, g = cm.Kind.STANDARD, 1
        else:
            g = sel.g
    elif kind is cm.Kind.STANDARD:
        g = 1 if g is None else g
    elif g is None:
        raise UsageError(f"--variant {kind.value} needs --g or --select")

    try:
        variant = cm.ConvVariant(kind, g)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    c = cm.cost(spec, variant)
    w, a, whole = cm.intensities(c).as_floats()
    latency_us = estimate_latency(profile, spec, variant) * 1e6

    if args.format == "csv":
        text = _csv([ANALYZE_HEADER, [kind.value, g, c.macs, c.weight_elems,
                                      f"{w:.4f}", f"{a:.4f}", f"{whole:.4f}", f"{latency_us:.3f}"]])
    else:
        text = _table([ANALYZE_HEADER, [kind.value, str(g), f"{c.macs:,}", f"{c.weight_elems:,}",
                                        f"{w:.1f}", f"{a:.1f}", f"{whole:.1f}", f"{latency_us:.1f}"]])
    emit(text, args.out)
    return EXIT_OK


def cmd_select(args) -> int:
    spec = _spec(args)
    if args.tin is not None and args.tout is not None:
        t_in, t_out = args.tin, args.tout
    else:
        profile = _profile(args)
        t_in = args.tin or profile.t_in
        t_out = args.tout or profile.t_out
    sel = select_group(spec, t_in, t_out, is_exp=args.exp)
    g_opt = "" if sel.g_opt is None else f"{sel.g_opt:.4f}"
    cands = " ".join(map(str, sel.candidates))
    if args.format == "csv":
        text = _csv([["g", "sw_rep", "g_opt", "candidates"],
                     [sel.g, str(sel.sw_rep).lower(), g_opt, cands]])
    else:
        text = (f"g          {sel.g}\nsw_rep     {str(sel.sw_rep).lower()}\n"
                f"g_opt      {g_opt or '-'}\ncandidates {cands or '-'}\n")
    if sel.degenerate:
        log.warning("a channel count is below its step size; no candidates exist")
    emit(text, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        shape = tuple(int(v) for v in args.shape.split(","))
    except ValueError:
        raise UsageError(f"--shape must be four comma-separated integers, got {args.shape!r}") from None
    if len(shape) != 4 or min(shape) < 1:
        raise UsageError(f"--shape must be four positive integers, got {args.shape!r}")
    try:
        failure = check_equivalence(shape, args.g, c_out=args.cout, c_mid=args.cmid,
                                    trials=args.trials, seed=args.seed, rtol=args.rtol)
    except NonDivisibleGroup as exc:
        raise UsageError(str(exc)) from None
    if failure is not None:
        trial, check, err = failure
        print(f"FAIL tensor {trial}: {check} relative error {err:.3e}")
        return EXIT_VERIFY
    print(f"PASS {args.trials} tensors, g={args.g}, shape={shape}")
    return EXIT_OK


def cmd_transform(args) -> int:
    try:
        policy = parse_policy(args.policy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = _load_model(args.model)
    profile = _profile(args)
    new = apply_policy(model, profile, policy)
    for layer in new.layers:
        if layer.gated:
            log.info("layer %s kept as standard: group selection declined", layer.name)
    emit(dump_model(new), args.out)
    if args.report:
        buf = io.StringIO()
        write_report_csv(buf, summarize(new, profile))
        atomic_write(args.report, buf.getvalue())
    return EXIT_OK


def _sweep_layers(args, profile):
    kinds = [cm.Kind.parse(v) for v in args.variants.split(",")]
    layers = []
    for s_o in args.so:
        for c in range(args.cmin, args.cmax + 1, args.cstep):
            spec = cm.ConvSpec(s_o, args.k, c, c)
            for kind in kinds:
                if kind is cm.Kind.STANDARD:
                    variant = cm.STANDARD
                else:
                    sel = select_group(spec, profile.t_in, profile.t_out,
                                       is_exp=kind is cm.Kind.ABCONV_EXP)
                    if not sel.sw_rep:
                        continue
                    variant = cm.ConvVariant(kind, sel.g)
                layers.append((f"{kind.value}_s{s_o}_c{c}", spec, variant))
    return layers


def cmd_roofline(args) -> int:
    profile = _profile(args)
    if args.model:
        model = _load_model(args.model)
        layers = [(l.name, l.spec, l.variant) for l in model.layers]
    else:
        layers = _sweep_layers(args, profile)
    measured = None
    if args.measured:
        with open(args.measured, newline="") as f:
            measured = {s.label: s.latency_s for s in read_latency_csv(f)}
    buf = io.StringIO()
    write_roofline_csv(buf, roofline_points(layers, profile, measured))
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_staircase(args) -> int:
    profile = _profile(args)
    try:
        samples = staircase_sweep(profile, args.axis, args.so, args.k, args.fixed, args.start, args.stop)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    write_staircase_csv(buf, args.axis, samples)
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_detect_steps(args) -> int:
    text = Path(args.csv).read_text()
    header = text.split("\n", 1)[0].strip()
    if header.startswith("swept_axis"):
        axis, rows = read_staircase_csv(io.StringIO(text))
        samples = [LatencySample(c, 1, 1, 1, lat) if axis == "in" else LatencySample(1, c, 1, 1, lat)
                   for c, lat in rows]
        axis = args.axis or axis
    else:
        samples = read_latency_csv(io.StringIO(text))
        axis = args.axis
    key = (lambda s: s.c_in) if axis == "in" else (lambda s: s.c_out)
    if axis:
        samples = sorted(samples, key=key)
    try:
        step = detect_step_size(samples, axis=axis, tol=args.tol)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    print(step)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _layer_flags(p, required=True):
    p.add_argument("--so", type=int, required=required, help="output spatial side length")
    p.add_argument("--k", type=int, default=1, help="kernel side length (default 1)")
    p.add_argument("--cin", type=int, required=required, help="input channels")
    p.add_argument("--cout", type=int, required=required, help="output channels")


def _hw_flag(p):
    p.add_argument("--hw", default="ethos-u65-like",
                   help="hardware profile JSON or bundled name (ethos-u65-like, jetson-nano-like)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abconv", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="MACs, params, intensities and modelled latency of one layer")
    _layer_flags(p)
    _hw_flag(p)
    p.add_argument("--variant", default="standard",
                   choices=["standard", "group", "abconv", "abconv_exp", "abconv-exp"])
    p.add_argument("--g", type=int, help="group count")
    p.add_argument("--select", action="store_true", help="choose g by group selection")
    p.add_argument("--format", choices=["table", "csv"], default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("select", help="run group selection for one layer")
    _layer_flags(p)
    _hw_flag(p)
    p.add_argument("--tin", type=int, help="input-channel step (overrides profile)")
    p.add_argument("--tout", type=int, help="output-channel step (overrides profile)")
    p.add_argument("--exp", action="store_true", help="select for ABConv-exp")
    p.add_argument("--format", choices=["table", "csv"], default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("verify", help="check executor equivalences on random tensors")
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--shape", default="1,4,4,16", help="n,h,w,c (default 1,4,4,16)")
    p.add_argument("--cout", type=int, help="output channels (default c)")
    p.add_argument("--cmid", type=int, help="ABConv-exp expansion width (default c/g)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="rewrite pointwise layers under a policy pattern")
    p.add_argument("--model", required=True, help="model JSON or bundled name")
    p.add_argument("--policy", required=True, help="cyclic pattern over P/A/E, e.g. A-P-P")
    _hw_flag(p)
    p.add_argument("--out", help="transformed model JSON (default stdout)")
    p.add_argument("--report", help="per-layer report CSV")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("roofline", help="roofline points for a model or a channel sweep")
    _hw_flag(p)
    p.add_argument("--model", help="model JSON or bundled name; omit for a sweep")
    p.add_argument("--so", type=int, nargs="+", default=[4, 8])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--cmin", type=int, default=128)
    p.add_argument("--cmax", type=int, default=1280)
    p.add_argument("--cstep", type=int, default=128)
    p.add_argument("--variants", default="standard,abconv,abconv_exp")
    p.add_argument("--measured", help="latency CSV (label,s_o,k,c_in,c_out,latency_us)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_roofline)

    p = sub.add_parser("staircase", help="modelled latency sweeping one channel axis")
    _hw_flag(p)
    p.add_argument("--axis", choices=["in", "out"], default="in")
    p.add_argument("--so", type=int, default=32)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--fixed", type=int, default=64, help="the other channel count")
    p.add_argument("--start", type=int, default=1)
    p.add_argument("--stop", type=int, default=256)
    p.add_argument("--out")
    p.set_defaults(func=cmd_staircase)

    p = sub.add_parser("detect-steps", help="detect the staircase step in a latency CSV")
    p.add_argument("--csv", required=True, help="staircase or measured-latency CSV")
    p.add_argument("--axis", choices=["in", "out"])
    p.add_argument("--tol", type=float, default=0.02)
    p.set_defaults(func=cmd_detect_steps)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ABConvError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
