"""Roofline throughput, staircase latency model and step-size detection.

The latency model is an estimate, not a measurement: channel widths are
padded up to the hardware's step sizes, and the padded MAC count is divided
by the roofline-attainable throughput of the padded layer.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .cost_model import (
    STANDARD,
    ConvSpec,
    ConvVariant,
    CostBreakdown,
    Kind,
    abconv_exp_counts,
    c_mid,
    cost,
    cost_abconv,
    cost_group,
    cost_standard,
    intensities,
)
from .errors import NoStaircase, ParseError, UnknownLabel

BUNDLED_PROFILES = ("ethos-u65-like", "jetson-nano-like")

LATENCY_CSV_HEADER = ["label", "s_o", "k", "c_in", "c_out", "latency_us"]
ROOFLINE_CSV_HEADER = ["label", "whole_ai", "activation_ai", "modeled_gmacs", "measured_gmacs"]
STAIRCASE_CSV_HEADER = ["swept_axis", "channel", "latency_us_model"]


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    peak_macs_per_s: float
    mem_bandwidth_bytes_per_s: float
    t_in: int
    t_out: int
    bytes_per_element: int = 1

    def __post_init__(self):
        if not (self.peak_macs_per_s > 0 and self.mem_bandwidth_bytes_per_s > 0):
            raise ValueError("peak throughput and bandwidth must be positive")
        for name in ("t_in", "t_out", "bytes_per_element"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def ridge_ai(self) -> float:
        """Intensity (MAC/byte) where the bandwidth roof meets the compute roof."""
        return self.peak_macs_per_s / self.mem_bandwidth_bytes_per_s

    @classmethod
    def from_dict(cls, data: Mapping) -> "HardwareProfile":
        expected = {f.name for f in fields(cls)}
        unknown = set(data) - expected
        if unknown:
            raise ParseError(f"unknown profile keys {sorted(unknown)}")
        missing = expected - set(data) - {"bytes_per_element"}
        if missing:
            raise ParseError(f"missing profile keys {sorted(missing)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"invalid hardware profile: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def load_profile(source: str | Path) -> HardwareProfile:
    """Load a profile from a JSON path or a bundled profile name."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    else:
        name = path.name.removesuffix(".json")
        if name not in BUNDLED_PROFILES:
            raise FileNotFoundError(f"no profile file or bundled profile named {str(source)!r}")
        text = resources.files("abconv").joinpath(f"data/profiles/{name}.json").read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"profile is not valid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("profile must be a JSON object")
    return HardwareProfile.from_dict(data)


@dataclass(frozen=True)
class RooflinePoint:
    label: str
    whole_ai: float
    activation_ai: float
    modeled_gmacs_per_s: float
    measured_gmacs_per_s: Optional[float] = None


@dataclass(frozen=True)
class LatencySample:
    c_in: int
    c_out: int
    s_o: int
    k: int
    latency_s: float
    label: str = ""

    def __post_init__(self):
        if not self.latency_s > 0:
            raise ValueError(f"latency must be positive, got {self.latency_s}")


def attainable(profile: HardwareProfile, whole_ai: float) -> float:
    """Roofline throughput in MAC/s for an intensity in MAC/byte."""
    if not whole_ai > 0:
        raise ValueError("intensity must be positive")
    return min(profile.peak_macs_per_s, profile.mem_bandwidth_bytes_per_s * whole_ai)


def achieved_perf(macs: int, latency_s: float) -> float:
    if not latency_s > 0:
        raise ValueError("latency must be positive")
    return macs / latency_s


def quantize_channels(c: int, t: int) -> int:
    if c < 1 or t < 1:
        raise ValueError("channel count and step must be positive")
    return -(-c // t) * t


def effective_cost(profile: HardwareProfile, spec: ConvSpec, variant: ConvVariant = STANDARD) -> CostBreakdown:
    """Cost of the layer as the hardware executes it, channels padded to steps.

    Grouped variants are padded per group, since each group is what runs.
    """
    variant.check(spec)
    t_in, t_out = profile.t_in, profile.t_out
    if variant.kind is Kind.STANDARD:
        padded = ConvSpec(spec.s_o, spec.k, quantize_channels(spec.c_in, t_in),
                          quantize_channels(spec.c_out, t_out))
        return cost_standard(padded)

    g = variant.g
    c_in_g = quantize_channels(spec.c_in // g, t_in)
    c_out_g = quantize_channels(spec.c_out // g, t_out)
    if variant.kind is Kind.ABCONV_EXP:
        m = c_mid(spec)
        macs, weights, acts = abconv_exp_counts(
            spec.s_o, spec.k, c_in_g, c_out_g, g,
            quantize_channels(m, t_out), quantize_channels(m, t_in),
        )
        return CostBreakdown(macs, weights, acts, c_mid=m)
    padded = ConvSpec(spec.s_o, spec.k, g * c_in_g, g * c_out_g)
    if variant.kind is Kind.GROUP:
        return cost_group(padded, g)
    return cost_abconv(padded, g)


def estimate_latency(profile: HardwareProfile, spec: ConvSpec, variant: ConvVariant = STANDARD) -> float:
    eff = effective_cost(profile, spec, variant)
    whole_ai = eff.macs / (eff.total_elems * profile.bytes_per_element)
    return eff.macs / attainable(profile, whole_ai)


def roofline_points(
    layers: Iterable[tuple[str, ConvSpec, ConvVariant]],
    profile: HardwareProfile,
    measured: Optional[Mapping[str, float]] = None,
) -> list[RooflinePoint]:
    """One roofline point per layer; ``measured`` maps label to latency in seconds."""
    layers = list(layers)
    labels = [label for label, _, _ in layers]
    if len(set(labels)) != len(labels):
        raise ValueError("layer labels must be unique")
    measured = dict(measured or {})
    missing = set(measured) - set(labels)
    if missing:
        raise UnknownLabel(f"measured latencies for unknown layers: {sorted(missing)}")

    bpe = profile.bytes_per_element
    points = []
    for label, spec, variant in layers:
        c = cost(spec, variant)
        ai = intensities(c)
        whole = float(ai.whole_ai) / bpe
        achieved = None
        if label in measured:
            achieved = achieved_perf(c.macs, measured[label]) / 1e9
        points.append(RooflinePoint(
            label=label,
            whole_ai=whole,
            activation_ai=float(ai.activation_ai) / bpe,
            modeled_gmacs_per_s=attainable(profile, whole) / 1e9,
            measured_gmacs_per_s=achieved,
        ))
    return points


def staircase_sweep(
    profile: HardwareProfile,
    axis: str,
    s_o: int,
    k: int,
    fixed: int,
    start: int,
    stop: int,
) -> list[LatencySample]:
    """Modelled latency of a standard conv, sweeping one channel axis at unit stride.

    ``axis`` is ``"in"`` or ``"out"``; ``fixed`` is the other channel count.
    ``stop`` is inclusive.
    """
    if axis not in ("in", "out"):
        raise ValueError("axis must be 'in' or 'out'")
    if not 1 <= start <= stop:
        raise ValueError("need 1 <= start <= stop")
    samples = []
    for c in range(start, stop + 1):
        c_in, c_out = (c, fixed) if axis == "in" else (fixed, c)
        spec = ConvSpec(s_o, k, c_in, c_out)
        samples.append(LatencySample(c_in, c_out, s_o, k, estimate_latency(profile, spec)))
    return samples


def swept_axis(samples: Sequence[LatencySample]) -> str:
    ins = {s.c_in for s in samples}
    outs = {s.c_out for s in samples}
    if len(outs) == 1 and len(ins) > 1:
        return "in"
    if len(ins) == 1 and len(outs) > 1:
        return "out"
    raise ValueError("samples must vary exactly one channel axis")


def _flat(values: Sequence[float], tol: float) -> bool:
    mid = statistics.median(values)
    return all(abs(v - mid) <= tol * mid for v in values)


def detect_step_size(samples: Sequence[LatencySample], axis: Optional[str] = None, tol: float = 0.02) -> int:
    """Recover the channel step size of a latency staircase.

    Returns the smallest period ``p >= 2`` such that latency is flat (every
    sample within ``tol`` of the interval median) on each complete interval
    ``((m-1)p, mp]`` and rises by more than ``tol`` across every interval
    boundary. Divisors of the true step fail the rise test, multiples of it
    fail the flatness test.
    """
    axis = axis or swept_axis(samples)
    chan = [s.c_in if axis == "in" else s.c_out for s in samples]
    if any(b - a != 1 for a, b in zip(chan, chan[1:])):
        raise ValueError("samples must be sorted at unit channel stride")
    lat = {c: s.latency_s for c, s in zip(chan, samples)}
    lo, hi = chan[0], chan[-1]

    for p in range(2, (hi - lo + 1) // 2 + 1):
        blocks = []
        start = -(-(lo - 1) // p) * p + 1  # first complete interval
        while start + p - 1 <= hi:
            blocks.append([lat[c] for c in range(start, start + p)])
            start += p
        if len(blocks) < 2:
            break
        if not all(_flat(b, tol) for b in blocks):
            continue
        levels = [statistics.median(b) for b in blocks]
        if all(nxt > cur * (1 + tol) for cur, nxt in zip(levels, levels[1:])):
            return p
    raise NoStaircase("no step size with at least two complete flat intervals")


def read_latency_csv(stream) -> list[LatencySample]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != LATENCY_CSV_HEADER:
        raise ParseError(f"expected header {','.join(LATENCY_CSV_HEADER)}", line=1)
    samples = []
    for lineno, row in enumerate(reader, start=2):
        try:
            samples.append(LatencySample(
                c_in=int(row["c_in"]), c_out=int(row["c_out"]),
                s_o=int(row["s_o"]), k=int(row["k"]),
                latency_s=float(row["latency_us"]) * 1e-6, label=row["label"].strip(),
            ))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad latency row: {exc}", line=lineno) from None
    return samples


def read_staircase_csv(stream) -> tuple[str, list[tuple[int, float]]]:
    """Read a staircase sweep CSV back as (axis, [(channel, latency_s), ...])."""
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != STAIRCASE_CSV_HEADER:
        raise ParseError(f"expected header {','.join(STAIRCASE_CSV_HEADER)}", line=1)
    axes, rows = set(), []
    for lineno, row in enumerate(reader, start=2):
        try:
            axes.add(row["swept_axis"].strip())
            rows.append((int(row["channel"]), float(row["latency_us_model"]) * 1e-6))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad staircase row: {exc}", line=lineno) from None
    if len(axes) != 1:
        raise ParseError("staircase CSV must sweep exactly one axis")
    return axes.pop(), rows


def _fmt(x: float) -> str:
    return f"{x:.6g}" if math.isfinite(x) else ""


def write_roofline_csv(stream, points: Iterable[RooflinePoint]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(ROOFLINE_CSV_HEADER)
    for p in points:
        measured = "" if p.measured_gmacs_per_s is None else _fmt(p.measured_gmacs_per_s)
        writer.writerow([p.label, _fmt(p.whole_ai), _fmt(p.activation_ai),
                         _fmt(p.modeled_gmacs_per_s), measured])


def write_staircase_csv(stream, axis: str, samples: Iterable[LatencySample]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(STAIRCASE_CSV_HEADER)
    for s in samples:
        channel = s.c_in if axis == "in" else s.c_out
        writer.writerow([axis, channel, f"{s.latency_s * 1e6:.6f}"])
