"""Network description, replacement policies and per-layer reports.

A model is an ordered list of square convolutions. Policies are cyclic
patterns over ``P`` (keep), ``A`` (ABConv) and ``E`` (ABConv-exp), indexed
over the replaceable (1x1) layers only.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from .cost_model import STANDARD, ConvSpec, ConvVariant, Kind, cost, intensities
from .errors import DuplicateLayerName, ParseError
from .group_select import select_group
from .roofline import HardwareProfile, estimate_latency

BUNDLED_MODELS = ("mobilenetv1-cifar", "resnet50-cifar")

REPORT_CSV_HEADER = ["layer", "variant", "g", "macs", "params", "weight_ai",
                     "activation_ai", "whole_ai", "est_latency_us"]

POLICY_LETTERS = {"P": None, "A": Kind.ABCONV, "E": Kind.ABCONV_EXP}


@dataclass(frozen=True)
class LayerRecord:
    name: str
    spec: ConvSpec
    variant: ConvVariant = STANDARD
    # A/E was requested but group selection declined the rewrite
    gated: bool = field(default=False, compare=False)

    @property
    def replaceable(self) -> bool:
        return self.spec.k == 1


@dataclass(frozen=True)
class ModelIR:
    name: str
    layers: tuple[LayerRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        seen = set()
        for layer in self.layers:
            if layer.name in seen:
                raise DuplicateLayerName(f"duplicate layer name {layer.name!r}")
            seen.add(layer.name)


def _int_field(obj, key, where, line):
    value = obj.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ParseError(f"expected a positive integer, got {value!r}", line=line, field=f"{where}.{key}")
    return value


def _layer_lines(text: str) -> list[int]:
    # best-effort line numbers for each layer object, for diagnostics only
    return [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"name"\s*:', text)][1:]


def parse_model(text: str) -> ModelIR:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("model must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ParseError("model needs a non-empty string name", field="name")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list):
        raise ParseError("model needs a layers list", field="layers")
    if not raw_layers:
        raise ParseError("model must have at least one layer", field="layers")

    lines = _layer_lines(text)
    layers, seen = [], set()
    for i, raw in enumerate(raw_layers):
        where = f"layers[{i}]"
        line = lines[i] if i < len(lines) else None
        if not isinstance(raw, dict):
            raise ParseError("layer must be an object", line=line, field=where)
        lname = raw.get("name")
        if not isinstance(lname, str) or not lname:
            raise ParseError("layer needs a non-empty string name", line=line, field=f"{where}.name")
        if lname in seen:
            raise DuplicateLayerName(f"duplicate layer name {lname!r}", line=line, field=f"{where}.name")
        seen.add(lname)
        spec = ConvSpec(*(_int_field(raw, key, where, line) for key in ("s_o", "k", "c_in", "c_out")))

        variant = STANDARD
        if "variant" in raw:
            try:
                kind = Kind.parse(str(raw["variant"]))
                g = raw.get("g", 1)
                if not isinstance(g, int) or isinstance(g, bool):
                    raise ValueError(f"g must be an integer, got {g!r}")
                variant = ConvVariant(kind, g)
                variant.check(spec)
            except ValueError as exc:
                raise ParseError(str(exc), line=line, field=f"{where}.variant") from None
        layers.append(LayerRecord(lname, spec, variant))
    return ModelIR(name, tuple(layers))


def model_to_dict(model: ModelIR) -> dict:
    return {
        "name": model.name,
        "layers": [
            {"name": l.name, "s_o": l.spec.s_o, "k": l.spec.k, "c_in": l.spec.c_in,
             "c_out": l.spec.c_out, "variant": l.variant.kind.value, "g": l.variant.g}
            for l in model.layers
        ],
    }


def dump_model(model: ModelIR) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def parse_policy(pattern: str) -> tuple[str, ...]:
    letters = tuple(ch for ch in pattern.upper() if ch not in "- ,")
    if not letters:
        raise ValueError("policy pattern is empty")
    bad = sorted(set(letters) - set(POLICY_LETTERS))
    if bad:
        raise ValueError(f"policy characters must be P, A or E, got {''.join(bad)!r}")
    return letters


def apply_policy(model: ModelIR, profile: HardwareProfile, policy) -> ModelIR:
    pattern = parse_policy(policy) if isinstance(policy, str) else tuple(policy)
    out, i = [], 0
    for layer in model.layers:
        if not layer.replaceable:
            out.append(layer)
            continue
        kind = POLICY_LETTERS[pattern[i % len(pattern)]]
        i += 1
        if kind is None:
            out.append(layer)
            continue
        sel = select_group(layer.spec, profile.t_in, profile.t_out, is_exp=kind is Kind.ABCONV_EXP)
        if sel.sw_rep:
            out.append(LayerRecord(layer.name, layer.spec, ConvVariant(kind, sel.g)))
        else:
            out.append(LayerRecord(layer.name, layer.spec, STANDARD, gated=True))
    return replace(model, layers=tuple(out))


def policy_tags(model: ModelIR) -> list[str]:
    """Policy letter realised on each replaceable layer (P, A, E or G for group)."""
    letters = {Kind.STANDARD: "P", Kind.ABCONV: "A", Kind.ABCONV_EXP: "E", Kind.GROUP: "G"}
    return [letters[l.variant.kind] for l in model.layers if l.replaceable]


@dataclass(frozen=True)
class ReportRow:
    name: str
    variant: Kind
    g: int
    macs: int
    params: int
    weight_ai: float
    activation_ai: float
    whole_ai: float
    est_latency_s: float
    gated: bool = False


@dataclass(frozen=True)
class ModelReport:
    rows: tuple[ReportRow, ...]
    total_macs: int
    total_params: int
    total_latency_s: float


def layer_row(layer: LayerRecord, profile: HardwareProfile) -> ReportRow:
    c = cost(layer.spec, layer.variant)
    w, a, whole = intensities(c).as_floats()
    return ReportRow(
        name=layer.name, variant=layer.variant.kind, g=layer.variant.g,
        macs=c.macs, params=c.weight_elems,
        weight_ai=w, activation_ai=a, whole_ai=whole,
        est_latency_s=estimate_latency(profile, layer.spec, layer.variant),
        gated=layer.gated,
    )


def summarize(model: ModelIR, profile: HardwareProfile) -> ModelReport:
    rows = tuple(layer_row(layer, profile) for layer in model.layers)
    return ModelReport(
        rows=rows,
        total_macs=sum(r.macs for r in rows),
        total_params=sum(r.params for r in rows),
        total_latency_s=sum(r.est_latency_s for r in rows),
    )


def write_report_csv(stream, report: ModelReport) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    for r in report.rows:
        writer.writerow([r.name, r.variant.value, r.g, r.macs, r.params,
                         f"{r.weight_ai:.4f}", f"{r.activation_ai:.4f}", f"{r.whole_ai:.4f}",
                         f"{r.est_latency_s * 1e6:.3f}"])
    writer.writerow(["TOTAL", "", "", report.total_macs, report.total_params, "", "", "",
                     f"{report.total_latency_s * 1e6:.3f}"])


def load_bundled_model(name: str) -> ModelIR:
    path = resources.files("abconv").joinpath(f"data/models/{name.removesuffix('.json')}.json")
    return parse_model(path.read_text())

