"""MAC / weight / activation counts and arithmetic intensities for
standard, grouped, ABConv and ABConv-exp convolutions.

All counts are exact integers (elements, not bytes). Spatial maps are
square: ``s_o`` is the side length, so a map holds ``s_o**2`` positions,
and input spatial size equals output spatial size.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from .errors import NonDivisibleGroup


class Kind(str, Enum):
    STANDARD = "standard"
    GROUP = "group"
    ABCONV = "abconv"
    ABCONV_EXP = "abconv_exp"

    @classmethod
    def parse(cls, text: str) -> "Kind":
        key = text.strip().lower().replace("-", "_")
        aliases = {"pointwise": "standard", "std": "standard", "abconvexp": "abconv_exp"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown variant {text!r}") from None


@dataclass(frozen=True)
class ConvSpec:
    s_o: int
    k: int
    c_in: int
    c_out: int

    def __post_init__(self):
        for name in ("s_o", "k", "c_in", "c_out"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def positions(self) -> int:
        return self.s_o * self.s_o


@dataclass(frozen=True)
class ConvVariant:
    kind: Kind = Kind.STANDARD
    g: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.g < 1:
            raise ValueError(f"g must be >= 1, got {self.g}")
        if self.kind is Kind.STANDARD and self.g != 1:
            raise ValueError("standard convolution has g = 1")

    def check(self, spec: ConvSpec) -> None:
        _check_groups(spec, self.g)


STANDARD = ConvVariant()


@dataclass(frozen=True)
class CostBreakdown:
    macs: int
    weight_elems: int
    activation_elems: int
    c_mid: Optional[int] = None

    @property
    def total_elems(self) -> int:
        return self.weight_elems + self.activation_elems


@dataclass(frozen=True)
class IntensityReport:
    """Exact intensities; use ``float()`` on a field for reporting."""

    weight_ai: Fraction
    activation_ai: Fraction
    whole_ai: Fraction

    def as_floats(self) -> tuple[float, float, float]:
        return float(self.weight_ai), float(self.activation_ai), float(self.whole_ai)


def _check_groups(spec: ConvSpec, g: int) -> None:
    if g < 1:
        raise NonDivisibleGroup(f"group count must be positive, got {g}")
    if spec.c_in % g or spec.c_out % g:
        raise NonDivisibleGroup(
            f"g={g} does not divide c_in={spec.c_in} and c_out={spec.c_out}"
        )


def cost_standard(spec: ConvSpec) -> CostBreakdown:
    kk = spec.k * spec.k
    return CostBreakdown(
        macs=spec.positions * kk * spec.c_in * spec.c_out,
        weight_elems=kk * spec.c_in * spec.c_out,
        activation_elems=spec.positions * (spec.c_in + spec.c_out),
    )


def cost_group(spec: ConvSpec, g: int) -> CostBreakdown:
    _check_groups(spec, g)
    kk = spec.k * spec.k
    return CostBreakdown(
        macs=spec.positions * kk * spec.c_in * spec.c_out // g,
        weight_elems=kk * spec.c_in * spec.c_out // g,
        activation_elems=spec.positions * (spec.c_in + spec.c_out),
    )


def cost_abconv(spec: ConvSpec, g: int) -> CostBreakdown:
    _check_groups(spec, g)
    kk = spec.k * spec.k
    # one shared (c_in/g x c_out/g) kernel slides over a map g times taller
    return CostBreakdown(
        macs=spec.positions * kk * spec.c_in * spec.c_out // g,
        weight_elems=kk * (spec.c_in // g) * (spec.c_out // g),
        activation_elems=spec.positions * (spec.c_in + spec.c_out),
    )


def c_mid_exact(spec: ConvSpec) -> Fraction:
    kk = spec.k * spec.k
    return Fraction(kk * spec.c_in * spec.c_out, spec.c_in + kk * spec.c_out)


def c_mid(spec: ConvSpec) -> int:
    """Expansion width giving ABConv-exp the MAC count of the standard conv.

    Rounded half-up to an integer and never below 1.
    """
    exact = c_mid_exact(spec)
    rounded = (2 * exact.numerator + exact.denominator) // (2 * exact.denominator)
    return max(1, rounded)


def abconv_exp_counts(
    s_o: int, k: int, c_in_g: int, c_out_g: int, g: int, mid_out: int, mid_in: int
) -> tuple[int, int, int]:
    """(macs, weights, activations) of the two convolutions inside ABConv-exp.

    Works on per-group widths. ``mid_out`` is the width produced by the
    expansion pointwise conv and ``mid_in`` the width consumed by the main
    kernel; they differ only when hardware padding is modelled.
    """
    positions = g * s_o * s_o  # reshaped map
    kk = k * k
    macs = positions * c_in_g * mid_out + positions * kk * mid_in * c_out_g
    weights = c_in_g * mid_out + kk * mid_in * c_out_g
    acts = positions * (c_in_g + mid_out + mid_in + c_out_g)
    return macs, weights, acts


def cost_abconv_exp(spec: ConvSpec, g: int) -> CostBreakdown:
    _check_groups(spec, g)
    m = c_mid(spec)
    macs, weights, acts = abconv_exp_counts(
        spec.s_o, spec.k, spec.c_in // g, spec.c_out // g, g, m, m
    )
    return CostBreakdown(macs=macs, weight_elems=weights, activation_elems=acts, c_mid=m)


def cost(spec: ConvSpec, variant: ConvVariant = STANDARD) -> CostBreakdown:
    if variant.kind is Kind.STANDARD:
        return cost_standard(spec)
    if variant.kind is Kind.GROUP:
        return cost_group(spec, variant.g)
    if variant.kind is Kind.ABCONV:
        return cost_abconv(spec, variant.g)
    return cost_abconv_exp(spec, variant.g)


def intensities(c: CostBreakdown) -> IntensityReport:
    if c.weight_elems < 1 or c.activation_elems < 1:
        raise ValueError("weight and activation counts must be positive")
    return IntensityReport(
        weight_ai=Fraction(c.macs, c.weight_elems),
        activation_ai=Fraction(c.macs, c.activation_elems),
        whole_ai=Fraction(c.macs, c.weight_elems + c.activation_elems),
    )
