"""Arithmetic-intensity balancing convolution toolkit."""

from .cost_model import (
    ConvSpec,
    ConvVariant,
    CostBreakdown,
    IntensityReport,
    Kind,
    c_mid,
    cost,
    cost_abconv,
    cost_abconv_exp,
    cost_group,
    cost_standard,
    intensities,
)
from .group_select import SelectionResult, common_divisors, g_opt_abconv, g_opt_abconv_exp, select_group
from .roofline import HardwareProfile, attainable, estimate_latency, load_profile

__all__ = [
    "ConvSpec", "ConvVariant", "CostBreakdown", "IntensityReport", "Kind",
    "c_mid", "cost", "cost_abconv", "cost_abconv_exp", "cost_group", "cost_standard", "intensities",
    "SelectionResult", "common_divisors", "g_opt_abconv", "g_opt_abconv_exp", "select_group",
    "HardwareProfile", "attainable", "estimate_latency", "load_profile",
]
