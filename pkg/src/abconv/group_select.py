"""Staircase-aware group selection for ABConv / ABConv-exp.

A layer is only rewritten when both channel counts are whole multiples of
the hardware's channel step sizes; the group count is then the common
divisor of the two step quotients nearest to the continuous balance point
where weight and activation intensities meet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .cost_model import ConvSpec, c_mid


@dataclass(frozen=True)
class SelectionResult:
    g: int
    sw_rep: bool
    g_opt: Optional[float] = None
    candidates: tuple[int, ...] = field(default_factory=tuple)
    # set when a channel count is below its step size (zero quotient)
    degenerate: bool = False


def g_opt_abconv(spec: ConvSpec) -> float:
    num = spec.k * spec.k * spec.c_in * spec.c_out
    den = spec.positions * (spec.c_in + spec.c_out)
    return math.sqrt(num / den)


def g_opt_abconv_exp(spec: ConvSpec) -> float:
    """Positive root of 2*S*m*g^2 + S*(c_in+c_out)*g - k^2*c_in*c_out = 0.

    ``S`` is the number of output positions and ``m`` the (integer) expansion
    width. When ``m`` is exact this equals the closed form with
    ``8*(c_in + k^2*c_out)*m^2 / S`` under the square root.
    """
    m = c_mid(spec)
    s = spec.c_in + spec.c_out
    work = spec.k * spec.k * spec.c_in * spec.c_out
    disc = s * s + 8 * m * work / spec.positions
    # rationalised root avoids cancellation when the linear term dominates
    return 2 * work / (spec.positions * (s + math.sqrt(disc)))


def common_divisors(q_in: int, q_out: int) -> list[int]:
    if q_in < 1 or q_out < 1:
        raise ValueError("quotients must be positive")
    n = math.gcd(q_in, q_out)
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def nearest(candidates, target: float) -> int:
    # min() keeps the first of equal keys; candidates ascend, so ties go small
    return min(candidates, key=lambda c: abs(c - target))


def select_group(spec: ConvSpec, t_in: int, t_out: int, is_exp: bool = False) -> SelectionResult:
    if t_in < 1 or t_out < 1:
        raise ValueError("step sizes must be positive")
    q_in, r_in = divmod(spec.c_in, t_in)
    q_out, r_out = divmod(spec.c_out, t_out)
    if q_in == 0 or q_out == 0:
        return SelectionResult(g=1, sw_rep=False, degenerate=True)
    if r_in or r_out:
        return SelectionResult(g=1, sw_rep=False)

    g_opt = g_opt_abconv_exp(spec) if is_exp else g_opt_abconv(spec)
    candidates = tuple(common_divisors(q_in, q_out))
    g = nearest(candidates, g_opt)
    return SelectionResult(g=g, sw_rep=g > 1, g_opt=g_opt, candidates=candidates)
