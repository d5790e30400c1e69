"""Closed-form rate and loss limits for mean-square stabilization.

All bounds are driven by the magnitude of the product of the plant's
nominal eigenvalues (|lambda|, the last AR coefficient) and the
uncertainty radius of that coefficient.  Rates are in bits per packet.
Infeasible combinations (nonpositive radicands or denominators) are
reported as math.inf plus a feasible flag rather than NaN, so sweep
output can mark "no rate suffices" regions deliberately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


@dataclass(frozen=True)
class NecessaryBounds:
    r_nec0: float
    r_nec1: float
    r_nec: float
    p_nec: float
    p_nec0: float
    p_nec1: float
    feasible: bool


def necessary_bounds(lambda_abs: float, eps_n: float, p: float) -> NecessaryBounds:
    """Necessary data rate and loss probability for an uncertain plant.

    The rate bound is the larger of two branch bounds (the crossover sits
    exactly at one bit); the loss bound shrinks with uncertainty and
    collapses entirely at eps_n >= 1, where no channel can stabilize the
    plant.  Callers wanting the standing assumption |lambda| - eps_n > 1
    enforced should construct an UncertainPlant first; here uncertainty
    beyond that limit simply reports as infeasible.
    """
    lam = abs(lambda_abs)
    if eps_n < 0.0:
        raise ValueError(f"uncertainty radius must be nonnegative, got {eps_n}")
    if lam <= 1.0:
        raise ValueError(f"need |lambda| > 1, got {lam}")
    if not (0.0 <= p < 1.0):
        raise ValueError(f"loss probability must be in [0, 1), got {p}")
    outer = lam + eps_n
    p_nec0 = 1.0 / outer**2
    denom_p = outer**2 - eps_n**2
    p_nec = (1.0 - eps_n**2) / denom_p
    p_nec1 = (1.0 - eps_n**2) / (lam**2 + 2.0 * lam * eps_n)
    radicand = 1.0 - p * outer**2
    sq = math.sqrt(1.0 - p)
    if radicand <= 0.0:
        r_nec0 = math.inf
        r_nec1 = math.inf
    else:
        root = math.sqrt(radicand)
        r_nec0 = math.log2(outer * sq / root)
        denom1 = root - eps_n * sq
        r_nec1 = math.log2((lam - eps_n) * sq / denom1) if denom1 > 0.0 else math.inf
    feasible = eps_n < 1.0 and p < p_nec
    return NecessaryBounds(
        r_nec0=r_nec0,
        r_nec1=r_nec1,
        r_nec=max(r_nec0, r_nec1),
        p_nec=p_nec,
        p_nec0=p_nec0,
        p_nec1=p_nec1,
        feasible=feasible,
    )


class YouBounds(NamedTuple):
    r_y: float
    p_y: float


def you_bounds(lambda_abs: float, p: float) -> YouBounds:
    """Exact rate/loss condition for a known (certain) plant."""
    lam = abs(lambda_abs)
    if lam <= 1.0:
        raise ValueError(f"need |lambda| > 1, got {lam}")
    if not (0.0 <= p < 1.0):
        raise ValueError(f"loss probability must be in [0, 1), got {p}")
    p_y = 1.0 / lam**2
    if p >= p_y:
        return YouBounds(math.inf, p_y)
    r_y = math.log2(lam * math.sqrt(1.0 - p) / math.sqrt(1.0 - p * lam**2))
    return YouBounds(r_y, p_y)


def phat_bound(lambda_abs: float, eps1: float) -> float:
    """Norm-bounded-uncertainty sufficient rate (scalar plant, lossless).

    Returns math.inf when the bound's denominator (or numerator) is
    nonpositive, i.e. the condition cannot be met at any rate.
    """
    lam = abs(lambda_abs)
    if eps1 < 0.0:
        raise ValueError(f"uncertainty radius must be nonnegative, got {eps1}")
    num = lam - eps1 * (lam + eps1)
    den = 1.0 - eps1 * (2.0 * lam + 2.0 * eps1 + 1.0)
    if den <= 0.0 or num <= 0.0:
        return math.inf
    return math.log2(num / den)


def martins_bound(lambda_abs: float, eps1: float) -> float:
    """Stochastic-uncertainty sufficient rate (scalar plant, lossless)."""
    lam = abs(lambda_abs)
    if eps1 < 0.0:
        raise ValueError(f"uncertainty radius must be nonnegative, got {eps1}")
    if eps1 >= 1.0:
        return math.inf
    return math.log2(lam / (1.0 - eps1))


def eta(lambda_abs: float, eps_n: float, n_levels: float, gamma: int) -> float:
    """Worst-case one-reception growth factor of the scaling parameter.

    With M := N^gamma (1 on loss), eta = (|lambda| + max(M-1, 1)*eps) / M.
    Real-valued N >= 1 is allowed; the analysis branches at N = 2.
    """
    m = n_levels**gamma
    return (abs(lambda_abs) + max(m - 1.0, 1.0) * eps_n) / m


def eta_second_moment(lambda_abs: float, eps_n: float, p: float, n_levels: float) -> float:
    """E[eta^2] over the Bernoulli reception flag; < 1 is necessary for MSS."""
    if n_levels < 1.0:
        raise ValueError(f"need N >= 1, got {n_levels}")
    if not (0.0 <= p < 1.0):
        raise ValueError(f"loss probability must be in [0, 1), got {p}")
    return p * eta(lambda_abs, eps_n, n_levels, 0) ** 2 + (1.0 - p) * eta(
        lambda_abs, eps_n, n_levels, 1
    ) ** 2


def _hull_measure_exact(a_lo: Fraction, a_hi: Fraction, y_lo: Fraction, y_hi: Fraction) -> Fraction:
    products = (a_lo * y_lo, a_lo * y_hi, a_hi * y_lo, a_hi * y_hi)
    return max(products) - min(products)


def max_cell_expansion(
    a_n_star: float, eps_n: float, n_levels: int, gamma: int, sigma: float
) -> float:
    """Largest product-hull length over all decoder cells at one step.

    Brute force in exact rational arithmetic: enumerate the N quantizer
    cells of [-sigma/2, sigma/2] (reception) or the whole range (loss),
    and maximize the length of the coefficient-box product hull.  Equals
    eta * sigma; the enumeration is the independent check of that
    identity.
    """
    if n_levels < 1 or n_levels != int(n_levels):
        raise ValueError(f"need integer N >= 1, got {n_levels}")
    if gamma not in (0, 1):
        raise ValueError(f"gamma must be 0 or 1, got {gamma}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    a_lo = Fraction(a_n_star) - Fraction(eps_n)
    a_hi = Fraction(a_n_star) + Fraction(eps_n)
    s = Fraction(sigma)
    if gamma == 0:
        return float(_hull_measure_exact(a_lo, a_hi, -s / 2, s / 2))
    n = int(n_levels)
    best = Fraction(0)
    for i in range(n):
        y_lo = -s / 2 + s * i / n
        y_hi = -s / 2 + s * (i + 1) / n
        best = max(best, _hull_measure_exact(a_lo, a_hi, y_lo, y_hi))
    return float(best)
