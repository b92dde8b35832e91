"""Noise/accuracy tradeoff calculators for the three mappings and the
concatenated-code overhead estimate.

Only the exponents are meaningful; the prefactors ``c_map`` and ``c_noise``
stand in for unspecified constants and default to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.optimize import minimize_scalar

MAPPINGS = ("trotter", "floquet-magnus", "schrieffer-wolff")


@dataclass(frozen=True)
class TradeoffConstants:
    c_map: float = 1.0
    c_noise: float = 1.0

    def __post_init__(self):
        if self.c_map <= 0 or self.c_noise <= 0:
            raise ValueError("tradeoff constants must be positive")


@dataclass(frozen=True)
class TradeoffResult:
    mapping: str
    p: int
    d: int
    gamma: float
    tau: float
    control: float          # T for trotter, uptau otherwise
    control_name: str
    alpha_exponent: float
    error_bound: float
    t_sim_bound: float


def _check(p: int, d: int, gamma: float, tau: float, min_p: int) -> None:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if tau <= 0 or d < 1 or p < min_p:
        raise ValueError(f"need tau > 0, d >= 1 and p >= {min_p}")


def _integer_T(p: int, d: int, rate: float, tau: float, c: TradeoffConstants) -> tuple[int, float]:
    """Minimise ``c_map tau^(d+p+1) / T^p + c_noise rate T^(d+1)`` over integers ``T >= 1``."""
    def f(T: float) -> float:
        return c.c_map * tau ** (d + p + 1) / T ** p + c.c_noise * rate * T ** (d + 1)

    t_star = (p * c.c_map * tau ** (d + p + 1) / ((d + 1) * c.c_noise * rate)) ** (1.0 / (p + d + 1))
    if t_star > 1e12:
        # integer rounding is irrelevant here; report the stationary point
        return int(round(t_star)), f(t_star)
    lo = max(1, math.floor(t_star) - 2)
    best = min(range(lo, math.ceil(t_star) + 3), key=lambda T: (f(T), T))
    return best, f(best)


def trotter_tradeoff(p: int, d: int, gamma: float, tau: float,
                     constants: TradeoffConstants = TradeoffConstants()) -> TradeoffResult:
    _check(p, d, gamma, tau, 1)
    T, err = _integer_T(p, d, gamma, tau, constants)
    alpha = p / (p + d + 1)
    return TradeoffResult("trotter", p, d, gamma, tau, float(T), "T", alpha, err,
                          tau * gamma ** (-1.0 / (p + d + 1)))


def _uptau_min(k: int, gamma: float, tau: float, c: TradeoffConstants) -> tuple[float, float]:
    """Minimise ``tau^(d+1) (c_map u + c_noise gamma / u^k)`` over ``u`` (prefactor applied by caller).

    For ``k = 0`` the noise term does not depend on ``u`` and the bound keeps
    decreasing as ``u -> 0``; we then report the balance point
    ``u = c_noise gamma / c_map`` where the two terms are equal.
    """
    if k == 0:
        u = c.c_noise * gamma / c.c_map
        return u, c.c_map * u + c.c_noise * gamma

    def g(log_u: float) -> float:
        u = math.exp(log_u)
        return math.log(c.c_map * u + c.c_noise * gamma / u ** k)

    guess = math.log(k * c.c_noise * gamma / c.c_map) / (k + 1)
    res = minimize_scalar(g, bracket=(guess - 2.0, guess + 2.0), tol=1e-12)
    return math.exp(res.x), math.exp(res.fun)


def fm_tradeoff(p: int, d: int, gamma: float, tau: float,
                constants: TradeoffConstants = TradeoffConstants()) -> TradeoffResult:
    _check(p, d, gamma, tau, 0)
    k = p * (d + 1)
    u, val = _uptau_min(k, gamma, tau, constants)
    alpha = 1.0 / (k + 1)
    return TradeoffResult("floquet-magnus", p, d, gamma, tau, u, "uptau", alpha, tau ** (d + 1) * val,
                          tau * gamma ** (-p / (k + 1)))


def sw_tradeoff(p: int, d: int, gamma: float, tau: float,
                constants: TradeoffConstants = TradeoffConstants()) -> TradeoffResult:
    _check(p, d, gamma, tau, 0)
    k = p * (d + 1) + 1
    u, val = _uptau_min(k, gamma, tau, constants)
    alpha = 1.0 / (k + 1)
    return TradeoffResult("schrieffer-wolff", p, d, gamma, tau, u, "uptau", alpha, tau ** (d + 1) * val,
                          tau * gamma ** (-(p + 1) / (k + 1)))


def tradeoff(mapping: str, p: int, d: int, gamma: float, tau: float,
             constants: TradeoffConstants = TradeoffConstants()) -> TradeoffResult:
    fn = {"trotter": trotter_tradeoff, "floquet-magnus": fm_tradeoff, "schrieffer-wolff": sw_tradeoff}
    if mapping not in fn:
        raise ValueError(f"unknown mapping {mapping!r}; expected one of {MAPPINGS}")
    return fn[mapping](p, d, gamma, tau, constants)


# ---------------------------------------------------------------------------
# Concatenated codes


@dataclass(frozen=True)
class FTParams:
    """``xi0`` physical rate, ``xi_th`` threshold, base code distance ``2t+1``,
    ``L`` concatenation levels and target precision ``delta``.

    ``threshold_ratio`` is ``xi_th / xi0``; it is unrelated to the robustness
    exponent ``alpha_exponent`` of the tradeoff results.
    """
    xi0: float
    xi_th: float = 1e-2
    t: int = 1
    L: int = 0
    delta: float = 1e-3
    tau: float = 1.0
    d: int = 1
    p: int = 2
    c1: float = 1.0
    c2: float = 1.0
    max_L: int = 64

    def __post_init__(self):
        if not (0 < self.xi0 and 0 < self.xi_th):
            raise ValueError("noise rates must be positive")
        if self.xi0 >= self.xi_th:
            raise ValueError("below threshold required: xi0 must be smaller than xi_th")
        if self.t < 1 or self.L < 0 or self.p < 1 or self.d < 1:
            raise ValueError("need t >= 1, L >= 0, p >= 1, d >= 1")
        if not 0 < self.delta or self.tau <= 0:
            raise ValueError("delta and tau must be positive")

    @property
    def threshold_ratio(self) -> float:
        return self.xi_th / self.xi0


@dataclass(frozen=True)
class FTOverhead:
    xi_L: float
    optimal_T: int
    total_error: float
    required_L: int
    required_L_closed_form: int


def concatenated_rate(xi0: float, xi_th: float, t: int, L: int) -> float:
    """``xi_th (xi0/xi_th)^((t+1)^L)``, correctly rounded for moderate exponents."""
    n = (t + 1) ** L
    if n <= 256:
        return float(Fraction(xi_th) * (Fraction(xi0) / Fraction(xi_th)) ** n)
    return xi_th * math.exp(n * math.log(xi0 / xi_th))


def _total_error(params: FTParams, L: int) -> tuple[float, int, float]:
    xi = concatenated_rate(params.xi0, params.xi_th, params.t, L)
    if xi == 0.0:
        return 0.0, 0, 0.0
    c = TradeoffConstants(params.c1, params.c2)
    T, err = _integer_T(params.p, params.d, xi, params.tau, c)
    return xi, T, err


def required_L_closed_form(params: FTParams) -> int:
    """``ceil(log[(p+d+1)/p * log(tau^(d+1)/delta) / log(xi_th/xi0)] / log(t+1))``, floored at 0."""
    p, d = params.p, params.d
    num = math.log(params.tau ** (d + 1) / params.delta)
    if num <= 0:
        return 0
    inner = (p + d + 1) / p * num / math.log(params.threshold_ratio)
    if inner <= 1:
        return 0
    return max(0, math.ceil(math.log(inner) / math.log(params.t + 1)))


def ft_overhead(params: FTParams) -> FTOverhead:
    xi, T, err = _total_error(params, params.L)
    required = None
    for L in range(params.max_L + 1):
        if _total_error(params, L)[2] <= params.delta:
            required = L
            break
    if required is None:
        raise ValueError(f"precision {params.delta} not reachable within {params.max_L} levels")
    return FTOverhead(xi, T, err, required, required_L_closed_form(params))
