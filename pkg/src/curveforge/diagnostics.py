"""Static-arbitrage audits and price-surface generation.

A discount curve that is anywhere increasing in maturity hands out a free
lunch: sell the richer long bond, buy the cheaper short one.  This module
flags such inversions in any ordered price list, evaluates the closed-form
maturity derivative of the two-factor model price (whose sign makes the
same statement locally), and builds date-by-maturity price surfaces on the
standard tenor grid.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .curve import DiscountCurve
from .errors import OrderingError
from .estimation import StateSeries
from .hjm import HoLeeParams, HullWhiteParams, holee_price, hullwhite_price
from .shortrate import (
    G2Params,
    G2State,
    VasicekParams,
    decay_loading,
    g2pp_price,
    vasicek_price,
)

#: Tenor grid (year fractions) used for surfaces: 1, 2, 3, 6, 9 months and
#: 1, 2, 3, 5, 7, 10, 15, 20, 25 years.
MATURITY_GRID = (
    1.0 / 12.0,
    2.0 / 12.0,
    3.0 / 12.0,
    6.0 / 12.0,
    9.0 / 12.0,
    1.0,
    2.0,
    3.0,
    5.0,
    7.0,
    10.0,
    15.0,
    20.0,
    25.0,
)

_SIGN_SCAN_POINTS = 241
_BISECT_STEPS = 40


@dataclass
class ArbitrageReport:
    """Outcome of a static-arbitrage audit.

    violations lists every pair (T_low, T_high, P_low, P_high) with
    T_low < T_high and P_low < P_high — a longer bond priced strictly above
    a shorter one.  derivative_sign_changes lists maturities where the
    analytic dP/dT crosses zero (populated by the derivative scan only).
    """

    violations: list[tuple[float, float, float, float]]
    derivative_sign_changes: list[float] = field(default_factory=list)

    def __post_init__(self):
        for t_lo, t_hi, p_lo, p_hi in self.violations:
            if not (t_lo < t_hi and p_lo < p_hi):
                raise ValueError(
                    f"malformed violation ({t_lo}, {t_hi}, {p_lo}, {p_hi}): "
                    "requires T_low < T_high and P_low < P_high"
                )

    @property
    def clean(self) -> bool:
        return not self.violations and not self.derivative_sign_changes


@dataclass
class PriceSurface:
    """Zero prices per date on the standard tenor grid.

    values[i, j] is the model price at dates[i] for tenor maturities[j];
    cells whose evaluation failed hold nan and carry an entry in failures.
    """

    dates: list[dt.date] | list[float]
    maturities: tuple[float, ...]
    values: np.ndarray
    failures: list[tuple[int, float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.dates), len(self.maturities)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.maturities)} maturities"
            )
        finite = self.values[np.isfinite(self.values)]
        if finite.size and (np.any(finite <= 0.0) or np.any(finite > 1.0)):
            raise ValueError("surface prices must lie in (0, 1]")


def g2pp_dPdT(
    params: G2Params, curve: DiscountCurve, state: G2State, T: float
) -> float:
    """Closed-form maturity derivative dP(t,T)/dT of the two-factor price.

    d log P / dT = -f(0,T) + (D(T-t) - D(T))/2 - e^{-a tau} x - e^{-b tau} y
    with D(u) = sigma^2 B_a(u)^2 + eta^2 B_b(u)^2
                + 2 rho sigma eta B_a(u) B_b(u),
    the T-derivative of the price variance over [., T].  The market forward
    f(0,T) is the curve's own analytic (piecewise-constant) forward, so the
    result is the exact derivative of g2pp_price between curve pillars.
    """
    t = state.t
    if T <= t:
        raise OrderingError(f"maturity {T} must exceed valuation time {t}")
    a, b = params.a, params.b
    sigma, eta, rho = params.sigma, params.eta, params.rho
    tau = T - t

    def dvar(u: float) -> float:
        ba = float(decay_loading(a, u))
        bb = float(decay_loading(b, u))
        return (
            (sigma * ba) ** 2
            + (eta * bb) ** 2
            + 2.0 * rho * sigma * eta * ba * bb
        )

    dlog = (
        -curve.forward(T)
        + 0.5 * (dvar(tau) - dvar(T))
        - math.exp(-a * tau) * state.x
        - math.exp(-b * tau) * state.y
    )
    return g2pp_price(params, curve, state, T) * dlog


def check_monotone(prices: list[tuple[float, float]]) -> ArbitrageReport:
    """Audit an ordered (maturity, price) list for price inversions.

    Reports every pair — adjacent or not — where the longer maturity is
    priced strictly above the shorter one.  The report is empty exactly
    when prices are non-increasing in maturity.
    """
    taus = [tau for tau, _ in prices]
    if any(hi <= lo for lo, hi in zip(taus, taus[1:])):
        raise OrderingError("maturities must be strictly increasing")
    if any(p <= 0 for _, p in prices):
        raise ValueError("prices must be positive")
    violations = [
        (prices[i][0], prices[j][0], prices[i][1], prices[j][1])
        for i in range(len(prices))
        for j in range(i + 1, len(prices))
        if prices[j][1] > prices[i][1]
    ]
    return ArbitrageReport(violations=violations)


def scan_derivative_signs(
    params: G2Params,
    curve: DiscountCurve,
    state: G2State,
    tau_lo: float = 1.0 / 12.0,
    tau_hi: float = 25.0,
    n_points: int = _SIGN_SCAN_POINTS,
) -> ArbitrageReport:
    """Locate maturities where the analytic dP/dT changes sign.

    Audits the model prices at the scanned maturities for inversions and
    bisects each bracketing interval of the derivative to locate the
    crossing; both results land in one report.
    """
    if tau_hi <= tau_lo:
        raise OrderingError("scan interval is empty")
    taus = np.linspace(tau_lo, tau_hi, n_points)
    maturities = state.t + taus
    derivs = np.array(
        [g2pp_dPdT(params, curve, state, T) for T in maturities]
    )
    crossings = []
    for i in range(len(maturities) - 1):
        d0, d1 = derivs[i], derivs[i + 1]
        if d0 == 0.0:
            crossings.append(float(maturities[i]))
            continue
        if d0 * d1 < 0.0:
            lo, hi, dlo = maturities[i], maturities[i + 1], d0
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                dm = g2pp_dPdT(params, curve, state, mid)
                if dm == 0.0:
                    lo = hi = mid
                    break
                if (dm > 0) == (dlo > 0):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            crossings.append(0.5 * (lo + hi))
    price_list = [
        (float(tau), g2pp_price(params, curve, state, T))
        for tau, T in zip(taus, maturities)
    ]
    monotone = check_monotone(price_list)
    return ArbitrageReport(
        violations=monotone.violations, derivative_sign_changes=crossings
    )


def find_increasing_price_state(
    params: G2Params,
    curve: DiscountCurve,
    magnitude: float = 0.2,
    times: tuple[float, ...] = (0.0, 0.5, 1.0),
    tau_lo: float = 1.0,
    tau_hi: float = 25.0,
    n_taus: int = 97,
) -> tuple[G2State, float, float] | None:
    """Deterministic grid search for a state with increasing bond prices.

    Scans the two opposite-sign factor configurations (+m, -m) and (-m, +m)
    over a fixed time/maturity grid and returns the (state, T, dP/dT)
    triple with the largest positive derivative, or None when every point
    has non-positive slope.
    """
    best: tuple[G2State, float, float] | None = None
    taus = np.linspace(tau_lo, tau_hi, n_taus)
    for x, y in ((magnitude, -magnitude), (-magnitude, magnitude)):
        for t in times:
            state = G2State(x=x, y=y, t=t)
            for tau in taus:
                deriv = g2pp_dPdT(params, curve, state, t + float(tau))
                if deriv > 0.0 and (best is None or deriv > best[2]):
                    best = (state, t + float(tau), deriv)
    return best


def build_surface(
    model: str,
    params,
    states: StateSeries,
    curve: DiscountCurve,
) -> PriceSurface:
    """Price every date of a state series on the standard tenor grid.

    Each cell is priced independently; a failing cell (pricing error, or a
    value outside (0, 1]) is recorded and left as nan without poisoning the
    rest of the surface.
    """
    times = np.asarray(states.times, dtype=float)
    if times.size == 0:
        raise ValueError("state series is empty")
    values = np.asarray(states.values, dtype=float)

    def cell(i: int, tau: float) -> float:
        t = float(times[i])
        T = t + tau
        if model == "vasicek":
            if not isinstance(params, VasicekParams):
                raise TypeError("vasicek surface needs VasicekParams")
            return vasicek_price(params, float(values[i]), t, T)
        if model == "g2pp":
            if not isinstance(params, G2Params):
                raise TypeError("g2pp surface needs G2Params")
            x, y = values[i]
            return g2pp_price(params, curve, G2State(x=float(x), y=float(y), t=t), T)
        if model == "holee":
            if not isinstance(params, HoLeeParams):
                raise TypeError("holee surface needs HoLeeParams")
            return holee_price(params, curve, float(values[i]), t, T)
        if model == "hullwhite":
            if not isinstance(params, HullWhiteParams):
                raise TypeError("hullwhite surface needs HullWhiteParams")
            return hullwhite_price(params, curve, float(values[i]), t, T)
        raise ValueError(f"unknown model {model!r}")

    n_dates = times.size
    grid = np.full((n_dates, len(MATURITY_GRID)), np.nan)
    failures: list[tuple[int, float, str]] = []
    for i in range(n_dates):
        for j, tau in enumerate(MATURITY_GRID):
            try:
                p = cell(i, tau)
                if not (0.0 < p <= 1.0) or not math.isfinite(p):
                    raise ValueError(f"price {p} outside (0, 1]")
                grid[i, j] = p
            except Exception as exc:  # poison this cell only
                failures.append((i, tau, str(exc)))
    dates = states.dates if states.dates is not None else [float(t) for t in times]
    return PriceSurface(
        dates=dates,
        maturities=MATURITY_GRID,
        values=grid,
        failures=failures,
    )
