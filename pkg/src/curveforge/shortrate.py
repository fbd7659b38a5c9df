"""Gaussian short-rate models with closed-form zero-coupon prices.

Two models live here:

* a one-factor mean-reverting model,
      dr = a (b - r) dt + sigma dW,
  with price P(t,T) = A(t,T) exp(-B(t,T) r_t);

* a two-additive-factor model, r(t) = x(t) + y(t) + phi(t), with
      dx = -a x dt + sigma dW1,   dy = -b y dt + eta dW2,
      dW1 dW2 = rho dt,
  where the deterministic shift phi is never materialized: prices are
  expressed relative to an observed initial discount curve, so the curve is
  reproduced exactly at time zero by construction.

Both models admit exact Gaussian transition densities over arbitrary steps,
and their log-prices are affine in the state -- which is what makes exact
state inversion (and hence exact likelihood work) possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import DiscountCurve
from .errors import BoundaryError, DegenerateStepError, OrderingError, SingularInversionError

INVERSION_DET_TOL = 1e-14


def decay_loading(k: float, tau):
    """Affine loading (1 - exp(-k tau)) / k, computed stably for small k."""
    return -np.expm1(-k * np.asarray(tau, dtype=float)) / k


# ---------------------------------------------------------------------------
# one-factor model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VasicekParams:
    """Mean-reversion speed a, long-run level b, volatility sigma."""

    a: float
    b: float
    sigma: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.b <= 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def vasicek_ab(params: VasicekParams, t: float, T: float) -> tuple[float, float]:
    """Price coefficients (A, B) with P(t,T) = A exp(-B r)."""
    if T < t:
        raise OrderingError(f"maturity {T} precedes valuation time {t}")
    a, b, sigma = params.a, params.b, params.sigma
    tau = T - t
    B = float(decay_loading(a, tau))
    lnA = (b - sigma**2 / (2.0 * a**2)) * (B - tau) - sigma**2 * B**2 / (4.0 * a)
    return math.exp(lnA), B


def vasicek_price(params: VasicekParams, r: float, t: float, T: float) -> float:
    """Zero-coupon price P(t, T) given the short rate r at t."""
    A, B = vasicek_ab(params, t, T)
    return A * math.exp(-B * r)


def vasicek_transition(
    params: VasicekParams, r_s: float, dt: float
) -> tuple[float, float]:
    """Exact conditional (mean, variance) of r after a step of dt years."""
    if dt <= 0:
        raise DegenerateStepError(f"step must be positive, got {dt}")
    a, b, sigma = params.a, params.b, params.sigma
    decay = math.exp(-a * dt)
    mean = r_s * decay + b * (1.0 - decay)
    var = sigma**2 * (-math.expm1(-2.0 * a * dt)) / (2.0 * a)
    return mean, var


def vasicek_invert_state(params: VasicekParams, price: float, t: float, T: float) -> float:
    """Short rate implied by an observed zero price: r = (ln A - ln P)/B."""
    if price <= 0:
        raise ValueError(f"price must be positive, got {price}")
    A, B = vasicek_ab(params, t, T)
    if B == 0.0 or T == t:
        raise SingularInversionError("zero time to maturity: price carries no state")
    return (math.log(A) - math.log(price)) / B


# ---------------------------------------------------------------------------
# two-factor model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class G2Params:
    """Factor reversion speeds a, b; volatilities sigma, eta; correlation rho."""

    a: float
    b: float
    sigma: float
    eta: float
    rho: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"reversion speeds must be positive, got a={self.a}, b={self.b}")
        if self.sigma <= 0 or self.eta <= 0:
            raise ValueError(
                f"volatilities must be positive, got sigma={self.sigma}, eta={self.eta}"
            )
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class G2State:
    """Factor values (x, y) observed at time t (years from the curve date)."""

    x: float
    y: float
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise OrderingError(f"state time must be >= 0, got {self.t}")


def g2pp_variance(params: G2Params, t, T):
    """Variance of the integrated factor sum over (t, T].

    This is the V(t,T) entering the price exponent.  Each term is arranged
    as tau + (...)/speed with the parenthesis built from expm1, so the value
    is exactly zero at tau = 0 and remains accurate for tiny speeds.
    Broadcasts over array arguments; scalar in, scalar out.
    """
    t_arr = np.asarray(t, dtype=float)
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < t_arr):
        raise OrderingError("maturity precedes valuation time")
    a, b, sigma, eta, rho = params.a, params.b, params.sigma, params.eta, params.rho
    tau = T_arr - t_arr

    ea = np.expm1(-a * tau)          # exp(-a tau) - 1
    e2a = np.expm1(-2.0 * a * tau)
    eb = np.expm1(-b * tau)
    e2b = np.expm1(-2.0 * b * tau)
    eab = np.expm1(-(a + b) * tau)

    term_x = (sigma / a) ** 2 * (tau + (2.0 * ea - 0.5 * e2a) / a)
    term_y = (eta / b) ** 2 * (tau + (2.0 * eb - 0.5 * e2b) / b)
    term_xy = (
        2.0 * rho * sigma * eta / (a * b)
        * (tau + ea / a + eb / b - eab / (a + b))
    )
    out = term_x + term_y + term_xy
    return out if out.ndim else float(out)


def g2pp_log_price(
    params: G2Params, curve: DiscountCurve, state: G2State, T: float
) -> float:
    """log P(t, T) under the curve-fitted two-factor model."""
    t = state.t
    if T < t:
        raise OrderingError(f"maturity {T} precedes state time {t}")
    tau = T - t
    market = curve.log_discount(T) - curve.log_discount(t)
    adjust = 0.5 * (
        g2pp_variance(params, t, T)
        - g2pp_variance(params, 0.0, T)
        + g2pp_variance(params, 0.0, t)
    )
    loadings = (
        decay_loading(params.a, tau) * state.x + decay_loading(params.b, tau) * state.y
    )
    return market + adjust - float(loadings)


def g2pp_price(params: G2Params, curve: DiscountCurve, state: G2State, T: float) -> float:
    """Zero-coupon price P(t, T); reproduces the curve exactly at t = 0 with
    zero factors."""
    return math.exp(g2pp_log_price(params, curve, state, T))


def g2pp_transition(
    params: G2Params, state: G2State, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact conditional mean vector and covariance matrix after dt years."""
    if dt <= 0:
        raise DegenerateStepError(f"step must be positive, got {dt}")
    a, b, sigma, eta, rho = params.a, params.b, params.sigma, params.eta, params.rho
    mean = np.array([state.x * math.exp(-a * dt), state.y * math.exp(-b * dt)])
    var_x = sigma**2 * (-math.expm1(-2.0 * a * dt)) / (2.0 * a)
    var_y = eta**2 * (-math.expm1(-2.0 * b * dt)) / (2.0 * b)
    cov_xy = rho * sigma * eta * (-math.expm1(-(a + b) * dt)) / (a + b)
    cov = np.array([[var_x, cov_xy], [cov_xy, var_y]])
    return mean, cov


def g2pp_invert_states(
    params: G2Params,
    curve: DiscountCurve,
    prices: tuple[float, float],
    t: float,
    maturities: tuple[float, float],
) -> G2State:
    """Recover (x, y) from two observed zero prices at distinct maturities.

    Solves the 2x2 linear system given by the affine log-price at both
    maturities.  Raises SingularInversionError when the loading matrix is
    numerically singular (equal maturities, or a == b making the factors
    indistinguishable).
    """
    T1, T2 = maturities
    p1, p2 = prices
    if p1 <= 0 or p2 <= 0:
        raise ValueError("prices must be positive")
    if T1 <= t or T2 <= t:
        raise OrderingError("both maturities must lie strictly after t")
    tau1, tau2 = T1 - t, T2 - t
    ba1 = float(decay_loading(params.a, tau1))
    ba2 = float(decay_loading(params.a, tau2))
    bb1 = float(decay_loading(params.b, tau1))
    bb2 = float(decay_loading(params.b, tau2))
    det = ba1 * bb2 - ba2 * bb1
    if abs(det) < INVERSION_DET_TOL:
        raise SingularInversionError(
            f"loading matrix is singular to working precision (det={det:.3e}); "
            "need distinct maturities and distinct reversion speeds"
        )

    def rhs(price: float, T: float) -> float:
        market = curve.log_discount(T) - curve.log_discount(t)
        adjust = 0.5 * (
            g2pp_variance(params, t, T)
            - g2pp_variance(params, 0.0, T)
            + g2pp_variance(params, 0.0, t)
        )
        return market + adjust - math.log(price)

    k1 = rhs(p1, T1)
    k2 = rhs(p2, T2)
    x = (k1 * bb2 - k2 * bb1) / det
    y = (ba1 * k2 - ba2 * k1) / det
    return G2State(x=x, y=y, t=t)


def g2pp_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a 2x2 transition covariance.

    Tiny negative Schur complements from rounding are clamped to zero;
    anything materially negative means |rho| reached 1 and is an error.
    """
    v1, c = cov[0, 0], cov[0, 1]
    v2 = cov[1, 1]
    if v1 <= 0 or v2 <= 0:
        raise BoundaryError("transition covariance is degenerate")
    l11 = math.sqrt(v1)
    l21 = c / l11
    rem = v2 - l21 * l21
    if rem < -1e-12 * v2:
        raise BoundaryError("transition covariance is not positive semi-definite")
    return np.array([[l11, 0.0], [l21, math.sqrt(max(rem, 0.0))]])
