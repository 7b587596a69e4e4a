"""Steady states of the delayed production model and their delay threshold.

The model always has the extinction steady state (0, 0, f(0)/k).  A positive
steady state exists exactly when the effective re-entry reward at zero pool
size beats death plus differentiation, i.e.

    delta + g'(0) < (2*exp(-gamma*tau) - 1) * beta(0, f(0)/k),

which for gamma > 0 is an upper bound on the delay:

    tau < tau_max = (1/gamma) * log( 2*b00 / (delta + g'(0) + b00) ),

with b00 = beta(0, f(0)/k).  The positive steady state solves

    (2*exp(-gamma*tau) - 1) * beta(Q, E(Q)) = delta + g(Q)/Q,

where E(Q) = f(g(Q)/mu)/k chains the two fast compartments; the left side is
decreasing in Q, the right side nondecreasing, so the root is unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import HillRates, ModelParams, NumericalError, SystemState

# residual tolerance is scaled by this reference rate, see positive_equilibrium
_BRACKET_LO = 1e-12


@dataclass(frozen=True)
class Equilibrium:
    kind: str  # "trivial" or "positive"
    Q: float
    M: float
    E: float
    tau: float  # delay at which the equilibrium was computed

    @property
    def state(self) -> SystemState:
        return SystemState(self.Q, self.M, self.E)


def tau_max(p: ModelParams) -> float | None:
    """Delay threshold below which a positive steady state exists.

    Returns None when delta + g'(0) >= beta(0, f(0)/k), in which case no
    delay admits a positive steady state; returns math.inf for gamma = 0
    (no in-cycle apoptosis, the reward factor stays at 2 for every delay).
    """
    b00 = p.rates.beta(0.0, p.rates.f(0.0) / p.k)
    thr = p.delta + p.rates.g_prime(0.0)
    if not thr < b00:
        return None
    if p.gamma == 0.0:
        return math.inf
    return math.log(2.0 * b00 / (thr + b00)) / p.gamma


def trivial_equilibrium(p: ModelParams) -> Equilibrium:
    """The extinction steady state (0, 0, f(0)/k)."""
    return Equilibrium("trivial", 0.0, 0.0, p.rates.f(0.0) / p.k, p.tau)


def _chained_E(p: ModelParams, Q: float) -> float:
    return p.rates.f(p.rates.g(Q) / p.mu) / p.k


def _residual(p: ModelParams, alpha: float, Q: float) -> float:
    r = p.rates
    return alpha * r.beta(Q, _chained_E(p, Q)) - p.delta - r.g(Q) / Q


def _residual_prime(p: ModelParams, alpha: float, Q: float) -> float:
    r = p.rates
    E = _chained_E(p, Q)
    dE = r.f_prime(r.g(Q) / p.mu) * r.g_prime(Q) / (p.mu * p.k)
    dbeta = r.beta_dQ(Q, E) + r.beta_dE(Q, E) * dE
    return alpha * dbeta - (r.g_prime(Q) * Q - r.g(Q)) / (Q * Q)


def positive_equilibrium(p: ModelParams, tau: float) -> Equilibrium | None:
    """Unique positive steady state at delay `tau`, or None past the threshold.

    The pool size is bracketed ([1e-12, doubling upward from 1]) and the
    bracket is shrunk by bisection, then polished with bracket-guarded Newton
    steps until the balance residual is below 1e-12*(delta + g'(0) + 1) and
    no longer improves.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    tm = tau_max(p)
    if tm is None or not tau < tm:
        return None
    alpha = 2.0 * math.exp(-p.gamma * tau) - 1.0

    lo = _BRACKET_LO
    r_lo = _residual(p, alpha, lo)
    if not r_lo > 0.0:
        raise NumericalError(
            "existence threshold holds but the balance residual is not positive at 0+"
        )
    hi = 1.0
    r_hi = _residual(p, alpha, hi)
    doublings = 0
    while r_hi > 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise NumericalError("no sign change found while expanding the bracket")
        r_hi = _residual(p, alpha, hi)

    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _residual(p, alpha, mid) > 0.0:
            lo = mid
        else:
            hi = mid

    # bracket-guarded Newton polish, run to the floating-point floor
    tol = 1e-12 * (p.delta + p.rates.g_prime(0.0) + 1.0)
    Q = 0.5 * (lo + hi)
    best, best_r = Q, abs(_residual(p, alpha, Q))
    for _ in range(60):
        rQ = _residual(p, alpha, Q)
        if abs(rQ) < best_r:
            best, best_r = Q, abs(rQ)
        if rQ > 0.0:
            lo = max(lo, Q)
        elif rQ < 0.0:
            hi = min(hi, Q)
        else:
            break
        d = _residual_prime(p, alpha, Q)
        step_ok = d != 0.0 and math.isfinite(d)
        if step_ok:
            Qn = Q - rQ / d
            step_ok = lo < Qn < hi
        if not step_ok:
            Qn = 0.5 * (lo + hi)
        if Qn == Q:
            break
        Q = Qn
    if best_r < abs(_residual(p, alpha, Q)):
        Q = best
    if not abs(_residual(p, alpha, Q)) < tol:
        raise NumericalError(
            f"equilibrium residual {abs(_residual(p, alpha, Q)):.3e} above tolerance {tol:.3e}"
        )
    M = p.rates.g(Q) / p.mu
    E = p.rates.f(M) / p.k
    return Equilibrium("positive", Q, M, E, tau)


def hill_equilibrium_closed_form(p: ModelParams, tau: float) -> Equilibrium:
    """Positive steady state of the Hill-rate family in closed form.

    With beta(E) = beta0*E/(1+E), g(Q) = G*Q and f(M) = a/(1+K*M**r), the
    balance equation is solvable explicitly:

        E* = (delta+G) / (beta0*alpha - (delta+G)),      alpha = 2*exp(-gamma*tau)-1
        Q* = (mu/G) * K**(-1/r)
             * ( (a*beta0*alpha - (delta+G)*(a+k)) / (k*(delta+G)) )**(1/r)
        M* = (G/mu) * Q*

    Used as the independent cross-check of the generic root-finder.
    Raises ValueError outside [0, tau_max) or when no positive steady state
    exists, TypeError for non-Hill rates.
    """
    hr = p.rates
    if not isinstance(hr, HillRates):
        raise TypeError("closed form requires HillRates")
    tm = tau_max(p)
    if tm is None:
        raise ValueError("no positive steady state for any delay")
    if not 0.0 <= tau < tm:
        raise ValueError(f"tau={tau} outside [0, tau_max={tm})")
    alpha = 2.0 * math.exp(-p.gamma * tau) - 1.0
    dg = p.delta + hr.G
    num = hr.a * hr.beta0 * alpha - dg * (hr.a + p.k)
    Q = (p.mu / hr.G) * hr.K ** (-1.0 / hr.r) * (num / (p.k * dg)) ** (1.0 / hr.r)
    M = (hr.G / p.mu) * Q
    E = dg / (hr.beta0 * alpha - dg)
    return Equilibrium("positive", Q, M, E, tau)
