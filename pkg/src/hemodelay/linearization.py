"""Linearization and characteristic-equation coefficients at a steady state.

Perturbing (Q, M, E) about an equilibrium of the delayed system yields a
linear DDE whose characteristic equation is

    (lambda + mu)(lambda + k)(lambda + A - B*exp(-lambda*tau))
        - G*H*(C - D*exp(-lambda*tau)) = 0,

written throughout as P(lambda) + Q(lambda)*exp(-lambda*tau) = 0 with cubic
P and quadratic Q.  Purely imaginary roots lambda = i*omega require
|P(i*omega)|^2 = |Q(i*omega)|^2, a cubic condition in z = omega^2:

    h(z) = z^3 + b1*z^2 + b2*z + b3 = 0.

This module computes the six linearization constants A, B, C, D, G, H, the
polynomial coefficients a1..a6 and b1..b3 (each b cross-checked against an
independently expanded form), the tau = 0 Routh-Hurwitz verdict, and the
stability verdict for the extinction steady state.  The root geometry of h
and the crossing machinery live in the switch module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .equilibria import Equilibrium
from .model import ModelParams, validate


@dataclass(frozen=True)
class LinCoeffs:
    """Constants of the linearized system at one equilibrium and delay."""

    A: float
    B: float
    C: float
    D: float
    G: float
    H: float
    tau: float


@dataclass(frozen=True)
class CharCoeffs:
    """Coefficients of P, Q and of the imaginary-root cubic h.

    Carries mu, k and the originating LinCoeffs so downstream checks can
    recompute derived quantities from the raw linearization constants.
    """

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    b1: float
    b2: float
    b3: float
    mu: float
    k: float
    tau: float
    lin: LinCoeffs


def linearize(p: ModelParams, eq: Equilibrium, tau: float) -> LinCoeffs:
    """Linearization constants at `eq`, which must be computed at `tau`."""
    if eq.tau != tau:
        raise ValueError(f"equilibrium computed at tau={eq.tau}, requested tau={tau}")
    r = p.rates
    Q, M, E = eq.Q, eq.M, eq.E
    surv = 2.0 * math.exp(-p.gamma * tau)
    b = r.beta(Q, E)
    bQ = r.beta_dQ(Q, E)
    bE = r.beta_dE(Q, E)
    return LinCoeffs(
        A=p.delta + r.g_prime(Q) + b + bQ * Q,
        B=surv * (b + bQ * Q),
        C=bE * Q,
        D=surv * bE * Q,
        G=r.g_prime(Q),
        H=-r.f_prime(M),
        tau=tau,
    )


def _close(x: float, y: float, rel: float) -> bool:
    return abs(x - y) <= rel * max(1.0, abs(x), abs(y))


def char_coeffs(c: LinCoeffs, mu: float, k: float) -> CharCoeffs:
    """P/Q coefficients and the cubic h, with the b's cross-validated.

    Each b coefficient is computed from the a's and, independently, from the
    expanded form in A..H; disagreement beyond 1e-9 relative raises
    AssertionError since it can only mean a transcription bug.
    """
    A, B, C, D, G, H = c.A, c.B, c.C, c.D, c.G, c.H
    a1 = mu + k + A
    a2 = mu * k + A * (mu + k)
    a3 = mu * k * A - G * H * C
    a4 = -B
    a5 = -B * (mu + k)
    a6 = -B * mu * k + G * H * D

    b1 = a1 * a1 - 2.0 * a2 - a4 * a4
    b2 = a2 * a2 + 2.0 * a4 * a6 - 2.0 * a1 * a3 - a5 * a5
    b3 = a3 * a3 - a6 * a6

    AB = A * A - B * B
    b1x = mu * mu + k * k + AB
    b2x = (
        (mu * k) ** 2
        + AB * (mu * mu + k * k)
        + 2.0 * G * H * (C * (mu + k + A) - B * D)
    )
    b3x = (
        (mu * k) ** 2 * AB
        + (G * H) ** 2 * (C * C - D * D)
        + 2.0 * mu * k * G * H * (B * D - A * C)
    )
    for name, lo_form, hi_form in (("b1", b1, b1x), ("b2", b2, b2x), ("b3", b3, b3x)):
        if not _close(lo_form, hi_form, 1e-9):
            raise AssertionError(
                f"{name} transcriptions disagree: {lo_form!r} vs {hi_form!r}"
            )
    return CharCoeffs(a1, a2, a3, a4, a5, a6, b1, b2, b3, mu, k, c.tau, c)


def h_value(cc: CharCoeffs, z: float) -> float:
    """The imaginary-root cubic h(z) = z^3 + b1 z^2 + b2 z + b3."""
    return ((z + cc.b1) * z + cc.b2) * z + cc.b3


def h_prime(cc: CharCoeffs, z: float) -> float:
    return (3.0 * z + 2.0 * cc.b1) * z + cc.b2


def routh_hurwitz_tau0(cc: CharCoeffs) -> bool:
    """Stability of the no-delay cubic: (a1+a4)(a2+a5) > a3+a6.

    The margin is recomputed in the factored form
    (mu+k)*(mu*k + (A-B)*(mu+k+A-B)) - G*H*(D-C); the two must agree to
    1e-9 relative or an AssertionError is raised.
    """
    if cc.tau != 0.0:
        raise ValueError(f"coefficients were built at tau={cc.tau}, not 0")
    margin = (cc.a1 + cc.a4) * (cc.a2 + cc.a5) - (cc.a3 + cc.a6)
    lc, mu, k = cc.lin, cc.mu, cc.k
    AmB = lc.A - lc.B
    factored = (mu + k) * (mu * k + AmB * (mu + k + AmB)) - lc.G * lc.H * (lc.D - lc.C)
    if not _close(margin, factored, 1e-9):
        raise AssertionError(
            f"Routh-Hurwitz margins disagree: {margin!r} vs {factored!r}"
        )
    return margin > 0.0


def trivial_stability(p: ModelParams, tau: float) -> str:
    """Verdict for the extinction steady state: stable, unstable or boundary.

    The governing scalar equation is lambda + A - B*exp(-lambda*tau) = 0 with
    A = delta + g'(0) + beta(0, f(0)/k) and B = 2*exp(-gamma*tau)*beta(0,
    f(0)/k); it is stable exactly when no positive steady state exists at
    this delay, i.e. delta + g'(0) > (2*exp(-gamma*tau) - 1)*beta(0, f(0)/k),
    and unstable when the inequality reverses.  Equality is the transcritical
    point and is reported as boundary, not classified.
    """
    bad = validate(p)
    if bad:
        raise ValueError("; ".join(bad))
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    thr = p.delta + p.rates.g_prime(0.0)
    reward = (2.0 * math.exp(-p.gamma * tau) - 1.0) * p.rates.beta(
        0.0, p.rates.f(0.0) / p.k
    )
    if thr > reward:
        return "stable"
    if thr < reward:
        return "unstable"
    return "boundary"


def _zeta(x: float) -> float:
    """Unique solution of zeta = -x*tan(zeta) on (0, pi), for x != 0.

    For x > 0 the root lies in (pi/2, pi), for -1 < x < 0 in (0, pi/2); both
    brackets give a sign change of zeta + x*tan(zeta) and bisection runs to
    1e-12.
    """
    if x > 0.0:
        lo, hi = 0.5 * math.pi + 1e-12, math.pi - 1e-12
    elif x > -1.0:
        lo, hi = 1e-12, 0.5 * math.pi - 1e-12
    else:
        raise ValueError(f"no root of zeta = -x*tan(zeta) on (0, pi) for x={x}")
    f_lo = lo + x * math.tan(lo)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        f_mid = mid + x * math.tan(mid)
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hayes_check(A: float, B: float, tau: float) -> bool:
    """All roots of lambda + A - B*exp(-lambda*tau) = 0 lie strictly left.

    For tau = 0 the single root is B - A.  For tau > 0 the three conditions
    are A*tau > -1, (A - B)*tau > 0 and B*tau < zeta*sin(zeta) -
    A*tau*cos(zeta) with zeta = -A*tau*tan(zeta) on (0, pi).  Shipped as an
    independent oracle for trivial_stability; A*tau = 0 with tau > 0 is out
    of scope and raises ValueError.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return B - A < 0.0
    x = A * tau
    if not x > -1.0:
        return False
    if not (A - B) * tau > 0.0:
        return False
    if x == 0.0:
        raise ValueError("A*tau == 0 with tau > 0 is not supported")
    z = _zeta(x)
    return B * tau < z * math.sin(z) - x * math.cos(z)
