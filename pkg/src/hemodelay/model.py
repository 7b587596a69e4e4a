"""Rate functions and vector field of a delayed blood-cell production model.

The state (Q, M, E) collects quiescent progenitor cells, circulating mature
cells and a regulating growth factor.  Quiescent cells are lost to apoptosis
(rate delta), to differentiation (rate g(Q)/Q) and to cell-cycle re-entry
(rate beta(Q, E)); cells that re-entered the cycle one delay tau earlier
return doubled, thinned by in-cycle apoptosis, which gives the reward factor
2*exp(-gamma*tau).  Mature cells are cleared at rate mu and drive growth
factor production through the decreasing feedback f(M); the growth factor is
cleared at rate k and upregulates cycle re-entry through beta.  Time is
measured in days, all clearance rates are per day.

d Q/dt = -delta*Q - g(Q) - beta(Q, E)*Q + 2*exp(-gamma*tau)*beta(Q_d, E_d)*Q_d
d M/dt = -mu*M + g(Q)
d E/dt = -k*E + f(M)

where (Q_d, E_d) is the state one delay in the past.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple


class InvalidStateError(ValueError):
    """A state fed to the vector field is not finite."""


class NumericalError(RuntimeError):
    """A numerical routine failed (lost bracket, internal inconsistency...)."""


class SystemState(NamedTuple):
    Q: float
    M: float
    E: float


class RateFunctions(ABC):
    """Nonlinear rates of the model and their first derivatives.

    Implementations must satisfy, on the positive axis: g(0) = 0 and
    0 <= g'(0) <= g(Q)/Q <= g'(Q); f positive and decreasing; beta
    nonnegative, increasing in E, nonincreasing in Q, with beta(Q, 0) = 0;
    and beta(Q, f(g(Q)/mu)/k) -> 0 as Q -> infinity so that large pools
    shut re-entry down.
    """

    @abstractmethod
    def beta(self, Q: float, E: float) -> float:
        """Cell-cycle re-entry rate."""

    @abstractmethod
    def beta_dQ(self, Q: float, E: float) -> float:
        """Partial derivative of beta with respect to Q."""

    @abstractmethod
    def beta_dE(self, Q: float, E: float) -> float:
        """Partial derivative of beta with respect to E."""

    @abstractmethod
    def g(self, Q: float) -> float:
        """Differentiation rate out of the quiescent pool."""

    @abstractmethod
    def g_prime(self, Q: float) -> float:
        """Derivative of g."""

    @abstractmethod
    def f(self, M: float) -> float:
        """Growth-factor production driven by the mature-cell count."""

    @abstractmethod
    def f_prime(self, M: float) -> float:
        """Derivative of f."""

    def param_violations(self) -> list[str]:
        """Human-readable constraint violations of the rate parameters."""
        return []


@dataclass(frozen=True)
class HillRates(RateFunctions):
    """Saturating re-entry, linear differentiation, Hill feedback.

    beta(Q, E) = beta0*E/(1+E)   (independent of Q)
    g(Q)       = G*Q
    f(M)       = a/(1 + K*M**r)
    """

    beta0: float
    G: float
    a: float
    K: float
    r: float

    def beta(self, Q: float, E: float) -> float:
        return self.beta0 * E / (1.0 + E)

    def beta_dQ(self, Q: float, E: float) -> float:
        return 0.0

    def beta_dE(self, Q: float, E: float) -> float:
        return self.beta0 / (1.0 + E) ** 2

    def g(self, Q: float) -> float:
        return self.G * Q

    def g_prime(self, Q: float) -> float:
        return self.G

    def f(self, M: float) -> float:
        try:
            den = 1.0 + self.K * M**self.r
        except OverflowError:
            return 0.0  # K*M**r overflowed: f has already decayed to 0
        return self.a / den

    def f_prime(self, M: float) -> float:
        if M == 0.0:
            return 0.0 if self.r > 1.0 else -self.a * self.K
        try:
            mr = M**self.r
            den = (1.0 + self.K * mr) ** 2
        except OverflowError:
            return 0.0
        return -self.a * self.K * self.r * (mr / M) / den

    def param_violations(self) -> list[str]:
        out = []
        for name in ("beta0", "G", "a", "K"):
            if not getattr(self, name) > 0.0:
                out.append(f"rate parameter {name} must be positive")
        if not self.r > 1.0:
            out.append("rate parameter r must exceed 1")
        return out


@dataclass(frozen=True)
class ModelParams:
    """Clearance rates, in-cycle apoptosis rate, delay and rate functions."""

    delta: float
    gamma: float
    tau: float
    mu: float
    k: float
    rates: RateFunctions


def validate(p: ModelParams) -> list[str]:
    """Return a list of parameter-constraint violations (empty when valid)."""
    out = []
    if not p.delta > 0.0:
        out.append("delta must be positive")
    if not p.gamma >= 0.0:
        out.append("gamma must be nonnegative")
    if not p.mu > 0.0:
        out.append("mu must be positive")
    if not p.k > 0.0:
        out.append("k must be positive")
    if not p.tau >= 0.0:
        out.append("tau must be nonnegative")
    for v in (p.delta, p.gamma, p.tau, p.mu, p.k):
        if not math.isfinite(v):
            out.append("scalar parameters must be finite")
            break
    out.extend(p.rates.param_violations())
    return out


def rhs(now, delayed, p: ModelParams) -> SystemState:
    """Vector field at state `now` with delayed state `delayed`.

    The delay enters only through the reward factor 2*exp(-gamma*p.tau) and
    the delayed re-entry flux; passing `delayed = now` recovers the
    undelayed (tau = 0) field when p.tau = 0.

    Raises InvalidStateError if any component of either state is not finite.
    """
    Qn, Mn, En = now
    Qd, Md, Ed = delayed
    if not all(map(math.isfinite, (Qn, Mn, En, Qd, Md, Ed))):
        raise InvalidStateError(f"non-finite state: now={tuple(now)} delayed={tuple(delayed)}")
    r = p.rates
    reentry = r.beta(Qn, En) * Qn
    returned = 2.0 * math.exp(-p.gamma * p.tau) * r.beta(Qd, Ed) * Qd
    dQ = -p.delta * Qn - r.g(Qn) - reentry + returned
    dM = -p.mu * Mn + r.g(Qn)
    dE = -p.k * En + r.f(Mn)
    return SystemState(dQ, dM, dE)


def default_params(tau: float = 0.0) -> ModelParams:
    """The reference parameter set used across the package and the CLI."""
    return ModelParams(
        delta=0.01,
        gamma=0.2,
        tau=tau,
        mu=0.02,
        k=2.8,
        rates=HillRates(beta0=0.5, G=0.04, a=6570.0, K=0.0382, r=7.0),
    )
