"""Method-of-steps integration of the delayed system, with post-processing.

The delay is constant, so derivative discontinuities inherited from the
initial history sit exactly at multiples of tau.  The stepper exploits
that: the mesh spacing is tau/m (m chosen so the step stays at or below
max_step, default tau/64), which pins every multiple of tau to a mesh
point and keeps the classical fourth-order Runge-Kutta scheme at full
order between them.  Delayed stage states are read from the history for
times at or below zero and from the trajectory's own cubic Hermite
segments afterwards; the derivative stored at each mesh point doubles as
the next step's first stage.

With tau = 0 the same stepper runs as a plain ODE integrator, the delayed
state being the current stage state, so the no-delay limit stays
comparable with the Routh-Hurwitz verdict.

Post-processing quantifies what the long runs show: detect_period measures
the spacing of oscillation peaks, classify_asymptotics sorts a run into
converging, sustained-oscillation or diverging relative to an equilibrium.

Trajectories are immutable once returned; distinct runs are independent.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Callable

from .equilibria import Equilibrium
from .model import InvalidStateError, ModelParams, NumericalError, SystemState, rhs, validate

_DEFAULT_SUBSTEPS = 64
_NEG_FLOOR = -1e-6
_COMPONENTS = {"Q": 0, "M": 1, "E": 2}


class DivergenceError(NumericalError):
    """The state left the finite range; last_time is the last valid mesh time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class InvariantViolationError(NumericalError):
    """A component dropped below the -1e-6 nonnegativity floor."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class History:
    """Initial data on [-tau, 0]: a constant state or an arbitrary evaluator.

    Every evaluation is checked to be finite and nonnegative.
    """

    def __init__(self, fn: Callable[[float], SystemState]):
        self._fn = fn

    @classmethod
    def constant(cls, state: SystemState) -> "History":
        return cls(lambda _t: state)

    def eval(self, t: float) -> SystemState:
        s = SystemState(*self._fn(t))
        for name, v in zip(("Q", "M", "E"), s):
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidStateError(f"history {name}({t}) = {v!r}")
        return s


def scaled_equilibrium_history(eq: Equilibrium, factor: float = 1.1) -> History:
    """Constant history at the equilibrium scaled componentwise by `factor`."""
    if not (math.isfinite(factor) and factor >= 0.0):
        raise ValueError(f"factor must be finite and nonnegative, got {factor!r}")
    return History.constant(SystemState(factor * eq.Q, factor * eq.M, factor * eq.E))


def _hermite(y0: SystemState, f0: SystemState, y1: SystemState, f1: SystemState,
             dt: float, s: float) -> SystemState:
    s2 = s * s
    h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
    h10 = s * (1.0 - s) ** 2
    h01 = s2 * (3.0 - 2.0 * s)
    h11 = s2 * (s - 1.0)
    return SystemState(
        h00 * y0[0] + dt * h10 * f0[0] + h01 * y1[0] + dt * h11 * f1[0],
        h00 * y0[1] + dt * h10 * f0[1] + h01 * y1[1] + dt * h11 * f1[1],
        h00 * y0[2] + dt * h10 * f0[2] + h01 * y1[2] + dt * h11 * f1[2],
    )


@dataclass(frozen=True)
class Trajectory:
    """Mesh states and derivatives of one integration, with dense evaluation."""

    params: ModelParams
    history: History
    dt: float
    times: tuple[float, ...]
    states: tuple[SystemState, ...]
    derivs: tuple[SystemState, ...]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def state(self, t: float) -> SystemState:
        return interpolate(self, t)


def interpolate(traj: Trajectory, t: float) -> SystemState:
    """Dense output: history for t <= 0, cubic Hermite segments after."""
    tol = 1e-9 * max(1.0, traj.t_end)
    if t < -traj.params.tau - tol or t > traj.t_end + tol:
        raise ValueError(
            f"t={t!r} outside [{-traj.params.tau!r}, {traj.t_end!r}]"
        )
    if t <= 0.0:
        return traj.history.eval(max(t, -traj.params.tau))
    i = min(int(t / traj.dt), len(traj.states) - 2)
    s = (t - traj.times[i]) / traj.dt
    return _hermite(
        traj.states[i], traj.derivs[i], traj.states[i + 1], traj.derivs[i + 1],
        traj.dt, s,
    )


def integrate(
    p: ModelParams,
    history: History,
    t_end: float,
    *,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate from the history up to (the next mesh point at or past) t_end."""
    bad = validate(p)
    if bad:
        raise ValueError("; ".join(bad))
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    if max_step is not None and not max_step > 0.0:
        raise ValueError("max_step must be positive")
    tau = p.tau
    if tau > 0.0:
        cap = max_step if max_step is not None else tau / _DEFAULT_SUBSTEPS
        m = max(1, math.ceil(tau / cap - 1e-12))
        dt = tau / m
    else:
        dt = max_step if max_step is not None else 1.0 / _DEFAULT_SUBSTEPS
    n_steps = max(1, math.ceil(t_end / dt - 1e-12))

    times = [0.0]
    states = [history.eval(0.0)]
    delayed0 = history.eval(-tau) if tau > 0.0 else states[0]
    derivs = [rhs(states[0], delayed0, p)]

    def delayed_at(tq: float) -> SystemState:
        if tq <= 0.0:
            return history.eval(max(tq, -tau))
        i = min(int(tq / dt), len(states) - 2)
        return _hermite(states[i], derivs[i], states[i + 1], derivs[i + 1],
                        dt, (tq - times[i]) / dt)

    half = 0.5 * dt
    sixth = dt / 6.0
    for j in range(n_steps):
        t = times[j]
        y = states[j]
        k1 = derivs[j]
        try:
            if tau > 0.0:
                yd_half = delayed_at(t + half - tau)
                yd_full = delayed_at(t + dt - tau)
                y2 = SystemState(y[0] + half * k1[0], y[1] + half * k1[1], y[2] + half * k1[2])
                k2 = rhs(y2, yd_half, p)
                y3 = SystemState(y[0] + half * k2[0], y[1] + half * k2[1], y[2] + half * k2[2])
                k3 = rhs(y3, yd_half, p)
                y4 = SystemState(y[0] + dt * k3[0], y[1] + dt * k3[1], y[2] + dt * k3[2])
                k4 = rhs(y4, yd_full, p)
            else:
                y2 = SystemState(y[0] + half * k1[0], y[1] + half * k1[1], y[2] + half * k1[2])
                k2 = rhs(y2, y2, p)
                y3 = SystemState(y[0] + half * k2[0], y[1] + half * k2[1], y[2] + half * k2[2])
                k3 = rhs(y3, y3, p)
                y4 = SystemState(y[0] + dt * k3[0], y[1] + dt * k3[1], y[2] + dt * k3[2])
                k4 = rhs(y4, y4, p)
            y_next = SystemState(
                y[0] + sixth * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
                y[1] + sixth * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
                y[2] + sixth * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
            )
            t_next = (j + 1) * dt
            if not all(math.isfinite(v) for v in y_next):
                raise DivergenceError(
                    f"state non-finite at t={t_next!r}; last valid t={t!r}", t
                )
            low = min(y_next)
            if low < _NEG_FLOOR:
                raise InvariantViolationError(
                    f"component reached {low!r} at t={t_next!r}", t
                )
            times.append(t_next)
            states.append(y_next)
            f_next = rhs(
                y_next,
                delayed_at(t_next - tau) if tau > 0.0 else y_next,
                p,
            )
        except InvalidStateError as exc:
            raise DivergenceError(
                f"stage state non-finite after t={t!r}: {exc}", t
            ) from exc
        derivs.append(f_next)

    return Trajectory(p, history, dt, tuple(times), tuple(states), tuple(derivs))


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    std: float
    n_peaks: int
    amplitude_ratio: float  # last peak height over first, relative to the mean level
    peak_times: tuple[float, ...]
    peak_values: tuple[float, ...]
    mean_level: float


def _component_index(component: int | str) -> int:
    if isinstance(component, str):
        try:
            return _COMPONENTS[component]
        except KeyError:
            raise ValueError(f"unknown component {component!r}") from None
    if component not in (0, 1, 2):
        raise ValueError(f"component index {component!r} out of range")
    return component


def detect_period(
    traj: Trajectory, component: int | str, t_transient: float
) -> PeriodEstimate | None:
    """Mean spacing of oscillation peaks after the transient, or None.

    Peaks are strict local maxima of the chosen component on the mesh,
    refined by the vertex of the parabola through the three surrounding
    samples.  Returns None when fewer than three peaks remain or when the
    oscillation has decayed (last peak under 20% of the first, relative to
    the mean level).
    """
    ci = _component_index(component)
    j0 = next((j for j, t in enumerate(traj.times) if t >= t_transient), None)
    if j0 is None or traj.times[j0] >= traj.t_end:
        raise ValueError("transient leaves no samples to analyze")
    ts = traj.times[j0:]
    vs = [s[ci] for s in traj.states[j0:]]

    peak_times: list[float] = []
    peak_values: list[float] = []
    for i in range(1, len(vs) - 1):
        if vs[i - 1] < vs[i] > vs[i + 1]:
            denom = vs[i - 1] - 2.0 * vs[i] + vs[i + 1]
            if denom < 0.0:
                shift = 0.5 * traj.dt * (vs[i - 1] - vs[i + 1]) / denom
                peak_times.append(ts[i] + shift)
                peak_values.append(
                    vs[i] - (vs[i - 1] - vs[i + 1]) ** 2 / (8.0 * denom)
                )
            else:
                peak_times.append(ts[i])
                peak_values.append(vs[i])
    if len(peak_times) < 3:
        return None
    mean_level = statistics.fmean(vs)
    first = peak_values[0] - mean_level
    last = peak_values[-1] - mean_level
    if first <= 0.0:
        return None
    ratio = last / first
    if ratio < 0.2:
        return None
    gaps = [b - a for a, b in zip(peak_times, peak_times[1:])]
    return PeriodEstimate(
        period=statistics.fmean(gaps),
        std=statistics.pstdev(gaps),
        n_peaks=len(peak_times),
        amplitude_ratio=ratio,
        peak_times=tuple(peak_times),
        peak_values=tuple(peak_values),
        mean_level=mean_level,
    )


def _deviation(state: SystemState, eq: Equilibrium) -> float:
    return max(
        abs(state[0] - eq.Q) / (1.0 + abs(eq.Q)),
        abs(state[1] - eq.M) / (1.0 + abs(eq.M)),
        abs(state[2] - eq.E) / (1.0 + abs(eq.E)),
    )


def classify_asymptotics(
    traj: Trajectory, eq: Equilibrium, t_transient: float
) -> str:
    """Sort a run into converging, sustained-oscillation, diverging.

    Converging: the largest relative deviation from `eq` over the last 10%
    of the run is below 5% of the one over the first 10% after the
    transient.  Sustained: detect_period (on Q) finds peaks whose amplitude
    ratio stays in [0.8, 1.25].  Diverging: deviation maxima over eight
    equal segments grow monotonically to more than 10 times the first.
    Anything else is unclassified.
    """
    T = traj.t_end
    span = T - t_transient
    if span <= 0.0:
        raise ValueError("transient must end before the run does")
    post = [
        (t, _deviation(s, eq))
        for t, s in zip(traj.times, traj.states)
        if t >= t_transient
    ]
    d_first = max(d for t, d in post if t <= t_transient + 0.1 * span)
    d_last = max(d for t, d in post if t >= T - 0.1 * span)
    if d_last < 0.05 * d_first:
        return "converging"
    est = detect_period(traj, 0, t_transient)
    if est is not None and 0.8 <= est.amplitude_ratio <= 1.25:
        return "sustained-oscillation"
    seg_max = []
    for seg in range(8):
        lo = t_transient + span * seg / 8.0
        hi = t_transient + span * (seg + 1) / 8.0
        seg_max.append(max(d for t, d in post if lo <= t <= hi))
    growing = all(a < b for a, b in zip(seg_max, seg_max[1:]))
    if growing and seg_max[0] > 0.0 and seg_max[-1] > 10.0 * seg_max[0]:
        return "diverging"
    return "unclassified"
