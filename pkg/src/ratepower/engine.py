"""Single-cell game solvers.

Holds the trivial unpriced equilibrium, the closed-form priced best response,
the two boundary policies ("clamp" projects the unconstrained response onto
the strategy box, "kkt" re-optimizes the free coordinate from the boundary
stationarity quadratics), and the fixed-point iteration loop with synchronous
or sequential scheduling.

Within one iteration the per-user updates are pure; the loop itself is
sequential. A trace belongs to one run; independent runs can execute in
parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChannelModel, Strategy, UserParams, utility_priced
from .rates import RateSet

__all__ = [
    "CLAMP",
    "KKT",
    "POLICIES",
    "SYNCHRONOUS",
    "SEQUENTIAL",
    "SCHEDULES",
    "METRIC_RELATIVE",
    "METRIC_ABSOLUTE",
    "ConvergenceConfig",
    "IterationRecord",
    "IterationTrace",
    "njrpcg_equilibrium",
    "unconstrained_best_response",
    "power_update_rate_bounded",
    "rate_update_power_bounded",
    "bounded_step",
    "iterate_to_convergence",
    "symmetric_fixed_point",
    "convergence_metric",
    "power_update_map",
]

CLAMP = "clamp"
KKT = "kkt"
POLICIES = (CLAMP, KKT)

SYNCHRONOUS = "synchronous"
SEQUENTIAL = "sequential"
SCHEDULES = (SYNCHRONOUS, SEQUENTIAL)

METRIC_RELATIVE = "relative"
METRIC_ABSOLUTE = "absolute"
METRICS = (METRIC_RELATIVE, METRIC_ABSOLUTE)

_EPS = 1e-30


@dataclass
class ConvergenceConfig:
    """Stopping rule for the iteration loop.

    The "relative" metric normalizes each coordinate by its current magnitude
    so watts and bps weigh equally; "absolute" is the literal |dp| + |dr| sum
    and needs a delta chosen for the scenario's scales.
    """

    delta: float = 1e-9
    max_iterations: int = 500
    metric: str = METRIC_RELATIVE

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


@dataclass
class IterationRecord:
    """Snapshot of the network at the end of one iteration."""

    iteration: int
    step: int
    user_ids: np.ndarray
    assignment: np.ndarray
    powers: np.ndarray
    rates: np.ndarray
    sinrs: np.ndarray
    utilities: np.ndarray
    metric: float


@dataclass
class IterationTrace:
    """Full history of a run plus its terminal convergence flag."""

    records: list[IterationRecord]
    converged: bool
    iterations_used: int

    @property
    def final(self) -> IterationRecord:
        if not self.records:
            raise ValueError("trace is empty")
        return self.records[-1]

    @property
    def final_powers(self) -> np.ndarray:
        return self.final.powers

    @property
    def final_rates(self) -> np.ndarray:
        return self.final.rates

    @property
    def final_sinrs(self) -> np.ndarray:
        return self.final.sinrs

    @property
    def final_assignment(self) -> np.ndarray:
        return self.final.assignment

    @property
    def final_user_ids(self) -> np.ndarray:
        return self.final.user_ids


def njrpcg_equilibrium(users: list[UserParams]) -> list[Strategy]:
    """Equilibrium of the unpriced game: every user at (p_max, r_max).

    The unpriced utility increases in both coordinates, so the top corner of
    each box is reached no matter the gains or the pricing of anyone else.
    """
    return [Strategy(u.p_max, u.r_max) for u in users]


def unconstrained_best_response(
    r_eff: float, alpha1: float, alpha2: float, lam: float
) -> Strategy:
    """Interior maximizer of the priced utility at effective interference r_eff.

    p = sqrt(0.5 * (a2/a1) * R / lam),  r = sqrt(0.5 * (a1/a2) / (lam * R)).
    The pair always satisfies p / (r * R) = a2 / a1.
    """
    if r_eff <= 0:
        raise ValueError(f"effective interference must be positive, got {r_eff}")
    if alpha1 <= 0 or alpha2 <= 0 or lam <= 0:
        raise ValueError("alpha1, alpha2 and lam must be positive")
    p = math.sqrt(0.5 * (alpha2 / alpha1) * r_eff / lam)
    r = math.sqrt(0.5 * (alpha1 / alpha2) / (lam * r_eff))
    return Strategy(p, r)


def power_update_rate_bounded(
    r_eff: float, r_bound: float, alpha1: float, alpha2: float, lam: float
) -> float:
    """Stationary power when the rate sits at a box bound.

    Positive root of a1*lam*p**2 + a2*lam*R*r_bound*p - a2*R = 0; the
    discriminant is always positive so the root exists for any r_bound >= 0.
    """
    if r_eff <= 0 or alpha1 <= 0 or alpha2 <= 0 or lam <= 0:
        raise ValueError("r_eff, alpha1, alpha2 and lam must be positive")
    if r_bound < 0:
        raise ValueError("r_bound must be non-negative")
    b = alpha2 * lam * r_eff * r_bound
    return (-b + math.sqrt(b * b + 4.0 * alpha1 * alpha2 * lam * r_eff)) / (2.0 * alpha1 * lam)


def rate_update_power_bounded(
    r_eff: float, p_bound: float, alpha1: float, alpha2: float, lam: float
) -> float:
    """Stationary rate when the power sits at a box bound.

    Positive root of a2*lam*R*r**2 + a1*lam*p_bound*r - a1 = 0.
    """
    if r_eff <= 0 or alpha1 <= 0 or alpha2 <= 0 or lam <= 0:
        raise ValueError("r_eff, alpha1, alpha2 and lam must be positive")
    if p_bound < 0:
        raise ValueError("p_bound must be non-negative")
    b = alpha1 * lam * p_bound
    return (-b + math.sqrt(b * b + 4.0 * alpha1 * alpha2 * lam * r_eff)) / (
        2.0 * alpha2 * lam * r_eff
    )


def bounded_step(user: UserParams, r_eff: float, policy: str = CLAMP) -> Strategy:
    """One user's constrained update against effective interference r_eff.

    The unconstrained best response is computed first. Under "clamp" both
    coordinates are projected onto the strategy box independently. Under
    "kkt" a single violated coordinate is pinned to its bound and the other
    coordinate is re-optimized from the matching stationarity quadratic (then
    projected too, in case the re-optimized value leaves the box); when both
    coordinates violate, both are projected. The result always lies in the
    box.
    """
    _check_policy(policy)
    cand = unconstrained_best_response(r_eff, user.alpha1, user.alpha2, user.lam)
    if policy == CLAMP:
        return Strategy(
            min(max(cand.power, user.p_min), user.p_max),
            min(max(cand.rate, user.r_min), user.r_max),
        )
    p_ok = user.p_min <= cand.power <= user.p_max
    r_ok = user.r_min <= cand.rate <= user.r_max
    if p_ok and r_ok:
        return cand
    if p_ok and not r_ok:
        r = user.r_min if cand.rate < user.r_min else user.r_max
        p = power_update_rate_bounded(r_eff, r, user.alpha1, user.alpha2, user.lam)
        return Strategy(min(max(p, user.p_min), user.p_max), r)
    if r_ok and not p_ok:
        p = user.p_min if cand.power < user.p_min else user.p_max
        r = rate_update_power_bounded(r_eff, p, user.alpha1, user.alpha2, user.lam)
        return Strategy(p, min(max(r, user.r_min), user.r_max))
    return Strategy(
        min(max(cand.power, user.p_min), user.p_max),
        min(max(cand.rate, user.r_min), user.r_max),
    )


def convergence_metric(
    prev_powers, prev_rates, powers, rates, kind: str = METRIC_RELATIVE
) -> float:
    """Largest per-user step between consecutive iterates."""
    if kind not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {kind!r}")
    dp = np.abs(np.asarray(powers) - np.asarray(prev_powers))
    dr = np.abs(np.asarray(rates) - np.asarray(prev_rates))
    if kind == METRIC_ABSOLUTE:
        return float(np.max(dp + dr))
    rel = dp / np.maximum(np.abs(powers), _EPS) + dr / np.maximum(np.abs(rates), _EPS)
    return float(np.max(rel))


def iterate_to_convergence(
    channel: ChannelModel,
    users: list[UserParams],
    policy: str = CLAMP,
    config: ConvergenceConfig | None = None,
    schedule: str = SYNCHRONOUS,
    rate_set: RateSet | None = None,
    quantize_at_convergence: bool = False,
    initial_powers=None,
    initial_rates=None,
) -> IterationTrace:
    """Run the single-cell update loop until the step metric drops below delta.

    The synchronous schedule evaluates every user's effective interference
    from the previous iterate; the sequential schedule applies updates in
    user order against the freshest powers. When ``rate_set`` is given, each
    user's updated rate is snapped down to the ladder after its step (or only
    once at convergence with ``quantize_at_convergence=True``; the converged
    powers are identical either way because rates never enter the power
    update). Non-convergence within max_iterations is reported on the trace,
    not raised.
    """
    if channel.n_stations != 1:
        raise ValueError("single-cell solver needs exactly one station; see the multicell module")
    if len(users) != channel.n_users:
        raise ValueError(f"{len(users)} users but channel has {channel.n_users} rows")
    if not users:
        raise ValueError("need at least one user")
    _check_policy(policy)
    _check_schedule(schedule)
    config = config if config is not None else ConvergenceConfig()

    powers = _initial_vector(users, initial_powers, "power")
    rates = _initial_vector(users, initial_rates, "rate")
    user_ids = np.arange(len(users))
    assignment = np.zeros(len(users), dtype=int)
    step_set = None if quantize_at_convergence else rate_set

    records: list[IterationRecord] = []
    converged = False
    iterations = 0
    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        if schedule == SYNCHRONOUS:
            new_p, new_r = _synchronous_step(channel, users, powers, rates, policy, step_set)
        else:
            new_p, new_r = _sequential_step(channel, users, powers, rates, policy, step_set)
        metric = convergence_metric(powers, rates, new_p, new_r, config.metric)
        powers, rates = new_p, new_r
        records.append(
            make_record(channel, users, iteration, 1, user_ids, assignment, powers, rates, metric)
        )
        if metric <= config.delta:
            converged = True
            break

    trace = IterationTrace(records, converged, iterations)
    if converged and quantize_at_convergence and rate_set is not None:
        _quantize_final_record(trace, channel, users, rate_set)
    return trace


def symmetric_fixed_point(
    n_users: int, target_ratio: float, lam: float, noise_w: float, gain: float
) -> Strategy:
    """Closed-form converged strategy when all users share one gain and target.

    Solves p = sqrt((rho / (2 lam)) * ((M - 1) p + N0 / g)) directly, then
    reads the rate off the interior stationarity pair at that interference.
    Serves as an analytic oracle for the iteration on symmetric scenarios.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    if target_ratio <= 0 or lam <= 0 or gain <= 0:
        raise ValueError("target_ratio, lam and gain must be positive")
    if noise_w < 0:
        raise ValueError("noise must be non-negative")
    if n_users == 1 and noise_w == 0:
        raise ValueError("a lone user with zero noise has no positive fixed point")
    b = target_ratio * (n_users - 1) / (2.0 * lam)
    c = target_ratio * noise_w / (2.0 * lam * gain)
    p = 0.5 * (b + math.sqrt(b * b + 4.0 * c))
    r_eff = (n_users - 1) * p + noise_w / gain
    r = math.sqrt(0.5 / (target_ratio * lam * r_eff))
    return Strategy(p, r)


def power_update_map(channel: ChannelModel, users: list[UserParams], clamped: bool = False):
    """Vector power-update map as a callable p -> I(p), for property checks.

    With ``clamped=True`` the output is projected onto each user's power box.
    """
    if channel.n_stations != 1:
        raise ValueError("single-cell map; see multicell.min_power_update_map")
    gains = channel.gains[:, 0]
    noise = channel.noise_w
    half_ratio = np.array([0.5 * u.alpha2 / (u.alpha1 * u.lam) for u in users])
    lo = np.array([u.p_min for u in users])
    hi = np.array([u.p_max for u in users])

    def apply(powers) -> np.ndarray:
        reffs = _all_reffs(gains, np.asarray(powers, dtype=float), noise)
        out = np.sqrt(half_ratio * reffs)
        if clamped:
            out = np.clip(out, lo, hi)
        return out

    return apply


# Shared internals, also used by the multicell and scenario runners.


def _check_policy(policy: str) -> None:
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")


def _check_schedule(schedule: str) -> None:
    if schedule not in SCHEDULES:
        raise ValueError(f"schedule must be one of {SCHEDULES}, got {schedule!r}")


def _initial_vector(users: list[UserParams], override, which: str) -> np.ndarray:
    if override is None:
        if which == "power":
            return np.array([u.initial_power for u in users], dtype=float)
        return np.array([u.initial_rate for u in users], dtype=float)
    v = np.asarray(override, dtype=float).copy()
    if v.shape != (len(users),):
        raise ValueError(f"initial {which}s must have one entry per user")
    for u, x in zip(users, v):
        lo, hi = (u.p_min, u.p_max) if which == "power" else (u.r_min, u.r_max)
        if not lo <= x <= hi:
            raise ValueError(f"initial {which} {x} outside [{lo}, {hi}]")
    return v


def _all_reffs(gains: np.ndarray, powers: np.ndarray, noise_w: float) -> np.ndarray:
    cross = gains * powers
    total = float(cross.sum())
    other = np.maximum(total - cross, 0.0)
    return (other + noise_w) / gains


def _synchronous_step(channel, users, powers, rates, policy, rate_set):
    gains = channel.gains[:, 0]
    reffs = _all_reffs(gains, powers, channel.noise_w)
    new_p = np.empty_like(powers)
    new_r = np.empty_like(rates)
    for i, user in enumerate(users):
        s = bounded_step(user, float(reffs[i]), policy)
        new_p[i] = s.power
        new_r[i] = s.rate if rate_set is None else rate_set.floor(s.rate)
    return new_p, new_r


def _sequential_step(channel, users, powers, rates, policy, rate_set):
    gains = channel.gains[:, 0]
    new_p = powers.copy()
    new_r = rates.copy()
    for i, user in enumerate(users):
        cross = gains * new_p
        r_eff = (float(cross.sum() - cross[i]) + channel.noise_w) / float(gains[i])
        s = bounded_step(user, r_eff, policy)
        new_p[i] = s.power
        new_r[i] = s.rate if rate_set is None else rate_set.floor(s.rate)
    return new_p, new_r


def make_record(
    channel: ChannelModel,
    users: list[UserParams],
    iteration: int,
    step: int,
    user_ids: np.ndarray,
    assignment: np.ndarray,
    powers: np.ndarray,
    rates: np.ndarray,
    metric: float,
) -> IterationRecord:
    """Build a trace record; SINR and utility are evaluated at the given state."""
    g = channel.gains
    totals = powers @ g
    reffs = np.empty(len(users))
    for i, a in enumerate(assignment):
        own = g[i, a] * powers[i]
        reffs[i] = (max(totals[a] - own, 0.0) + channel.noise_w) / g[i, a]
    sinrs = (channel.bandwidth_hz / rates) * (powers / reffs)
    utilities = np.array(
        [
            utility_priced(Strategy(powers[i], rates[i]), reffs[i], u.alpha1, u.alpha2, u.lam)
            for i, u in enumerate(users)
        ]
    )
    return IterationRecord(
        iteration,
        step,
        np.asarray(user_ids, dtype=int).copy(),
        np.asarray(assignment, dtype=int).copy(),
        powers.copy(),
        rates.copy(),
        sinrs,
        utilities,
        metric,
    )


def _quantize_final_record(trace, channel, users, rate_set) -> None:
    last = trace.records[-1]
    rates = np.array([rate_set.floor(r) for r in last.rates])
    trace.records[-1] = make_record(
        channel,
        users,
        last.iteration,
        last.step,
        last.user_ids,
        last.assignment,
        last.powers,
        rates,
        last.metric,
    )
