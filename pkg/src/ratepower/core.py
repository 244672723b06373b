"""Core uplink model: channel gains, effective interference, SINR, utilities.

Everything here is a pure function of its arguments and works in SI units
throughout (watts, bps, hertz); channel gains are dimensionless. No shared
mutable state, so every operation is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelModel",
    "UserParams",
    "Strategy",
    "UtilityParamsBase",
    "path_gain",
    "effective_interference",
    "sinr",
    "utility_base",
    "utility_priced",
    "utility_priced_gradient",
    "utility_priced_hessian",
    "target_sinr",
    "alpha_ratio_for_target",
]


def path_gain(distance_m: float, pathloss_exponent: float, shadowing: float) -> float:
    """Channel gain xi / d**eta for a transmitter at distance d."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return shadowing / distance_m ** pathloss_exponent


@dataclass
class ChannelModel:
    """Static uplink geometry and radio constants.

    ``distances_m`` is a (n_users x n_stations) matrix; a 1-D sequence is
    read as a single-station column. Gains follow the power-law model
    ``g[i, a] = shadowing / d[i, a] ** pathloss_exponent``.
    """

    distances_m: np.ndarray
    pathloss_exponent: float = 4.0
    shadowing: float = 0.097
    noise_w: float = 5e-15
    bandwidth_hz: float = 1e6

    def __post_init__(self) -> None:
        d = np.array(self.distances_m, dtype=float)
        if d.ndim == 1:
            d = d.reshape(-1, 1)
        if d.ndim != 2 or d.size == 0:
            raise ValueError("distances_m must be a non-empty users x stations matrix")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("all distances must be positive and finite")
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss_exponent must be positive")
        if self.shadowing <= 0:
            raise ValueError("shadowing must be positive")
        if self.noise_w < 0:
            raise ValueError("noise_w must be non-negative")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        self.distances_m = d
        g = self.gains
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValueError("derived gains must be finite and positive")

    @property
    def n_users(self) -> int:
        return self.distances_m.shape[0]

    @property
    def n_stations(self) -> int:
        return self.distances_m.shape[1]

    @property
    def gains(self) -> np.ndarray:
        """Per-user, per-station gain matrix (n_users x n_stations)."""
        return self.shadowing / self.distances_m ** self.pathloss_exponent

    def subset(self, user_indices) -> "ChannelModel":
        """Channel restricted to the given users, e.g. after removals."""
        idx = np.asarray(user_indices, dtype=int)
        return ChannelModel(
            self.distances_m[idx],
            self.pathloss_exponent,
            self.shadowing,
            self.noise_w,
            self.bandwidth_hz,
        )

    def with_user(self, distances_row) -> "ChannelModel":
        """Channel extended by one arriving user."""
        row = np.asarray(distances_row, dtype=float).reshape(1, -1)
        if row.shape[1] != self.n_stations:
            raise ValueError(
                f"arriving user has {row.shape[1]} distances, network has "
                f"{self.n_stations} stations"
            )
        return ChannelModel(
            np.vstack([self.distances_m, row]),
            self.pathloss_exponent,
            self.shadowing,
            self.noise_w,
            self.bandwidth_hz,
        )

    def moved(self, user_index: int, distances_row) -> "ChannelModel":
        """Channel with one user's distances replaced (a movement step)."""
        row = np.asarray(distances_row, dtype=float).reshape(-1)
        if row.shape[0] != self.n_stations:
            raise ValueError(
                f"move has {row.shape[0]} distances, network has "
                f"{self.n_stations} stations"
            )
        d = self.distances_m.copy()
        d[user_index] = row
        return ChannelModel(
            d, self.pathloss_exponent, self.shadowing, self.noise_w, self.bandwidth_hz
        )


@dataclass(frozen=True)
class UserParams:
    """One user's game constants.

    The ratio alpha2/alpha1 times the bandwidth fixes the SINR the user
    settles at when its strategy stays interior; ``lam`` scales the quadratic
    price on rate and power. The strategy box bounds both coordinates and the
    initial strategy defaults to the box's lower corner.
    """

    alpha1: float = 1e6
    alpha2: float = 20.0
    lam: float = 1e-4
    p_min: float = 1e-6
    p_max: float = 3.0
    r_min: float = 0.1
    r_max: float = 96000.0
    p_init: float | None = None
    r_init: float | None = None

    def __post_init__(self) -> None:
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("alpha1 and alpha2 must be positive")
        if self.lam <= 0:
            raise ValueError("pricing factor must be positive")
        if not 0 < self.p_min <= self.p_max:
            raise ValueError(f"need 0 < p_min <= p_max, got [{self.p_min}, {self.p_max}]")
        if not 0 < self.r_min <= self.r_max:
            raise ValueError(f"need 0 < r_min <= r_max, got [{self.r_min}, {self.r_max}]")
        if self.p_init is not None and not self.p_min <= self.p_init <= self.p_max:
            raise ValueError(f"p_init {self.p_init} outside [{self.p_min}, {self.p_max}]")
        if self.r_init is not None and not self.r_min <= self.r_init <= self.r_max:
            raise ValueError(f"r_init {self.r_init} outside [{self.r_min}, {self.r_max}]")

    @property
    def initial_power(self) -> float:
        return self.p_min if self.p_init is None else self.p_init

    @property
    def initial_rate(self) -> float:
        return self.r_min if self.r_init is None else self.r_init


@dataclass(frozen=True)
class Strategy:
    """One user's play: transmit power in watts and data rate in bps."""

    power: float
    rate: float

    def __post_init__(self) -> None:
        if self.power <= 0:
            raise ValueError(f"power must be positive, got {self.power}")
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class UtilityParamsBase:
    """Weights of the unpriced log utility; k2 conventionally carries the bandwidth."""

    k1: float = 1.0
    k2: float = 1e6

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")

    @classmethod
    def for_bandwidth(cls, bandwidth_hz: float) -> "UtilityParamsBase":
        return cls(1.0, float(bandwidth_hz))


def effective_interference(gains_to_bs, powers, i: int, noise_w: float = 0.0) -> float:
    """Interference plus noise at the receiver, normalized by user i's own gain.

    Returns ``(sum_{j != i} g_j p_j + noise_w) / g_i``. The sum deliberately
    skips user i's own term instead of subtracting it, so no cancellation
    error creeps in when one power dominates.
    """
    g = np.asarray(gains_to_bs, dtype=float)
    p = np.asarray(powers, dtype=float)
    if g.shape != p.shape or g.ndim != 1:
        raise ValueError("gains and powers must be 1-D and of equal length")
    if not 0 <= i < g.size:
        raise IndexError(f"user index {i} out of range for {g.size} users")
    if g[i] <= 0:
        raise ValueError("own channel gain must be positive")
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    if noise_w < 0:
        raise ValueError("noise must be non-negative")
    cross = g * p
    total = float(cross.sum() - cross[i])
    return (total + noise_w) / float(g[i])


def sinr(bandwidth_hz: float, strategy: Strategy, r_eff: float) -> float:
    """SINR with CDMA processing gain: (W / r) * (p / R_eff)."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if r_eff <= 0:
        raise ValueError(f"effective interference must be positive, got {r_eff}")
    return (bandwidth_hz / strategy.rate) * (strategy.power / r_eff)


def utility_base(strategy: Strategy, r_eff: float, k1: float = 1.0, k2: float = 1e6) -> float:
    """Unpriced log utility log(k1 * r + k2 * p / R_eff), in nats.

    Increasing in both coordinates, which is why the unpriced game ends at
    every user's top corner.
    """
    if r_eff <= 0:
        raise ValueError(f"effective interference must be positive, got {r_eff}")
    arg = k1 * strategy.rate + k2 * strategy.power / r_eff
    if arg <= 0:
        raise ValueError(f"log argument must be positive, got {arg}")
    return math.log(arg)


def utility_priced(
    strategy: Strategy, r_eff: float, alpha1: float, alpha2: float, lam: float
) -> float:
    """Priced utility, in nats.

    u = log(a2 * R * r + a1 * p)
        - (lam / 2) * ((a2 / a1) * R * r**2 + (a1 / a2) * p**2 / R)

    with R the effective interference. The interference weighting pushes a
    user toward less rate and more power as R grows.
    """
    if r_eff <= 0:
        raise ValueError(f"effective interference must be positive, got {r_eff}")
    p, r = strategy.power, strategy.rate
    s = alpha2 * r_eff * r + alpha1 * p
    if s <= 0:
        raise ValueError(f"log argument must be positive, got {s}")
    price = 0.5 * lam * ((alpha2 / alpha1) * r_eff * r**2 + (alpha1 / alpha2) * p**2 / r_eff)
    return math.log(s) - price


def utility_priced_gradient(
    power: float, rate: float, r_eff: float, alpha1: float, alpha2: float, lam: float
) -> tuple[float, float]:
    """Analytic (du/dp, du/dr) of the priced utility."""
    if r_eff <= 0:
        raise ValueError("effective interference must be positive")
    s = alpha1 * power + alpha2 * r_eff * rate
    du_dp = alpha1 / s - lam * (alpha1 / alpha2) * power / r_eff
    du_dr = alpha2 * r_eff / s - lam * (alpha2 / alpha1) * r_eff * rate
    return du_dp, du_dr


def utility_priced_hessian(
    power: float, rate: float, r_eff: float, alpha1: float, alpha2: float, lam: float
) -> np.ndarray:
    """Analytic 2x2 Hessian of the priced utility in (p, r) order.

    Both diagonal entries are negative and the determinant is positive for
    any admissible arguments, so the utility is strictly concave.
    """
    if r_eff <= 0:
        raise ValueError("effective interference must be positive")
    s = alpha1 * power + alpha2 * r_eff * rate
    d2p = -((alpha1 / s) ** 2) - lam * (alpha1 / alpha2) / r_eff
    d2r = -((alpha2 * r_eff / s) ** 2) - lam * (alpha2 / alpha1) * r_eff
    dpr = -(alpha1 * alpha2 * r_eff) / s**2
    return np.array([[d2p, dpr], [dpr, d2r]])


def target_sinr(alpha1: float, alpha2: float, bandwidth_hz: float) -> float:
    """SINR a user attains at an interior equilibrium: (alpha2 / alpha1) * W."""
    if alpha1 <= 0 or alpha2 <= 0 or bandwidth_hz <= 0:
        raise ValueError("all arguments must be positive")
    return (alpha2 / alpha1) * bandwidth_hz


def alpha_ratio_for_target(target: float, bandwidth_hz: float) -> float:
    """Weight ratio alpha2/alpha1 that makes ``target`` the attained SINR."""
    if target <= 0 or bandwidth_hz <= 0:
        raise ValueError("all arguments must be positive")
    return target / bandwidth_hz
