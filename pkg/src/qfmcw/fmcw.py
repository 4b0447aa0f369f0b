"""Triangular FMCW modulation: chirp, beat tones and range/Doppler inversion.

Segment ``l = 1`` is the rising (first) half of the period and ``l = 0`` the
falling (second) half. Beat tones are kept signed as produced by

    omega_l = -(2 dw / T_m) tau + (-1)^l omega_d

and converted to magnitudes only when inverting to ``(tau, omega_d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

RISING, FALLING = 1, 0


@dataclass(frozen=True)
class ModulationProfile:
    """Triangle chirp from ``omega0`` up to ``omega0 + delta_omega`` and back.

    ``t_center`` is the apex time; one period spans
    ``[t_center - T_m/2, t_center + T_m/2]``.
    """

    omega0: float
    delta_omega: float
    T_m: float
    t_center: float = 0.0

    def __post_init__(self):
        if not self.delta_omega > 0:
            raise ValueError("delta_omega must be positive")
        if not self.T_m > 0:
            raise ValueError("T_m must be positive")
        if self.delta_omega * self.T_m < 10:
            warnings.warn(
                f"time-bandwidth product {self.delta_omega * self.T_m:.3g} is small; "
                "the FMCW picture assumes delta_omega * T_m >> 1",
                stacklevel=3,
            )

    @property
    def t_start(self) -> float:
        return self.t_center - self.T_m / 2

    @property
    def t_end(self) -> float:
        return self.t_center + self.T_m / 2

    @property
    def chirp_rate(self) -> float:
        """Slope of either edge, ``2 delta_omega / T_m`` (rad/s^2)."""
        return 2 * self.delta_omega / self.T_m


@dataclass(frozen=True)
class DiscreteGrid:
    """``j_B + 1`` sample times ``t_p = p T_m / j_B`` for ``p = p0 .. p0 + j_B``."""

    j_B: int
    T_m: float
    p0: int = 0

    def __post_init__(self):
        if self.j_B < 2 or self.j_B % 2:
            raise ValueError(f"j_B must be a positive even integer, got {self.j_B}")
        if not self.T_m > 0:
            raise ValueError("T_m must be positive")

    @property
    def spacing(self) -> float:
        return self.T_m / self.j_B

    @property
    def n_samples(self) -> int:
        return self.j_B + 1

    @property
    def times(self) -> np.ndarray:
        return (self.p0 + np.arange(self.j_B + 1)) * self.spacing

    @property
    def bandwidth(self) -> float:
        """Field bandwidth ``2 pi j_B / T_m`` represented by the grid."""
        return 2 * np.pi * self.j_B / self.T_m

    @property
    def nyquist(self) -> float:
        return np.pi / self.spacing

    def covers(self, profile: ModulationProfile) -> bool:
        return self.bandwidth >= profile.delta_omega

    def half(self) -> "DiscreteGrid":
        """Grid for one modulation segment: half the period, ``j_B/2`` intervals.

        Times restart at zero, i.e. they are measured from the detection start.
        """
        if self.j_B % 4:
            raise ValueError("j_B must be divisible by 4 to split into two even segments")
        return DiscreteGrid(self.j_B // 2, self.T_m / 2, 0)


@dataclass(frozen=True)
class TargetTruth:
    """Point target at range ``d`` (m) moving at radial velocity ``v`` (m/s)."""

    d: float
    v: float

    @property
    def tau(self) -> float:
        return 2 * self.d / SPEED_OF_LIGHT

    def omega_d(self, omega_carrier: float) -> float:
        return 2 * omega_carrier * self.v / SPEED_OF_LIGHT

    def check(self, profile: ModulationProfile) -> None:
        if self.d < 0:
            raise ValueError("range must be non-negative")
        if self.tau >= profile.T_m / 100:
            raise ValueError(f"round-trip delay {self.tau:.3g} s is not << T_m = {profile.T_m:.3g} s")


@dataclass(frozen=True)
class BeatParams:
    omega_l: float
    phi_l: float
    segment: int
    t_detect_start: float


class BeatInversion(NamedTuple):
    tau: float
    omega_d: float
    ambiguous: bool


def _check_in_period(t, profile: ModulationProfile, slack: float = 1e-12):
    t = np.asarray(t, dtype=float)
    tol = slack * max(profile.T_m, abs(profile.t_center))
    if np.any(t < profile.t_start - tol) or np.any(t > profile.t_end + tol):
        raise ValueError("t lies outside the modulation period")
    return t


def instantaneous_frequency(t, profile: ModulationProfile):
    """Triangle chirp: ``omega0`` at the period start, ``omega0 + dw`` at the apex."""
    t = _check_in_period(t, profile)
    apex = profile.omega0 + profile.delta_omega
    out = apex - profile.chirp_rate * np.abs(t - profile.t_center)
    return out if out.ndim else float(out)


def fmcw_phase(t, profile: ModulationProfile):
    """Phase accumulated since the period start, the integral of the chirp."""
    t = _check_in_period(t, profile)
    k = profile.chirp_rate
    w0 = profile.omega0
    half = profile.T_m / 2
    s = t - profile.t_start
    rising = w0 * s + 0.5 * k * s**2
    u = t - profile.t_center
    at_apex = w0 * half + 0.5 * k * half**2
    falling = at_apex + (w0 + profile.delta_omega) * u - 0.5 * k * u**2
    out = np.where(t <= profile.t_center, rising, falling)
    return out if out.ndim else float(out)


def detection_start(profile: ModulationProfile, segment: int) -> float:
    if segment == RISING:
        return profile.t_start
    if segment == FALLING:
        return profile.t_center
    raise ValueError(f"segment must be 0 or 1, got {segment}")


def beat_params(tau: float, omega_d: float, profile: ModulationProfile, segment: int) -> BeatParams:
    """Beat tone of one segment for a target with delay ``tau`` and Doppler ``omega_d``.

    The phase is ``(-1)^l [(omega0 - omega_d + dw) tau - omega_l t_d]`` with
    ``t_d`` the detection start of the segment.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau >= profile.T_m / 100:
        raise ValueError(f"tau = {tau:.3g} s is not << T_m = {profile.T_m:.3g} s")
    sign = (-1) ** segment
    omega_l = -profile.chirp_rate * tau + sign * omega_d
    t_d = detection_start(profile, segment)
    phi_l = sign * ((profile.omega0 - omega_d + profile.delta_omega) * tau - omega_l * t_d)
    return BeatParams(omega_l, phi_l, segment, t_d)


def invert_beats(
    omega_b1: float, omega_b2: float, profile: ModulationProfile, signed: bool = False
) -> BeatInversion:
    """Recover ``(tau, omega_d)`` from rising/falling beat tones.

    ``omega_b1`` is the rising-edge beat counted positive (``-omega_{l=1}``);
    only ``|omega_b2|`` enters. With ``signed=True`` the caller passes the
    signed falling-edge tone ``omega_{l=0}``: a positive value there (or a
    negative ``omega_b1``) means the Doppler term exceeds the range term, the
    magnitudes cannot be assigned, and the result is flagged ``ambiguous``
    rather than corrected.
    """
    b2 = abs(omega_b2)
    tau = profile.T_m / (2 * profile.delta_omega) * (omega_b1 + b2) / 2
    omega_d = (omega_b1 - b2) / 2
    ambiguous = omega_b1 < 0 or (signed and omega_b2 > 0)
    if tau < 0:
        warnings.warn("negative recovered delay", stacklevel=2)
        ambiguous = True
    return BeatInversion(tau, omega_d, ambiguous)
