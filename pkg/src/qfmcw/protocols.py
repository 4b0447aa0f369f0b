"""Illumination scenarios as Gaussian families parameterized by the beat tone.

Every family maps ``(omega_l, phi_l, t)`` to the first and second moments of the
quadratures through the beat phase ``x = omega_l * t + phi_l``. Two detection
levels are exposed:

``"ideal"``
    statistics of the state before measurement (used for the QFI);
``"heterodyne"``
    statistics of the heterodyne outcomes, including image-band noise (used for
    the CFI and for sampling records).

Families:

* :class:`CoherentFamily` -- FMCW coherent light through the thermal channel;
* :class:`TmsvQhdFamily` -- return and idler of a two-mode squeezed vacuum,
  each heterodyned independently;
* :class:`SfgFamily` -- the return/idler pair up-converted by sum-frequency
  generation, then heterodyned;
* :class:`SviFamily` -- as above, in-phase outcome only, with a squeezed image
  band.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.constants import hbar, k as k_B

from .fisher import GaussianDerivative
from .fmcw import DiscreteGrid
from .gaussian import (
    GaussianState,
    VACUUM_VARIANCE,
    apply_beam_splitter,
    apply_squeeze,
    make_thermal,
    make_vacuum,
    tensor,
)

IDEAL, HETERODYNE = "ideal", "heterodyne"
SFG_VALIDITY_LIMIT = 0.05


def planck_occupancy(omega, T_th):
    """Bose-Einstein mean photon number ``1 / (exp(hbar omega / k_B T) - 1)``."""
    omega = np.asarray(omega, dtype=float)
    T_th = np.asarray(T_th, dtype=float)
    if np.any(omega <= 0) or np.any(T_th <= 0):
        raise ValueError("omega and T_th must be positive")
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(hbar * omega / (k_B * T_th))
    return n if n.ndim else float(n)


@dataclass(frozen=True)
class ChannelModel:
    """Target reflectivity / channel transmissivity ``eps`` and background ``n_th``."""

    eps: float
    n_th: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if not self.n_th >= 0:
            raise ValueError(f"n_th must be non-negative, got {self.n_th}")

    @classmethod
    def from_temperature(cls, eps: float, omega: float, T_th: float) -> "ChannelModel":
        return cls(eps, planck_occupancy(omega, T_th))

    @property
    def high_loss(self) -> bool:
        """False when ``eps > 0.1``, where small-loss approximations degrade."""
        return self.eps <= 0.1


@dataclass(frozen=True)
class SourceParams:
    """Transmitter: ``kind`` is ``"coherent"`` or ``"tmsv"``.

    ``n_signal`` is the mean photon number per temporal mode. For a TMSV source
    the idler is chirped opposite to the signal so that the pump frequency
    ``omega_S + omega_I`` stays fixed; only this bookkeeping is recorded.
    """

    kind: str
    n_signal: float
    omega_S: float | None = None
    omega_I: float | None = None

    def __post_init__(self):
        if self.kind not in ("coherent", "tmsv"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.n_signal >= 0:
            raise ValueError("n_signal must be non-negative")

    @property
    def omega_P(self) -> float | None:
        if self.omega_S is None or self.omega_I is None:
            return None
        return self.omega_S + self.omega_I

    @property
    def idler_chirp_sign(self) -> int:
        return -1 if self.kind == "tmsv" else 0


@dataclass(frozen=True)
class SfgParams:
    eps_s: float
    exact_cov: bool = False

    def __post_init__(self):
        if not self.eps_s >= 0:
            raise ValueError("eps_s must be non-negative")


@dataclass(frozen=True)
class SviParams:
    """Image-band squeezing ``r_prime`` on the in-phase quadrature."""

    r_prime: float

    def __post_init__(self):
        if not self.r_prime >= 0:
            raise ValueError("r_prime must be non-negative")

    def eps_s_eff(self, eps_s: float) -> float:
        return eps_s * np.exp(self.r_prime)


class Moments(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray


class ClosedForm(NamedTuple):
    value: float
    approximate: bool


def _eye_like(x: np.ndarray, d: int) -> np.ndarray:
    return np.broadcast_to(np.eye(d), x.shape + (d, d)).copy()


def _circle(x: np.ndarray, amp: float) -> np.ndarray:
    return amp * np.stack([np.cos(x), np.sin(x)], axis=-1)


def _circle_dx(x: np.ndarray, amp: float) -> np.ndarray:
    return amp * np.stack([-np.sin(x), np.cos(x)], axis=-1)


def _reflection(x: np.ndarray) -> np.ndarray:
    """Symmetric rotation-reflection ``[[-cos x, -sin x], [-sin x, cos x]]``."""
    c, s = np.cos(x), np.sin(x)
    return np.stack([np.stack([-c, -s], -1), np.stack([-s, c], -1)], -2)


def _reflection_dx(x: np.ndarray) -> np.ndarray:
    c, s = np.cos(x), np.sin(x)
    return np.stack([np.stack([s, -c], -1), np.stack([-c, -s], -1)], -2)


class ScenarioFamily(ABC):
    """Gaussian family ``(omega_l, phi_l, t) -> moments``.

    Subclasses implement the phase-domain moments and their analytic
    derivatives; chain rules to ``omega_l`` (factor ``t``) and ``phi_l``
    (factor 1) live here. ``ideal_is_state`` is False when the ideal statistics
    are effective quadrature statistics rather than a physical state, in which
    case the QFI engine treats them as a classical Gaussian distribution.
    """

    label: str
    kind: str
    detection: str = HETERODYNE
    ideal_is_state: bool = True

    def __init__(self, source: SourceParams, channel: ChannelModel):
        self.source = source
        self.channel = channel

    @property
    def n_signal(self) -> float:
        return self.source.n_signal

    def photon_number(self, grid: DiscreteGrid) -> float:
        """Mean transmitted signal photons over the grid, ``n_signal (j_B + 1)``."""
        return self.n_signal * grid.n_samples

    def _detection(self, detection: str | None) -> str:
        detection = self.detection if detection is None else detection
        if detection not in (IDEAL, HETERODYNE):
            raise ValueError(f"unknown detection {detection!r}")
        return detection

    @abstractmethod
    def _moments_x(self, x: np.ndarray, detection: str) -> tuple[np.ndarray, np.ndarray]: ...

    @abstractmethod
    def _derivative_x(self, x: np.ndarray, detection: str) -> tuple[np.ndarray, np.ndarray]: ...

    def moments(self, omega_l: float, phi_l: float, t, detection: str | None = None) -> Moments:
        """Means and covariances at time(s) ``t``; arrays gain a leading time axis."""
        x = omega_l * np.asarray(t, dtype=float) + phi_l
        return Moments(*self._moments_x(x, self._detection(detection)))

    def state(self, omega_l: float, phi_l: float, t: float, detection: str | None = None) -> GaussianState:
        return GaussianState(*self.moments(omega_l, phi_l, float(t), detection))

    def derivative(
        self, omega_l: float, phi_l: float, t, detection: str | None = None, wrt: str = "omega"
    ) -> GaussianDerivative:
        t = np.asarray(t, dtype=float)
        d_mean, d_cov = self._derivative_x(omega_l * t + phi_l, self._detection(detection))
        if wrt == "omega":
            d_mean = d_mean * t[..., None]
            d_cov = d_cov * t[..., None, None]
        elif wrt != "phi":
            raise ValueError(f"wrt must be 'omega' or 'phi', got {wrt!r}")
        return GaussianDerivative(d_mean, d_cov, "analytic")

    @abstractmethod
    def closed_form(self, which: str, omega_l: float, phi_l: float, t: float, averaged: bool = False) -> ClosedForm:
        """Reference Fisher information (``which`` is ``"qfi"`` or ``"cfi"``)."""


class CoherentFamily(ScenarioFamily):
    kind = "coherent"

    def __init__(self, source: SourceParams, channel: ChannelModel, detection: str = HETERODYNE):
        super().__init__(source, channel)
        self.detection = self._detection(detection)
        self.label = f"coherent-{self.detection}"
        # signal (vacuum-noise coherent mode) mixed with the bath on the target beam splitter
        mixed = apply_beam_splitter(tensor(make_vacuum(1), make_thermal(1, channel.n_th)), 0, 1, channel.eps)
        self._channel_cov = np.array(mixed.mode_cov(0))
        self.amplitude = np.sqrt(channel.eps * source.n_signal)

    def _cov(self, detection):
        if detection == HETERODYNE:
            return self._channel_cov + VACUUM_VARIANCE * np.eye(2)
        return self._channel_cov

    def _moments_x(self, x, detection):
        return _circle(x, self.amplitude), np.broadcast_to(self._cov(detection), x.shape + (2, 2)).copy()

    def _derivative_x(self, x, detection):
        return _circle_dx(x, self.amplitude), np.zeros(x.shape + (2, 2))

    def closed_form(self, which, omega_l, phi_l, t, averaged=False):
        eps, n, n_th = self.channel.eps, self.n_signal, self.channel.n_th
        if which == "qfi":
            return ClosedForm(4 * t**2 * n * eps / (1 + 2 * n_th * (1 - eps)), False)
        if which == "cfi":
            return ClosedForm(2 * t**2 * n * eps / (1 + n_th * (1 - eps)), False)
        raise ValueError(f"unknown Fisher kind {which!r}")


class TmsvQhdFamily(ScenarioFamily):
    """Two-mode (return, idler) zero-mean family; the beat lives in the cross block."""

    kind = "tmsv"

    def __init__(self, source: SourceParams, channel: ChannelModel):
        super().__init__(source, channel)
        eps, n, n_th = channel.eps, source.n_signal, channel.n_th
        self.label = "tmsv-qhd"
        self.a = (eps * (1 + 2 * n) + (1 - eps) * (1 + 2 * n_th)) / 4
        self.b = (1 + 2 * n) / 4
        self.c = np.sqrt(eps * n * (1 + n)) / 2

    def _moments_x(self, x, detection):
        cov = np.zeros(x.shape + (4, 4))
        extra = VACUUM_VARIANCE if detection == HETERODYNE else 0.0
        cov[..., :2, :2] = (self.a + extra) * np.eye(2)
        cov[..., 2:, 2:] = (self.b + extra) * np.eye(2)
        cross = self.c * _reflection(x)
        cov[..., :2, 2:] = cross
        cov[..., 2:, :2] = cross
        return np.zeros(x.shape + (4,)), cov

    def _derivative_x(self, x, detection):
        d_cov = np.zeros(x.shape + (4, 4))
        cross = self.c * _reflection_dx(x)
        d_cov[..., :2, 2:] = cross
        d_cov[..., 2:, :2] = cross
        return np.zeros(x.shape + (4,)), d_cov

    def closed_form(self, which, omega_l, phi_l, t, averaged=False):
        eps, n, n_th = self.channel.eps, self.n_signal, self.channel.n_th
        if which == "qfi":
            den = 1 + n * (1 - eps) + n_th * (1 + 2 * n) * (1 - eps)
            return ClosedForm(4 * n * (1 + n) * t**2 * eps / den, False)
        if which == "cfi":
            return ClosedForm(2 * t**2 * n * eps / (1 + n_th * (1 - eps)), False)
        raise ValueError(f"unknown Fisher kind {which!r}")


class SfgFamily(ScenarioFamily):
    """Single up-converted mode after sum-frequency generation.

    Ideal statistics are the effective up-converted quadratures (mean
    ``-sqrt(eps n)(cos x, sin x)``, covariance ``C'``); they are not scaled by
    ``eps_s`` and may sit below the vacuum level, so ``ideal_is_state`` is
    False. Heterodyne statistics are mean ``eps_s`` times that and covariance
    ``I/4 + eps_s^2 C'``.
    """

    kind = "sfg"
    ideal_is_state = False

    def __init__(self, source: SourceParams, channel: ChannelModel, sfg: SfgParams):
        super().__init__(source, channel)
        self.sfg = sfg
        self.label = f"sfg-qhd(eps_s={sfg.eps_s:g})"
        self.amplitude = np.sqrt(channel.eps * source.n_signal)
        self._base = (1 + 2 * channel.n_th) / 8
        self._ripple = 4 * source.n_signal * channel.eps / 8 if sfg.exact_cov else 0.0

    @property
    def eps_s(self) -> float:
        return self.sfg.eps_s

    def _effective_cov(self, x):
        c2, s2 = np.cos(2 * x), np.sin(2 * x)
        cov = np.empty(x.shape + (2, 2))
        cov[..., 0, 0] = self._base + self._ripple * c2
        cov[..., 1, 1] = self._base - self._ripple * c2
        cov[..., 0, 1] = cov[..., 1, 0] = self._ripple * s2
        return cov

    def _effective_cov_dx(self, x):
        c2, s2 = np.cos(2 * x), np.sin(2 * x)
        d = np.empty(x.shape + (2, 2))
        d[..., 0, 0] = -2 * self._ripple * s2
        d[..., 1, 1] = 2 * self._ripple * s2
        d[..., 0, 1] = d[..., 1, 0] = 2 * self._ripple * c2
        return d

    def _moments_x(self, x, detection):
        mean = -_circle(x, self.amplitude)
        cov = self._effective_cov(x)
        if detection == IDEAL:
            return mean, cov
        return self.eps_s * mean, VACUUM_VARIANCE * _eye_like(x, 2) + self.eps_s**2 * cov

    def _derivative_x(self, x, detection):
        d_mean = -_circle_dx(x, self.amplitude)
        d_cov = self._effective_cov_dx(x)
        if detection == IDEAL:
            return d_mean, d_cov
        return self.eps_s * d_mean, self.eps_s**2 * d_cov

    def closed_form(self, which, omega_l, phi_l, t, averaged=False):
        eps, n, n_th = self.channel.eps, self.n_signal, self.channel.n_th
        exact = self.sfg.exact_cov
        if which == "qfi":
            # with the full covariance the mean-only form omits covariance information
            den = 1 + 2 * n_th - (4 * n * eps if exact else 0.0)
            return ClosedForm(8 * t**2 * n * eps / den, exact)
        if which == "cfi":
            e2 = self.eps_s**2
            return ClosedForm(8 * t**2 * eps * n * e2 / (2 + (1 + 2 * n_th) * e2), exact)
        raise ValueError(f"unknown Fisher kind {which!r}")


class SviFamily(ScenarioFamily):
    """In-phase heterodyne outcome of the SFG mode with a squeezed image band.

    Heterodyne statistics are scalar: mean ``-eps_s sqrt(eps n) cos x`` and
    variance ``eps_s^2 C'_II + e^{-2 r'} / 4``. Ideal statistics are those of
    the parent SFG family.
    """

    kind = "svi"
    ideal_is_state = False

    def __init__(self, parent: SfgFamily, svi: SviParams):
        super().__init__(parent.source, parent.channel)
        self.parent = parent
        self.svi = svi
        self.label = f"sfg-qhd-svi(eps_s={parent.eps_s:g}, r'={svi.r_prime:g})"
        image_band = apply_squeeze(make_vacuum(1), 0, svi.r_prime, 0.0)
        self._image_var = float(image_band.cov[0, 0])

    @property
    def eps_s_eff(self) -> float:
        return self.svi.eps_s_eff(self.parent.eps_s)

    def _moments_x(self, x, detection):
        if detection == IDEAL:
            return self.parent._moments_x(x, IDEAL)
        mean, cov = self.parent._moments_x(x, IDEAL)
        e = self.parent.eps_s
        return e * mean[..., :1], e**2 * cov[..., :1, :1] + self._image_var

    def _derivative_x(self, x, detection):
        if detection == IDEAL:
            return self.parent._derivative_x(x, IDEAL)
        d_mean, d_cov = self.parent._derivative_x(x, IDEAL)
        e = self.parent.eps_s
        return e * d_mean[..., :1], e**2 * d_cov[..., :1, :1]

    def closed_form(self, which, omega_l, phi_l, t, averaged=False):
        if which == "qfi":
            return self.parent.closed_form("qfi", omega_l, phi_l, t)
        if which != "cfi":
            raise ValueError(f"unknown Fisher kind {which!r}")
        eps, n, n_th = self.channel.eps, self.n_signal, self.channel.n_th
        e2 = self.eps_s_eff**2
        envelope = 8 * t**2 * eps * n * e2 / (2 + (1 + 2 * n_th) * e2)
        approx = self.parent.sfg.exact_cov
        if averaged:
            return ClosedForm(envelope / 2, True)
        return ClosedForm(envelope * np.sin(omega_l * t + phi_l) ** 2, approx)


def build_coherent_scenario(
    src: SourceParams, ch: ChannelModel, quad_detection: str = HETERODYNE
) -> CoherentFamily:
    if src.kind != "coherent":
        raise ValueError(f"coherent scenario needs a coherent source, got {src.kind!r}")
    return CoherentFamily(src, ch, quad_detection)


def build_tmsv_qhd_scenario(src: SourceParams, ch: ChannelModel) -> TmsvQhdFamily:
    if src.kind != "tmsv":
        raise ValueError(f"TMSV scenario needs a tmsv source, got {src.kind!r}")
    return TmsvQhdFamily(src, ch)


def apply_sfg(src: SourceParams, ch: ChannelModel, sfg: SfgParams) -> SfgFamily:
    if src.kind != "tmsv":
        raise ValueError(f"SFG needs a tmsv source, got {src.kind!r}")
    if ch.eps > SFG_VALIDITY_LIMIT or src.n_signal > SFG_VALIDITY_LIMIT:
        warnings.warn(
            f"SFG statistics assume eps << 1 and n_sv << 1 (got eps={ch.eps:g}, n_sv={src.n_signal:g})",
            stacklevel=2,
        )
    return SfgFamily(src, ch, sfg)


def apply_svi(scenario: SfgFamily, svi: SviParams) -> SviFamily:
    if not isinstance(scenario, SfgFamily):
        raise TypeError("squeezed-vacuum injection applies to an SFG family")
    return SviFamily(scenario, svi)


def closed_form_fisher(
    scenario: ScenarioFamily, which: str, theta: tuple[float, float], t: float, averaged: bool = False
) -> ClosedForm:
    omega_l, phi_l = theta
    return scenario.closed_form(which.lower(), omega_l, phi_l, t, averaged)
