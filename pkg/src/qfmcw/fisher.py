"""Quantum and classical Fisher information for Gaussian families.

Fisher information for the beat frequency ``omega_l`` carries units of s^2
(inverse of a variance in (rad/s)^2); with respect to the phase ``phi_l`` it is
dimensionless.

Quantum Fisher information of a Gaussian state with mean ``m`` and covariance
``C`` (vacuum variance 1/4, symplectic form ``Omega``) is evaluated as::

    F_Q = dm^T C^-1 dm + 1/2 vec(dC)^T (C (x) C - Omega (x) Omega / 16)^+ vec(dC)

using a pseudo-inverse, which also covers pure states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy import integrate

from .gaussian import GaussianState, check_physicality, symplectic_form

if TYPE_CHECKING:
    from .fmcw import DiscreteGrid
    from .protocols import ScenarioFamily

MIN_SAMPLES_PER_BEAT = 16
_PINV_RCOND = 1e-12


class SingularCovarianceError(ValueError):
    pass


class NonPhysicalStateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianDerivative:
    """Derivative of a family's mean and covariance with respect to one parameter.

    ``source`` is ``"analytic"`` or ``"central-fd"``; ``h`` is the finite
    difference step when one was used.
    """

    d_mean: np.ndarray
    d_cov: np.ndarray
    source: str = "analytic"
    h: float | None = None


@dataclass(frozen=True)
class FisherPoint:
    theta: tuple[float, float]
    t: float
    qfi: float
    cfi: float
    qfi_closed: float | None = None
    cfi_closed: float | None = None
    qfi_approximate: bool = False
    cfi_approximate: bool = False
    derivative: str = "analytic"
    h: float | None = None


@dataclass(frozen=True, eq=False)
class FisherCurve:
    """Fisher values along a sweep axis, with period aggregates when relevant.

    For period aggregation ``axis`` is ``"t"`` and ``values`` holds the
    instantaneous Fisher information at each sample time. ``integral`` is the
    trapezoidal time integral, ``total`` the per-sample sum (the information
    carried by the discrete record) and ``total_nuisance`` the per-sample sum
    after projecting out an unknown phase ``phi_l``.
    """

    axis: str
    grid: np.ndarray
    values: np.ndarray
    which: str = ""
    points: tuple[FisherPoint, ...] = ()
    integral: float | None = None
    total: float | None = None
    total_nuisance: float | None = None
    n_signal_photons: float | None = None
    t0: float = 0.0


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance is not positive definite") from exc


def _solve(cov: np.ndarray, b: np.ndarray) -> np.ndarray:
    L = _cholesky(cov)
    y = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, y)


def qfi_mean_encoded(d_mean, cov) -> float:
    """``d_mean^T cov^-1 d_mean``; exact when the covariance does not depend on the parameter."""
    d_mean = np.atleast_1d(np.asarray(d_mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    return float(d_mean @ _solve(cov, d_mean))


def cfi_gaussian_outcome(d_mean, d_cov, cov) -> float:
    """Classical Fisher information of a Gaussian outcome distribution."""
    d_mean = np.atleast_1d(np.asarray(d_mean, dtype=float))
    d_cov = np.atleast_2d(np.asarray(d_cov, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    A = _solve(cov, d_cov)
    return float(d_mean @ _solve(cov, d_mean) + 0.5 * np.trace(A @ A))


def qfi_gaussian_state(cov, d_mean, d_cov) -> float:
    """QFI of a Gaussian state whose mean and covariance both depend on the parameter."""
    cov = np.asarray(cov, dtype=float)
    d_cov = np.asarray(d_cov, dtype=float)
    mean_term = qfi_mean_encoded(d_mean, cov)
    if not np.any(d_cov):
        return mean_term
    Omega = symplectic_form(cov.shape[0] // 2)
    M = np.kron(cov, cov) - np.kron(Omega, Omega) / 16
    v = d_cov.reshape(-1)
    cov_term = 0.5 * v @ np.linalg.pinv(M, rcond=_PINV_RCOND, hermitian=True) @ v
    return float(mean_term + cov_term)


def default_step(omega_l: float) -> float:
    return 1e-6 * max(abs(omega_l), 1.0)


def finite_difference_derivative(
    family: "ScenarioFamily",
    omega_l: float,
    phi_l: float,
    t: float,
    detection: str | None = None,
    wrt: str = "omega",
    h: float | None = None,
    richardson: bool = False,
) -> GaussianDerivative:
    """Central-difference derivative of the family moments, optionally Richardson-refined."""
    if h is None:
        h = default_step(omega_l)

    def diff(step):
        if wrt == "omega":
            hi = family.moments(omega_l + step, phi_l, t, detection)
            lo = family.moments(omega_l - step, phi_l, t, detection)
        elif wrt == "phi":
            hi = family.moments(omega_l, phi_l + step, t, detection)
            lo = family.moments(omega_l, phi_l - step, t, detection)
        else:
            raise ValueError(f"wrt must be 'omega' or 'phi', got {wrt!r}")
        return (hi.mean - lo.mean) / (2 * step), (hi.cov - lo.cov) / (2 * step)

    d_mean, d_cov = diff(h)
    if richardson:
        m2, c2 = diff(h / 2)
        d_mean = (4 * m2 - d_mean) / 3
        d_cov = (4 * c2 - d_cov) / 3
    return GaussianDerivative(d_mean, d_cov, "central-fd", h)


def _derivative(family, theta, t, detection, wrt, derivative, h):
    omega_l, phi_l = theta
    if derivative == "analytic":
        return family.derivative(omega_l, phi_l, t, detection, wrt)
    if derivative in ("fd", "central-fd"):
        return finite_difference_derivative(family, omega_l, phi_l, t, detection, wrt, h)
    raise ValueError(f"unknown derivative method {derivative!r}")


def qfi_general(
    family: "ScenarioFamily",
    theta: tuple[float, float],
    t: float,
    derivative: str = "analytic",
    h: float | None = None,
    wrt: str = "omega",
) -> float:
    """QFI of the family's pre-measurement statistics at one time.

    Families whose ideal statistics are a physical state use the Gaussian-state
    QFI; families exposing effective (not necessarily physical) quadrature
    statistics are treated as Gaussian distributions.
    """
    m = family.moments(theta[0], theta[1], t, "ideal")
    d = _derivative(family, theta, t, "ideal", wrt, derivative, h)
    if not family.ideal_is_state:
        return cfi_gaussian_outcome(d.d_mean, d.d_cov, m.cov)
    report = check_physicality(GaussianState(m.mean, m.cov))
    if not report:
        raise NonPhysicalStateError(f"state violates the uncertainty principle (min eig {report.min_eigenvalue:.3g})")
    return qfi_gaussian_state(m.cov, d.d_mean, d.d_cov)


def cfi_general(
    family: "ScenarioFamily",
    theta: tuple[float, float],
    t: float,
    derivative: str = "analytic",
    h: float | None = None,
    wrt: str = "omega",
) -> float:
    """CFI of the heterodyne outcomes of the family at one time."""
    m = family.moments(theta[0], theta[1], t, "heterodyne")
    d = _derivative(family, theta, t, "heterodyne", wrt, derivative, h)
    return cfi_gaussian_outcome(d.d_mean, d.d_cov, m.cov)


def fisher_point(
    family: "ScenarioFamily",
    theta: tuple[float, float],
    t: float,
    derivative: str = "analytic",
    h: float | None = None,
) -> FisherPoint:
    q_ref = family.closed_form("qfi", theta[0], theta[1], t)
    c_ref = family.closed_form("cfi", theta[0], theta[1], t)
    if derivative != "analytic" and h is None:
        h = default_step(theta[0])
    return FisherPoint(
        theta=(float(theta[0]), float(theta[1])),
        t=float(t),
        qfi=qfi_general(family, theta, t, derivative, h),
        cfi=cfi_general(family, theta, t, derivative, h),
        qfi_closed=float(q_ref.value),
        cfi_closed=float(c_ref.value),
        qfi_approximate=q_ref.approximate,
        cfi_approximate=c_ref.approximate,
        derivative=derivative,
        h=h if derivative != "analytic" else None,
    )


def trapezoid(values, times) -> float:
    return float(integrate.trapezoid(np.asarray(values, dtype=float), np.asarray(times, dtype=float)))


def nuisance_phase_fisher(phase_info, times) -> float:
    """Frequency information with ``phi_l`` unknown.

    ``phase_info[p]`` is the Fisher information about the beat phase carried by
    sample ``p``; since ``d/d omega = t d/d phi`` the per-sample Fisher matrix
    in (omega, phi) is ``f_p [[t^2, t], [t, 1]]`` and the Schur complement
    removes the phase.
    """
    f = np.asarray(phase_info, dtype=float)
    t = np.asarray(times, dtype=float)
    J_ww, J_wp, J_pp = np.sum(f * t**2), np.sum(f * t), np.sum(f)
    if J_pp <= 0:
        return 0.0
    return float(J_ww - J_wp**2 / J_pp)


def aggregate_over_period(
    family: "ScenarioFamily",
    grid: "DiscreteGrid",
    which: str,
    theta: tuple[float, float],
    t0: float = 0.0,
    min_samples_per_beat: int = MIN_SAMPLES_PER_BEAT,
) -> FisherCurve:
    """Instantaneous Fisher information over the detection window and its aggregates.

    Times are ``t0 + grid.times``; ``t0`` sets the origin that the ``t^2``
    growth of the instantaneous information is measured from.
    """
    omega_l, phi_l = theta
    if omega_l != 0 and 2 * np.pi / abs(omega_l) < min_samples_per_beat * grid.spacing:
        raise ValueError(
            f"grid spacing {grid.spacing:.3g} s under-resolves the beat "
            f"(need >= {min_samples_per_beat} samples per period)"
        )
    evaluator: Callable = {"qfi": qfi_general, "cfi": cfi_general}[which.lower()]
    times = t0 + grid.times
    phase_info = np.array([evaluator(family, theta, t, wrt="phi") for t in times])
    values = phase_info * times**2
    return FisherCurve(
        axis="t",
        grid=times,
        values=values,
        which=which.lower(),
        integral=trapezoid(values, times),
        total=float(np.sum(values)),
        total_nuisance=nuisance_phase_fisher(phase_info, times),
        n_signal_photons=family.photon_number(grid),
        t0=t0,
    )


def db_ratio(f_num, f_den):
    f_num = np.asarray(f_num, dtype=float)
    f_den = np.asarray(f_den, dtype=float)
    if np.any(f_num <= 0) or np.any(f_den <= 0):
        raise ValueError("dB ratio needs positive inputs")
    out = 10 * np.log10(f_num / f_den)
    return out if out.ndim else float(out)
