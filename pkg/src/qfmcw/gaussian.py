"""Multimode Gaussian states in the time-domain I/Q representation.

Quadratures are ``I = (a + a^dag)/2`` and ``Q = -i(a - a^dag)/2`` so that
``[I, Q] = i/2`` and the vacuum covariance is ``I/4``. Phase-space vectors are
ordered ``(I_1, Q_1, ..., I_m, Q_m)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

VACUUM_VARIANCE = 0.25
SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-10

_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with ``[[0, 1], [-1, 0]]`` blocks."""
    return np.kron(np.eye(n_modes), _J2)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an ``m``-mode Gaussian state.

    The arrays are copied and frozen on construction. Shape and symmetry are
    validated here; the uncertainty principle is not, since some effective
    (post-processing) statistics used downstream are deliberately checked with
    :func:`check_physicality` instead.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise ValueError(f"mean must have even, non-zero length; got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise ValueError("mean and cov must be finite")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("cov is not symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def _slice(self, mode: int) -> slice:
        _check_mode(self, mode)
        return slice(2 * mode, 2 * mode + 2)

    def mode_mean(self, mode: int) -> np.ndarray:
        return self.mean[self._slice(mode)]

    def mode_cov(self, mode: int) -> np.ndarray:
        s = self._slice(mode)
        return self.cov[s, s]

    def reduced(self, modes: Sequence[int]) -> "GaussianState":
        """Marginal state of the listed modes (in the given order)."""
        idx = np.concatenate([np.arange(2 * m, 2 * m + 2) for m in _checked_modes(self, modes)])
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def transformed(self, S: np.ndarray) -> "GaussianState":
        """Apply ``mean -> S mean`` and ``cov -> S cov S^T``."""
        cov = S @ self.cov @ S.T
        return GaussianState(S @ self.mean, 0.5 * (cov + cov.T))

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.mean.shape == other.mean.shape
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )


def _check_mode(state: GaussianState, mode: int) -> int:
    if isinstance(mode, bool) or not isinstance(mode, (int, np.integer)):
        raise TypeError(f"mode index must be an integer, got {mode!r}")
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range for a {state.n_modes}-mode state")
    return int(mode)


def _checked_modes(state: GaussianState, modes: Sequence[int]) -> list[int]:
    modes = [_check_mode(state, m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValueError(f"mode indices must be distinct, got {modes}")
    return modes


def tensor(*states: GaussianState) -> GaussianState:
    """Direct sum of independent states, modes concatenated in order."""
    if not states:
        raise ValueError("need at least one state")
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((mean.size, mean.size))
    k = 0
    for s in states:
        d = s.mean.size
        cov[k:k + d, k:k + d] = s.cov
        k += d
    return GaussianState(mean, cov)


def make_vacuum(n_modes: int) -> GaussianState:
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return GaussianState(np.zeros(2 * n_modes), VACUUM_VARIANCE * np.eye(2 * n_modes))


def make_thermal(n_modes: int, n_th: float) -> GaussianState:
    """Thermal state with ``n_th`` mean photons per mode: cov = (1 + 2 n_th) I / 4."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if not n_th >= 0:
        raise ValueError(f"n_th must be non-negative, got {n_th}")
    return GaussianState(np.zeros(2 * n_modes), (1 + 2 * n_th) * VACUUM_VARIANCE * np.eye(2 * n_modes))


def make_coherent(alpha: complex) -> GaussianState:
    """Single-mode coherent state; ``<I> = Re(alpha)``, ``<Q> = Im(alpha)``."""
    return GaussianState([alpha.real, alpha.imag], VACUUM_VARIANCE * np.eye(2))


def embed(S_local: np.ndarray, modes: Sequence[int], n_modes: int) -> np.ndarray:
    """Embed a transform acting on ``modes`` into the identity on ``n_modes``."""
    idx = np.concatenate([np.arange(2 * m, 2 * m + 2) for m in modes])
    S = np.eye(2 * n_modes)
    S[np.ix_(idx, idx)] = S_local
    return S


def beam_splitter_matrix(eps: float) -> np.ndarray:
    """Two-mode beam splitter of reflectivity ``eps`` acting on (I1, Q1, I2, Q2).

    Mode 1 exits as ``sqrt(eps) * in1 - sqrt(1 - eps) * in2``, so with a signal in
    mode 1 and a bath in mode 2 the surviving mode 1 carries
    ``eps * C_signal + (1 - eps) * C_bath``.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {eps}")
    a, b = np.sqrt(eps), np.sqrt(1.0 - eps)
    return np.kron(np.array([[a, -b], [b, a]]), np.eye(2))


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def squeeze_matrix(r: float, angle: float = 0.0) -> np.ndarray:
    """Single-mode squeezer; ``angle = 0`` squeezes the in-phase quadrature.

    ``S(r, angle) = R(angle/2) diag(e^-r, e^r) R(angle/2)^T``.
    """
    R = rotation_matrix(angle / 2)
    return R @ np.diag([np.exp(-r), np.exp(r)]) @ R.T


def apply_symplectic(state: GaussianState, S_local: np.ndarray, modes: Sequence[int]) -> GaussianState:
    modes = _checked_modes(state, modes)
    S_local = np.asarray(S_local, dtype=float)
    if S_local.shape != (2 * len(modes), 2 * len(modes)):
        raise ValueError("transform size does not match the number of modes")
    return state.transformed(embed(S_local, modes, state.n_modes))


def apply_beam_splitter(state: GaussianState, mode_a: int, mode_b: int, eps: float) -> GaussianState:
    return apply_symplectic(state, beam_splitter_matrix(eps), [mode_a, mode_b])


def apply_squeeze(state: GaussianState, mode: int, r: float, angle: float = 0.0) -> GaussianState:
    if not r >= 0:
        raise ValueError(f"squeezing amplitude must be non-negative, got {r}")
    return apply_symplectic(state, squeeze_matrix(r, angle), [mode])


def apply_phase_rotation(state: GaussianState, mode: int, angle: float) -> GaussianState:
    return apply_symplectic(state, rotation_matrix(angle), [mode])


@dataclass(frozen=True)
class PhysicalityReport:
    is_physical: bool
    min_eigenvalue: float

    def __bool__(self) -> bool:
        return self.is_physical


def check_physicality(state: GaussianState, tol: float = PHYSICALITY_TOL) -> PhysicalityReport:
    """Test ``cov + (i/4) Omega >= 0`` through its smallest eigenvalue."""
    H = state.cov + 0.25j * symplectic_form(state.n_modes)
    min_eig = float(np.linalg.eigvalsh(H).min())
    return PhysicalityReport(min_eig >= -tol, min_eig)
