"""Noise sweeps of the instantaneous Fisher information for all four protocols.

Values are Fisher information about ``omega_l`` per unit ``t^2`` (equivalently
at ``t = 1 s``), averaged over eight equally spaced beat phases. For every
protocol except SVI the information does not depend on the phase; for SVI the
average reproduces the period-averaged form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fisher import cfi_general, db_ratio, qfi_general
from .protocols import (
    ChannelModel,
    SfgParams,
    SourceParams,
    SviParams,
    apply_sfg,
    apply_svi,
    build_coherent_scenario,
    build_tmsv_qhd_scenario,
)

N_PHASES = 8
BASELINE = "F_QHD_coh"
EXACT_RTOL = 1e-6
APPROX_RTOL = 1e-2


@dataclass(frozen=True)
class SweepSpec:
    eps: float
    n: float
    n_th: tuple[float, ...]
    eps_s: tuple[float, ...]
    svi_eps_s: float
    r_prime: float
    exact_cov: bool = False


@dataclass(frozen=True, eq=False)
class SweepTable:
    columns: tuple[str, ...]
    rows: np.ndarray
    audit_failures: tuple[str, ...]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def phase_averaged(evaluator, family, n_phases: int = N_PHASES) -> float:
    phases = 2 * np.pi * np.arange(n_phases) / n_phases
    # at t = 0 the beat phase equals phi_l and d/d phi is the omega information per t^2
    return float(np.mean([evaluator(family, (0.0, p), 0.0, wrt="phi") for p in phases]))


def sfg_label(eps_s: float) -> str:
    return f"F_QHD_sfg(eps_s={eps_s:g})"


def sweep_columns(spec: SweepSpec) -> list[str]:
    fisher = ["F_Q_coh", "F_QHD_coh", "F_Q_tmsv", "F_QHD_tmsv", "F_Q_sfg"]
    fisher += [sfg_label(e) for e in spec.eps_s] + ["F_QHD_svi"]
    return fisher


def _audit(name, value, reference, n_th, failures):
    ref, approximate = reference
    rtol = APPROX_RTOL if approximate else EXACT_RTOL
    if not np.isclose(value, ref, rtol=rtol, atol=0):
        failures.append(f"{name} at n_th={n_th:g}: engine {value:.17g} vs closed form {ref:.17g}")


def fisher_sweep(spec: SweepSpec, baseline: str = BASELINE) -> SweepTable:
    """One row per ``n_th``: engine Fisher values, then dB ratios against ``baseline``.

    Every engine value is checked against its closed form (relative 1e-6,
    or 1e-2 where the closed form is an approximation); mismatches are
    returned in ``audit_failures``.
    """
    fisher_cols = sweep_columns(spec)
    if baseline not in fisher_cols:
        raise ValueError(f"unknown baseline column {baseline!r}")
    coh_src = SourceParams("coherent", spec.n)
    sv_src = SourceParams("tmsv", spec.n)
    rows, failures = [], []
    for n_th in spec.n_th:
        ch = ChannelModel(spec.eps, n_th)
        coh = build_coherent_scenario(coh_src, ch)
        tmsv = build_tmsv_qhd_scenario(sv_src, ch)
        sfgs = [apply_sfg(sv_src, ch, SfgParams(e, spec.exact_cov)) for e in spec.eps_s]
        svi = apply_svi(apply_sfg(sv_src, ch, SfgParams(spec.svi_eps_s, spec.exact_cov)), SviParams(spec.r_prime))

        values = {
            "F_Q_coh": (phase_averaged(qfi_general, coh), coh.closed_form("qfi", 0, 0, 1.0)),
            "F_QHD_coh": (phase_averaged(cfi_general, coh), coh.closed_form("cfi", 0, 0, 1.0)),
            "F_Q_tmsv": (phase_averaged(qfi_general, tmsv), tmsv.closed_form("qfi", 0, 0, 1.0)),
            "F_QHD_tmsv": (phase_averaged(cfi_general, tmsv), tmsv.closed_form("cfi", 0, 0, 1.0)),
            "F_Q_sfg": (phase_averaged(qfi_general, sfgs[0]), sfgs[0].closed_form("qfi", 0, 0, 1.0)),
            "F_QHD_svi": (phase_averaged(cfi_general, svi), svi.closed_form("cfi", 0, 0, 1.0, averaged=True)),
        }
        for e, fam in zip(spec.eps_s, sfgs):
            values[sfg_label(e)] = (phase_averaged(cfi_general, fam), fam.closed_form("cfi", 0, 0, 1.0))
        for name, (value, ref) in values.items():
            _audit(name, value, ref, n_th, failures)
        row = [n_th] + [values[c][0] for c in fisher_cols]
        row += [db_ratio(values[c][0], values[baseline][0]) for c in fisher_cols]
        rows.append(row)
    columns = ["n_th"] + fisher_cols + [f"db_{c}" for c in fisher_cols]
    return SweepTable(tuple(columns), np.array(rows, dtype=float), tuple(failures))


def fig3_spec(n_points: int = 61) -> SweepSpec:
    """Defaults: eps = n = 1e-3, eps_s in {0.1, 10}, SVI at eps_s = 0.1 with e^{r'} = 100."""
    return SweepSpec(
        eps=1e-3,
        n=1e-3,
        n_th=tuple(np.logspace(-3, 3, n_points)),
        eps_s=(0.1, 10.0),
        svi_eps_s=0.1,
        r_prime=float(np.log(100.0)),
    )
