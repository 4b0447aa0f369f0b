"""Gaussian-state simulator and Fisher-information benchmark for quantum FMCW ranging."""

__version__ = "0.1.0"

from .gaussian import (
    GaussianState,
    PhysicalityReport,
    apply_beam_splitter,
    apply_phase_rotation,
    apply_squeeze,
    check_physicality,
    make_coherent,
    make_thermal,
    make_vacuum,
    tensor,
)
from .fmcw import (
    BeatParams,
    DiscreteGrid,
    ModulationProfile,
    TargetTruth,
    beat_params,
    fmcw_phase,
    instantaneous_frequency,
    invert_beats,
)
from .fisher import (
    FisherCurve,
    FisherPoint,
    GaussianDerivative,
    aggregate_over_period,
    cfi_gaussian_outcome,
    cfi_general,
    db_ratio,
    fisher_point,
    qfi_general,
    qfi_mean_encoded,
)
from .protocols import (
    ChannelModel,
    ScenarioFamily,
    SfgParams,
    SourceParams,
    SviParams,
    apply_sfg,
    apply_svi,
    build_coherent_scenario,
    build_tmsv_qhd_scenario,
    closed_form_fisher,
    planck_occupancy,
)
from .estimation import (
    CrbReport,
    EstimatorAbort,
    MeasurementRecord,
    TrialRecord,
    beat_series,
    estimate_target,
    periodogram_ml,
    run_monte_carlo,
    sample_record,
    simulate_two_segment,
)
