"""Muon, GD and noisy sign-dynamics experiments on controlled-spectrum quadratics."""

from ._core import (
    AllDiverged,
    DegenerateDirection,
    InvalidArgument,
    IoError,
    KeyMissing,
    MissingDiagnostics,
    MuonlabError,
    NonConvergence,
    NonFinite,
    ShapeMismatch,
    UnknownKind,
    UnknownVariant,
    build_problem,
    condition_number,
    exact_step_size,
    generate_spectrum,
    greedy_step,
    initial_weights,
    linesearch_experiment,
    list_presets,
    monte_carlo_summary,
    polar_express,
    polar_factor,
    reference_sigma_grid,
    run_preset,
    run_trajectory,
    sigma_sweep,
    spectrum_kinds,
    step_1d,
    svd,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
