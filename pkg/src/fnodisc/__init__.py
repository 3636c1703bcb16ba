"""Discretized Fourier neural operators on the d-torus (d = 1 or 2).

The package provides the spectral machinery (centered-index DFT,
trigonometric interpolation, Sobolev norms, aliasing diagnostics),
Gaussian random fields of prescribed smoothness, a from-scratch FNO with
hand-derived adjoint gradients, multi-resolution error measurement, and
an adaptive-resolution training scheduler.  Everything is float64 numpy
and deterministic given seeds.
"""

__version__ = "0.1.0"

from .spectral import (
    GridField,
    SpectralField,
    SobolevParams,
    GridNestingError,
    RealnessError,
    dft,
    idft_on_grid,
    trig_interpolate,
    norm,
    aliasing_decomposition,
)
from .grf import GrfSpec, sample_grf, subsample, empirical_spectral_slope
from .fno import (
    FnoConfig,
    FnoParams,
    LayerTrace,
    ModeOverflowError,
    init_params,
    append_encoding,
    activation_apply,
    spectral_conv,
    forward,
)
from .analysis import (
    ErrorReport,
    DecompReport,
    relative_layer_error,
    convergence_experiment,
    fit_loglog_slope,
    state_norm_profile,
    error_components,
)
from .train import (
    Dataset,
    TrainConfig,
    SchedulerConfig,
    SchedulerState,
    History,
    make_dataset,
    loss_eval,
    forward_backward,
    train_loop,
    scheduler_step,
)

__all__ = [
    "GridField",
    "SpectralField",
    "SobolevParams",
    "GridNestingError",
    "RealnessError",
    "dft",
    "idft_on_grid",
    "trig_interpolate",
    "norm",
    "aliasing_decomposition",
    "GrfSpec",
    "sample_grf",
    "subsample",
    "empirical_spectral_slope",
    "FnoConfig",
    "FnoParams",
    "LayerTrace",
    "ModeOverflowError",
    "init_params",
    "append_encoding",
    "activation_apply",
    "spectral_conv",
    "forward",
    "ErrorReport",
    "DecompReport",
    "relative_layer_error",
    "convergence_experiment",
    "fit_loglog_slope",
    "state_norm_profile",
    "error_components",
    "Dataset",
    "TrainConfig",
    "SchedulerConfig",
    "SchedulerState",
    "History",
    "make_dataset",
    "loss_eval",
    "forward_backward",
    "train_loop",
    "scheduler_step",
]
