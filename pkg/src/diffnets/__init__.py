"""Nonlinear diffusion schemes as stable residual networks, and FAS multigrid for EED inpainting."""
from .errors import (
    ConfigurationError,
    DimensionError,
    FormatError,
    NumericalError,
    SolverError,
    UnsupportedKindError,
)
from .flux import (
    FluxFunction,
    FluxKind,
    Penaliser,
    diffusivity_eval,
    flux_derivative,
    flux_eval,
    lipschitz_constant,
    penaliser_eval,
)
from .inpainting import (
    GridHierarchy,
    InpaintingProblem,
    SolverState,
    TensorField,
    cg_reference_solve,
    eed_residual,
    eed_tensor,
    fas_two_grid,
    fmg_solve,
    prolong,
    residual_norm,
    restrict_image,
    restrict_mask,
    smooth,
    v_cycle,
)
from .networks import (
    Arch,
    BlockParams,
    ForwardTape,
    NetworkParams,
    NetworkSpec,
    Sharing,
    backward,
    count_parameters,
    diffusion_block_forward,
    network_forward,
    standard_resblock_forward,
)
from .schemes import (
    SchemeConfig,
    StabilityMode,
    StabilityReport,
    df_multistep_eigenvalues,
    dufort_frankel_step,
    energy_eval,
    explicit_step,
    fsi_cycle,
    gershgorin_rescale,
    implicit_fixed_point,
    stability_bound,
)
from .signal import (
    DenseOperator,
    Image2D,
    KernelBank,
    SignalBundle,
    conv_adjoint_apply,
    conv_apply,
    dense_operator_of,
    spectral_norm,
)
from .training import (
    AdamState,
    DatasetConfig,
    TrainConfig,
    adam_step,
    classical_baselines,
    generate_dataset,
    mse,
    project_constraints,
    psnr,
    temporal_penalty,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Arch",
    "BlockParams",
    "ConfigurationError",
    "DatasetConfig",
    "DenseOperator",
    "DimensionError",
    "FluxFunction",
    "FluxKind",
    "FormatError",
    "ForwardTape",
    "GridHierarchy",
    "Image2D",
    "InpaintingProblem",
    "KernelBank",
    "NetworkParams",
    "NetworkSpec",
    "NumericalError",
    "Penaliser",
    "SchemeConfig",
    "Sharing",
    "SignalBundle",
    "SolverError",
    "SolverState",
    "StabilityMode",
    "StabilityReport",
    "TensorField",
    "TrainConfig",
    "UnsupportedKindError",
    "adam_step",
    "backward",
    "cg_reference_solve",
    "classical_baselines",
    "conv_adjoint_apply",
    "conv_apply",
    "count_parameters",
    "dense_operator_of",
    "df_multistep_eigenvalues",
    "diffusion_block_forward",
    "diffusivity_eval",
    "dufort_frankel_step",
    "eed_residual",
    "eed_tensor",
    "energy_eval",
    "explicit_step",
    "fas_two_grid",
    "flux_derivative",
    "flux_eval",
    "fmg_solve",
    "fsi_cycle",
    "generate_dataset",
    "gershgorin_rescale",
    "implicit_fixed_point",
    "lipschitz_constant",
    "mse",
    "network_forward",
    "penaliser_eval",
    "project_constraints",
    "prolong",
    "psnr",
    "residual_norm",
    "restrict_image",
    "restrict_mask",
    "smooth",
    "spectral_norm",
    "stability_bound",
    "standard_resblock_forward",
    "temporal_penalty",
    "train",
    "v_cycle",
]
