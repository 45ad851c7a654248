"""Truncated Wirtinger Flow for phase retrieval from intensity measurements."""

__version__ = "0.1.0"

from .measurement import (  # noqa: E402
    MeasurementEnsemble,
    dense_ensemble,
    sample_cdp_ensemble,
    sample_gaussian_ensemble,
)
from .metrics import align, dist, relative_error  # noqa: E402
from .noise import NoiseSpec, observe, relative_mse, snr, snr_db  # noqa: E402
from .solver import (  # noqa: E402
    Backtracking,
    FixedStep,
    SolverConfig,
    TruncationParams,
    solve_twf,
    solve_wf,
    validate_params,
)
from .spectral import InitConfig, spectral_init  # noqa: E402
