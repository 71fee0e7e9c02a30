"""Monte Carlo laboratory for Brownian motion among heavy-tailed soft traps."""

from .bounds import BoundSet, theoretical_bounds
from .config import ConfigError, parse_config, parse_config_text
from .field import (
    FIELD_FORMAT_VERSION,
    PotentialEvaluator,
    Trap,
    TrapField,
    add_trap,
    auto_r_max,
    band_poisson_mean,
    empty_field,
    expected_excess_traps,
    load_field,
    overlap_count,
    potential,
    potential_batch,
    potential_brute,
    replace_band,
    sample_field,
    save_field,
)
from .geometry import BALL, DEFAULT_XI_GRID, HYPERPLANE, Geometry, default_window
from .io import DATA_FORMAT_VERSION
from .lab import (
    AlphaPoint,
    BandResampleResult,
    ExponentFit,
    SweepConfig,
    SweepRecord,
    alpha_curve,
    band_resample_experiment,
    fit_exponent,
    modified_vs_raw,
    run_sweep,
)
from .params import MODIFIED, RAW, ModelParams, PotentialSpec, ValidationError
from .seeds import derive_seed
from .smc import (
    SmcFailure,
    SmcResult,
    count_visited_cubes,
    mu_event_estimates,
    smc_run,
    visited_cubes_tail,
    weighted_quantile,
)

__version__ = "0.1.0"
