"""Simulation and numerical bounds for many-server FCFS queues under
square-root staffing: stochastic-comparison bounding systems, the
renewal-theoretic Gaussian limit process, diffusion building blocks, and the
classical closed-form special cases used as oracles."""

__version__ = "0.1.0"

from .distributions import (  # noqa: F401
    Deterministic,
    Distribution,
    DistributionError,
    Erlang,
    Exponential,
    H2Star,
    HyperExponential,
    LogNormal,
    Moments,
    Uniform,
    from_config,
    to_config,
)
from .estimates import BoundEstimate  # noqa: F401
from .queue_sim import (  # noqa: F401
    ConfigError,
    FeasibilityError,
    HwConfig,
    QueueTrace,
    StabilityError,
    erlang_c,
    estimate_delay_prob,
    estimate_idle_tail,
    hw_rate,
    simulate_queue,
)
from .bounding import (  # noqa: F401
    BoundQuery,
    PhiValue,
    RenewalPathBundle,
    breakdown_bound_value,
    busy_system_path,
    coupled_dominance_check,
    make_bundle,
    phi,
    theorem4_bound,
)
from .renewal import (  # noqa: F401
    RenewalConstants,
    equilibrium_cov,
    f_function,
    renewal_constants,
    renewal_function,
    simulate_renewal,
)
from .gaussian_limit import (  # noqa: F401
    CovarianceGrid,
    LimitEventQuery,
    build_Z_cov,
    corollary_bound,
    estimate_limit_event,
    sample_Z,
    verify_slepian_domination,
    w_cov,
)
from .reference_limits import (  # noqa: F401
    ScalingConstants,
    alpha,
    gid_limit_mc,
    h2star_limits,
    mginf_bound,
    scaling_constants,
)
