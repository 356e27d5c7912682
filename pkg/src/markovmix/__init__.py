"""Exact dependence coefficients and mixing-condition checks for finite Markov chains."""

__version__ = "0.1.0"

from .chain import (  # noqa: E402
    ChainModel,
    ChainPowers,
    JointDistribution,
    check_reversibility,
    check_structure,
    compute_stationary,
    find_small_set,
    joint_at_lag,
    load_chain,
    save_chain,
    validate_chain,
)
from .generators import (  # noqa: E402
    GeneratorSpec,
    estimate_chain,
    make_example_2_8,
    make_named,
    make_random_reversible,
    simulate_path,
)
from .mixing import (  # noqa: E402
    MixingProfile,
    alpha_coefficient,
    beta_coefficient,
    mixing_profile,
    rho_coefficient,
)
from .spectral import (  # noqa: E402
    R_of_subset,
    ScoreFunction,
    centered_indicator,
    doubling_diagnostics,
    r_of_centered_indicator,
    slem_and_gap,
)
from .verify import VerifyConfig, verify_chain  # noqa: E402
