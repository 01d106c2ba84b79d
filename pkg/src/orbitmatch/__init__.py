"""Shortest distance between multiple orbits, longest common substrings,
and the generalized-dimension / Renyi-entropy limit laws that govern them."""

from .dimension import (
    DimensionEstimate,
    RadiiLadder,
    centered_correlation_sum,
    estimate_Dk,
    ktuple_correlation_sum,
    theoretical_Dk,
)
from .distance import (
    EuclideanBox,
    OrbitSet,
    TorusWrap,
    count_close_tuples,
    exponent,
    kdiameter,
    observed_shortest_distance,
    pairwise_distance,
    shortest_distance_bruteforce,
    shortest_distance_fast,
)
from .dynamics import (
    AffineObservation,
    Beta,
    CoordinateProjection,
    Gauss,
    Identity,
    MTimesMod1,
    PiecewiseDoubling,
    PiecewiseLinear,
    SkewProduct,
    TorusExpanding,
    invariant_orbit,
    observe,
    orbit,
    random_orbit,
    sample_invariant,
    skew_2x_3x,
    step,
)
from .experiments import ExperimentConfig, ExperimentResult, run, theoretical_constant
from .matching import (
    BlockSubstitution,
    IdentityEncoder,
    LetterRepetition,
    ScrabbleSpec,
    apply_encoder,
    lcs_encoded,
    lcs_k_bruteforce,
    lcs_k_fast,
    lcs_ladder,
    lcs_limit_constant,
    scrabble_limit_constant,
    scrabble_matrix,
    scrabble_Vn,
)
from .reporting import config_from_dict, config_to_dict, load_config, report
from .symbolic import (
    CylinderTable,
    MarkovModel,
    SymbolSequence,
    bernoulli_renyi,
    cylinder_counts,
    empirical_renyi,
    perron_eigenvalue,
    renyi_entropy_markov,
    sample_markov,
    stationary_distribution,
)

__version__ = "0.1.0"
