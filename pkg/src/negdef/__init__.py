"""Proper negative definite length functions on groups of polynomial growth.

Exact Cayley balls, overlap functions of balls, their truncated sums and
numerical certificates for the properties those sums should have.
"""

__version__ = "0.1.0"

from .ball_enum import BallTable, cached_tables, enumerate_balls, load_table, save_table
from .construct import (
    ConstructionParams,
    LengthContext,
    LengthValue,
    build_context,
    combination_contexts,
    combined_ell,
    ell,
    omega,
    properness_threshold,
    select_k,
    select_parameters,
    tail_bound,
)
from .errors import *  # noqa: F401,F403
from .group_core import (
    DirectProduct,
    FreeAbelian,
    Group,
    Heisenberg3,
    Unitriangular,
    format_element,
    make_group,
    spec_from_dict,
)
from .growth import (
    GrowthFit,
    alpha_sequence,
    classify_E,
    classify_indices,
    density_report,
    fit_growth_exponent,
    growth_profile,
)
from .spectral import counting_by_rank, dirichlet_energy, heat_trace, spectral_counting, spectral_report
from .verify import (
    check_lemma_bounds,
    check_negative_definite_ell,
    check_positive_definite_omega,
    fit_sublevel_exponent,
    min_eig_sym,
    properness_scan,
    sublevel_counts,
)
