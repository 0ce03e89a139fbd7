"""Simulation laboratory for the orthant and half-orthant percolation models."""

__version__ = "0.1.0"

from .lattice import (
    GENERATOR_ID,
    Direction,
    FlippedField,
    ModelKind,
    SiteField,
    all_directions,
    flip,
    out_neighbors,
    sample_site,
    subseed,
)
from .geometry import Cone, Slab, Window, cone_boundary, cone_contains, \
    cone_outer_boundary, parse_eta, slab_contains
from .reach import (
    ProfileValue,
    ReachResult,
    beta,
    escapes_cone,
    filled_cluster,
    forward_cluster,
    l_profile,
)
from .explore import (
    ExplorationTrace,
    InfluenceEstimate,
    influence,
    osss_check,
    revealment_profile,
    run_tree,
    russo_check,
)
from .oracle import ThetaPolynomial, enumerate_theta, exact_influences, \
    exact_revealments
from .estimators import (
    CriticalEstimate,
    DecayFit,
    ShapeEstimate,
    ThetaCurve,
    estimate_gamma,
    estimate_pc,
    estimate_ptilde,
    estimate_theta,
    fit_decay,
    shape_cloud,
)
from .walk import WalkPath, WalkStats, ballisticity_report, walk
from .errors import (
    BracketFailure,
    ConfigError,
    EnumerationTooLarge,
    InsufficientData,
    OrthantLabError,
    RoundCapExceeded,
    TruncationDominated,
)
