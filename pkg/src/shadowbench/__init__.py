"""Simplex shadows, polytope sections and random-matrix conditioning at desk scale."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetError,
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DegenerateSpanError,
    ExactOverflowError,
    InfeasibleError,
    InputError,
    PreconditionError,
    RankDeficiencyError,
    ShadowbenchError,
    UnboundedError,
    UnsupportedFormError,
)
from .numerics import RngStream, SingularValueReport, batched_singular_values, exact_integer_det, singular_values  # noqa: E402
from .geometry import (  # noqa: E402
    HPolytope,
    Plane,
    Polygon2D,
    VPolytope,
    enumerate_facets,
    graph_diameter,
    perimeter,
    plane_from_span,
    polar_of_H,
    section_polygon,
    vertex_edge_graph,
)
from .simplex import (  # noqa: E402
    BlandRule,
    DantzigRule,
    GreatestImprovementRule,
    GreedyRule,
    LinearProgram,
    VertexBasis,
    WalkRecord,
    find_initial_vertex,
    solve_with_rule,
)
from .shadow import ShadowVertexRule, shadow_path, shadow_sweep_count  # noqa: E402
from .ensembles import (  # noqa: E402
    KleeMintySpec,
    MatrixEnsembleSpec,
    SmoothedPolytopeSpec,
    haimovich_flip,
    klee_minty,
    sample_smoothed_polytope,
)
