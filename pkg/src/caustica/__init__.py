"""caustica: a numerical laboratory for convex planar billiards.

Exact elliptic-billiard structure (confocal caustics, action-angle charts),
Lazutkin coordinates, deformed Fourier modes, maximal-perimeter polygon
variational machinery, best-ellipse fitting and a verification harness with
pinned tolerances.
"""

from .action_angle import (
    AAChart,
    ConfocalCaustic,
    EllipticCoordsPoint,
    build_chart,
    caustic_from_rotation_number,
    elliptic_integral,
    elliptical_coords,
    first_integral,
    get_chart,
)
from .dynamics import (
    LazPoint,
    PhasePoint,
    billiard_step,
    from_lazutkin,
    lazutkin_step,
    rotation_number,
    to_lazutkin,
)
from .experiments import ExperimentConfig, Report, run_experiment
from .geometry import (
    Boundary,
    BoundarySpec,
    CurveSample,
    EllipsePose,
    PerturbationSeries,
    boundary_point,
    ellipse_geometry,
    lazutkin_chart,
    reexpress,
)
from .modes import (
    FitResult,
    GramReport,
    ModeTable,
    base_modes,
    deformed_mode,
    ellipse_from_coeffs,
    fit_ellipse,
    five_mode_projection,
    operator_report,
    tilde_coefficients,
    weighted_inner_product,
)
from .variational import (
    DefectReport,
    InscribedPolygon,
    deformation_function,
    integrability_scan,
    max_perimeter_polygon,
    perimeter_defect,
    perimeter_functions,
    pseudo_orbit_diagnostics,
)

__version__ = "0.1.0"
