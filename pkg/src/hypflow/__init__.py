"""hypflow: locally constrained curvature flows of h-convex hypersurfaces
in hyperbolic space, with the quermassintegral bookkeeping that drives them.

Layers, bottom to top:

- ``symfunc``       normalized elementary symmetric functions and quotients
- ``grids``         spherical finite-difference grids (full lat-long, axisymmetric)
- ``hypersurface``  radial-graph geometry, quermassintegrals, shape generators
- ``conformal``     conformal image in the Euclidean ball model and its identities
- ``flow``          the constrained-flow integrator, monitors, residual checks
- ``stability``     deficit / sphere-distance experiments and the proof-trace check
- ``checks``        consolidated verification suite
- ``svgplot``       dependency-free SVG plots
- ``cli``           ``hypflow`` command-line entry point
"""

from .symfunc import (
    ConeViolationError,
    CurvatureSpectrum,
    cone_checks,
    esym_all,
    esym_eval,
    esym_grad,
    esym_hess,
    quotient_eval,
)
from .grids import AxisymGrid, FullSphereGrid
from .hypersurface import (
    DiscretizationError,
    EUCLIDEAN,
    GeometryFields,
    HYPERBOLIC,
    InradiusResult,
    RadialGraph,
    ShapeRejectionError,
    Warp,
    ball_profile,
    ball_profile_inverse,
    generate_shape,
    geodesic_distances,
    geometry_fields,
    hconvexity_margin,
    inradius,
    integrate,
    quermassintegrals,
    random_hconvex_shape,
    traceless_measures,
)
from .conformal import (
    AreaIdentityReport,
    ConformalImage,
    area_identity_check,
    conf_relation_residual,
    image_convexity_margin,
    radius_from_ball,
    radius_to_ball,
    to_ball,
)
from .flow import (
    FlowState,
    FlowTrace,
    FResidualReport,
    StepFailureError,
    VariationalReport,
    cfl_dt,
    normal_speed,
    pointwise_F_check,
    run,
    step,
    variational_check,
)
from .stability import (
    DeficitResult,
    InsufficientDataError,
    ProofTraceReport,
    SphereFit,
    SweepRecord,
    SweepResult,
    deficit,
    exponent_fit,
    proof_trace_check,
    sphere_fit,
    stability_sweep,
)
from .checks import CheckResult, run_verify

__version__ = "0.1.0"
