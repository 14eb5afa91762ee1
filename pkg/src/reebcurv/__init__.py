"""reebcurv: compatible metrics on contact 3-manifold charts.

Builds compatible Riemannian metrics from contact forms and complex
structures, verifies their curvature identities against an independent
Levi-Civita oracle, prescribes the Ricci curvature of the Reeb field by
perturbing the complex structure (locally on flow boxes and almost-globally
on fibered charts), and certifies L2 convergence of the resulting metric
sequences.
"""

from .contact import (
    ABField,
    CompatibleMetric,
    ContactData,
    ExplicitMetric,
    FramePoint,
    MODEL_NAMES,
    build_compatible_metric,
    model_manifold,
    reeb_field,
    verify_contact,
)
from .curvature import (
    JacobiPath,
    Tolerances,
    alpha_jacobi_propagate,
    christoffel_oracle,
    covariant_reeb_derivative,
    curvature_grid,
    max_ricci_equivalence,
    pq_ricci,
    ricci_reeb_oracle,
    second_fundamental,
    sectional_oracle,
    sectional_via_jacobi,
)
from .exprlang import ExpressionError, parse_expression
from .fields import (
    CallableScalarField,
    ChartDomain,
    DerivativeDisagreement,
    ExprScalarField,
    FieldError,
    OneForm,
    OutsideDomainError,
    ScalarField,
    VectorField,
    evaluate_jet,
    exterior_derivative,
    integrate_density,
    lie_bracket,
)
from .jets import Jet2
from .metricspace import (
    SemiMetricField,
    clarke_bound,
    convergence_report,
    l2_inner,
    path_length_upper,
    volume,
)
from .realize import (
    AdmissibilityError,
    FlowBox,
    FlowJetField,
    MetricSequence,
    PerturbationField,
    RealizationError,
    RealizationSolution,
    SweepError,
    almost_global_realize,
    local_realize,
    perturb_complex_structure,
    ricci_perturbed_closed_form,
    sweep_lower_ricci,
)

__version__ = "0.1.0"
