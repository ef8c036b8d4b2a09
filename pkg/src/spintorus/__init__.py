"""spintorus: Dirac operators, spin structures, and diffeomorphism lifts
on flat-chart tori."""

from .clifford import GammaSet, SpinElement, adjoint_rotation, build_gammas, spin_lift
from .diffeo import (
    AffineDiffeo,
    DiffeoAction,
    LiftedUnitary,
    SmoothShear,
    SpinLiftField,
    equivariance_residual,
    frame_rotation_field,
    lift_unitary,
    parse_diffeo,
    pullback_metric,
    pullback_spin_structure,
    spin_lift_field,
)
from .dirac import (
    DiracOperator,
    SpectrumResult,
    assemble_dirac,
    dirac_for_metric,
    plane_wave_spectrum,
    spectra_distance,
    spectrum,
)
from .fields import (
    BandLimitedSpinor,
    DiscreteSpinorField,
    SpinStructureLabel,
    equivalent_prolongation_unitary,
    inner_product,
    pointwise_density,
)
from .geometry import (
    ConnectionField,
    FrameField,
    GridSpec,
    MetricField,
    build_connection,
    christoffel_frame,
    discrete_derivative,
    levi_civita_oracle,
    orthonormal_frame,
    parse_metric,
    structure_constants,
)

__version__ = "0.1.0"
