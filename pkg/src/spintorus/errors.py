"""Exception types shared across the package."""


class SpinTorusError(Exception):
    """Base class for all spintorus errors."""


class DimensionError(SpinTorusError):
    """Spatial dimension outside the supported range."""


class GridError(SpinTorusError):
    """Invalid grid resolution, scheme, or off-lattice data."""


class GeometryError(SpinTorusError):
    """Metric or frame data violating positivity/orientation requirements."""


class NotSpinElementError(SpinTorusError):
    """Matrix whose adjoint action does not preserve the gamma span."""


class NonOrthogonalError(SpinTorusError):
    """Rotation input that is not orthogonal within tolerance."""


class OrientationError(SpinTorusError):
    """Orientation-reversing map where only Diff+ is supported."""


class SpinStructureMismatchError(SpinTorusError):
    """Operation mixing spinor fields with different twist labels."""


class RefinementNeededError(SpinTorusError):
    """Sign continuation hit an ambiguous edge; the grid is too coarse."""


class InconsistentFramesError(SpinTorusError):
    """Frame rotation field fails its orthogonality identity."""


class UnsupportedExactnessError(SpinTorusError):
    """Operation that would silently interpolate without being asked to."""


class WiringError(SpinTorusError):
    """Operators and lift maps combined with mismatched labels or grids."""


class SizeCapError(SpinTorusError):
    """Dense materialization larger than the configured cap."""


class ConfigError(SpinTorusError):
    """Malformed configuration file, flag, or descriptor."""
