"""Contact Dehn surgery on the geodesic flow of a genus-2 hyperbolic surface, checked numerically."""

from .hyperbolic import FuchsianSurface, build_genus2_surface
from .flowbox import SurgeryConfig, TwistProfile

__all__ = ["FuchsianSurface", "SurgeryConfig", "TwistProfile", "build_genus2_surface"]
__version__ = "0.1.0"
