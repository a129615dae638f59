from .domains import (
    Domain, DomainError, VertexError, KINDS, halfspace, block_cone, kp_cone, hong_cone,
    product_cone, perturbed_graph, implicit, rescale, make_domain,
)
from .quadrature import sphere_area, ball_volume, sphere_quadrature
from .sampling import (
    BoundarySamples, EmptyWindowError, MeasureEstimate, sample_boundary, surface_measure,
)
from .flatness import (
    BoundaryPatch, CorkscrewWitness, FlatnessReport, Plane, best_plane, beta_number,
    check_corkscrew, corkscrew_constant, flatness_theta,
)

__all__ = [name for name in dir() if not name.startswith("_")]
