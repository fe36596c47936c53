"""Classical layer: geometry, Hamiltonian flows, orbits and pointwise coefficients."""
from .geometry import ChartPoint, ModelGeometry, SPHERE_RADIUS
from .hamiltonian import Hamiltonian, parse_preset, perturbed, product, radial, rotation
from .flow import (FlowIntegrationError, FlowOptions, FlowResult, RechartRequired,
                   TangentData, hamiltonian_vector_field, integrate_batch, integrate_flow)
from .orbits import (CriticalLevelError, OpenLoopError, OrbitOptions, OrbitRecord,
                     find_periodic_orbits, liouville_volume, prequantum_action,
                     stability_determinant)
from .structure import (BranchTrackingError, SingularProjectorError, canonical_transport,
                        local_model, mu_coefficient, oblique_projectors,
                        pushforward_complex_structure)
