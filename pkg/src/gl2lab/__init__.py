"""gl2lab: exhaustive 2-adic GL2 image computations.

Subgroups of GL(2, Z/nZ) as concrete element sets; lifting kernels and full
lifts; degree-2^r isogeny transforms and isogeny-graph propagation; quadratic
twist orbits; modular-curve invariants (level, index, genus); a catalog of
named groups with conjugacy matching; and a deterministic JSON CLI.
"""

__version__ = "0.1.0"

from .residues import (  # noqa: F401
    Mat,
    ModulusMismatchError,
    NonInvertibleError,
    UnsupportedModulusError,
    crt_lift,
    format_matrix,
    identity,
    mat,
    mat_inv,
    mat_mul,
    minus_identity,
    parse_matrix,
    unit_order,
)
