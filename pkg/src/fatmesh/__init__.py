"""Fat triangulations: quality metrics, collars, transversal merging and
piecewise quasiconformal maps."""

__version__ = "0.1.0"

from .complex import Complex, ComplexError, SubcomplexRef, validate
from .metrics import complex_fatness, fatness, fatness_of_points, simplex_diameter, simplex_volume
from .collar import CollarSpec, build_prism_complex, choose_n0, collar_regions
from .transversal import (TransversalityConfig, displacement_schedule, is_delta_transverse,
                          perturb_vertex_for_transversality)
from .cells import intersect_simplices, subdivide_cell_fat
from .merge import (ExtendConfig, MergeConfig, MergeError, extend_boundary_triangulation,
                    extend_with_report, merge_fat_triangulations)
from .alexander import (build_alexander_map, chessboard_color, estimate_dilatation,
                        radial_stretch)
from .io import read_mesh, write_mesh

__all__ = [
    "Complex", "ComplexError", "SubcomplexRef", "validate",
    "complex_fatness", "fatness", "fatness_of_points", "simplex_diameter", "simplex_volume",
    "CollarSpec", "build_prism_complex", "choose_n0", "collar_regions",
    "TransversalityConfig", "displacement_schedule", "is_delta_transverse",
    "perturb_vertex_for_transversality",
    "intersect_simplices", "subdivide_cell_fat",
    "ExtendConfig", "MergeConfig", "MergeError", "extend_boundary_triangulation",
    "extend_with_report", "merge_fat_triangulations",
    "build_alexander_map", "chessboard_color", "estimate_dilatation", "radial_stretch",
    "read_mesh", "write_mesh",
]
