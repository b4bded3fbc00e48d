"""Bergman-ball geometry, hypersurface densities, and sampling experiments."""

from .density import (DensityReport, Weight, averaged_potential,
                      averaged_potential_many, density_grid, density_sweep,
                      extrapolate_in_one_minus_r, local_density, theta_density,
                      upsilon)
from .errors import (ConfigError, CoverageError, DomainError, FDFailure,
                     FlatnessViolation, IntegrabilityError, QuadratureError,
                     SweepError, WeightError)
from .geometry import (HermitianForm, MobiusMap, QuadratureRule, as_point,
                       ball_rule, ball_volume, bergman_laplacian_fd,
                       bergman_metric, complex_hessian_fd, direction_design,
                       green, green_constant, green_gamma, green_radial_profile,
                       mobius_apply, pseudo_distance, quad_ball, volume_density)
from .hypersurface import (DefiningPolynomial, DistanceResult,
                           HypersurfaceSample, dist_to_W, flatness_profile,
                           point_divisor_sample, sample_W, tube_membership)
from .potential import (PotentialSample, gamma_r_kernel, gamma_r_profile,
                        s_r_green, s_r_potential, s_r_potential_many,
                        s_r_smooth, smoothing_bound_constant)
from .spaces import (ExtensionResult, FlatteningResult, RestrictionCheck,
                     RestrictionData, TruncatedSpace, build_space,
                     holomorphic_flattening, lattice_polynomial,
                     least_norm_extension, monomial_basis, monomial_matrix,
                     pseudohyperbolic_lattice, restriction,
                     restriction_inequality_check, sampling_constants,
                     seip_sweep, tube_quadrature, worst_extension_ratio)

__version__ = "0.1.0"
