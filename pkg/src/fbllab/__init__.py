"""fbllab: free p-convex Banach lattice norms, numerically.

A laboratory for the norms that define free p-convex Banach lattices over
finite-dimensional normed spaces: weak q-summing norms, (p, q)-summing
norms of lattice expressions with brute-force oracles, AM sup-norms,
lattice-homomorphism extensions into l_p^n, disjointification,
parametric-convexity checks, and Pietsch-style domination certificates
built by linear programming.
"""

from .spaces import (DimensionMismatchError, Polytope, SpaceError, SpaceModel,
                     WeightedLp, ball_extreme_points, dual_norm,
                     dual_norm_batch, lp_space, norm, norm_batch,
                     norming_functional, norming_point, pairing,
                     polytope_space, space_from_json, space_to_json,
                     sphere_sample, weak_q_norm)
from .expressions import (Abs, Add, CanonicalForm, CalculusDomainError,
                          ExprError, ExprParseError, Gen, Inf, LatticeExpr,
                          PowSum, PowSumNotLatticeLinearError, Scale, Sup,
                          UnboundIdentifierError, apply_calculus,
                          canonical_form, collect_generators, evaluate,
                          parse_expr, powsum_reduce, random_expression,
                          random_lattice_linear)
from .summing import (FunctionalTuple, InclusionHypothesisError, NormEstimate,
                      PQOrderError, SearchConfig, ZeroExpressionError,
                      cotype_ratio_experiment, divergence_exponent,
                      inclusion_check, pq_norm_bruteforce, pq_norm_lower,
                      sup_norm, tuple_score)
from .extensions import (DConvexityReport, ExtensionBoundReport, LpExtension,
                         apply_hom, dconvexity_check, disjointify,
                         extend_to_lp, lp_target_norm, verify_extension_bound)
from .simplex import (InfeasibleError, LpError, LpProblem, LpSolution,
                      UnboundedError, lp_solve)
from .domination import (CertificateReport, DegenerateGridError,
                         DominationCertificate, attach_upper, f_mu_expression,
                         pietsch_certificate, verify_certificate)

__version__ = "0.1.0"
