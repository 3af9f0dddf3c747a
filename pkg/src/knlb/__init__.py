"""Random kernel matrix norms, polynomial approximants, and KRR bias.

A numerical library plus CLI harness for desk-scale experiments with
inner-product kernel matrices on high-dimensional data: orthogonal
polynomial bases, seeded sampling, matrix assembly, spectral norms,
norm-bound terms, low-degree approximants, and ridge regression bias.
"""

from .bounds import (
    BoundReport,
    DecouplingResult,
    GaussianSampler,
    GegenbauerModel,
    HermiteModel,
    ProfileModel,
    SphereSampler,
    decoupling_ratio,
    effective_dims,
    lower_bound_terms,
    upper_bound_report,
)
from .experiments import ExperimentConfig, RunResult, SlopeFit, fit_loglog, run
from .kernels import KernelFunction, exp_kernel, poly_kernel, power_kernel, softplus_kernel
from .krr import (
    BiasResult,
    RidgeProblem,
    TargetFunction,
    closed_form_bias,
    krr_predict,
    make_problem,
    mc_bias,
    mc_moment_matrices,
    single_index_target,
)
from .matrices import (
    SymMatrix,
    band_degrees,
    decoupled_offdiag_matrix,
    gegenbauer_offdiag_matrix,
    hermite_band_approximant,
    hermite_conditional_mean,
    hermite_correlation_matrix,
    hermite_offdiag_matrix,
    hermite_pair_correlation,
    kernel_matrix,
    mc_correlation_matrix,
    polar_sphere_approximant,
)
from .orthopoly import (
    CoeffTable,
    GegenbauerBasis,
    HermiteTable,
    gaussian_moment,
    hermite_scaling_coeffs,
    hermite_value,
    monomial_gegenbauer_coeffs,
    monomial_hermite_coeffs,
    sph_harm_dim,
)
from .sampling import (
    CovarianceSpec,
    DataMatrix,
    PolarPair,
    polar_decompose,
    sample_gaussian,
    sample_sphere,
    substream_seed,
)
from .spectral import diag_part, frobenius, jacobi_eigenvalues, min_eig, offdiag, op_norm

__version__ = "0.1.0"
