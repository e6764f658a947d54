"""Exact two-step (proposal + acceptance) representations of Metropolis-Hastings kernel couplings."""
from .measure import (
    CouplingReport, Dist, HahnDecomposition, JointDist, MaximalityVerdict, NotACouplingError,
    SpaceMismatchError, StateSpace, SubDist, as_rational, build_maximal_coupling, check_coupling,
    format_rational, hahn_jordan, is_maximal_coupling, tv_distance,
)
from .kernels import (
    AcceptanceMatrix, FiniteKernel, MhProblem, barker_acceptance, check_joint_kernel_coupling,
    generate_P, mh_acceptance,
)
from .decomposition import (
    CAM, AcceptanceCoupling, Helpers, algorithm1_resampled_qbar, build_cam, check_theorem1_conditions,
    compute_helpers, decompose, discrete_specialization, extract_acceptance_coupling, regenerate_pbar,
    sample_frechet_coupling, verify_cam,
)
from .maximality import (
    MaximalityReport, build_maximal_kernel_coupling, certify_nonmax_example, check_max_conditions,
    hahn_set_for_kernels,
)

__version__ = "0.1.0"
