"""Floating-point simulation of coupled MH chains on R^d and on finite spaces."""
from .coupled import (
    ACCEPTANCE_COUPLINGS, PROPOSAL_COUPLINGS, CouplingConfigError, CouplingSpec, coupled_proposals, coupled_step,
    coupled_step_batch, mh_step, mh_step_batch,
)
from .density import MhDensity, independent_spec, split_spec, two_step_density
from .finite import (
    FiniteCoupledSampler, FiniteCouplingSpec, algorithm1_empirical, algorithm1_stochastic,
    builtin_finite_couplings, finite_mh_step_batch,
)
from .meetings import CoupledTrajectory, MeetingResult, record_trajectory, simulate_finite_meetings, simulate_meetings
from .proposals import ProposalSpec
from .rng import SEED_ENV, default_seed, stream
from .split import (
    ContinuousSplit, FiniteSplitSampler, MinorizationError, SplitCouplingSpec, split_coupling_step, split_pbar,
    split_two_step_representation,
)
from .targets import TargetModel, check_gradient, funnel, gaussian, standard_normal, uniform_box
