"""Model-based diffusion: score-free sampling optimizers for black-box and trajectory problems."""

from .baselines import CemConfig, MppiConfig, Softmax, TopK, run_cem, run_mppi
from .core import (AllRejectedError, BackwardKind, Candidate, DiffusionTrace, MbdConfig,
                   estimate_score, mcsa_step, reverse_sde_step, run_mbd,
                   sample_candidates, weighted_mean)
from .demos import (Demonstration, NoPathFoundError, RrtConfig, demo_log_weight,
                    mixed_log_weight, path_to_demonstration, rrt_plan)
from .dynamics import (TASKS, DynamicsModel, Integrator, TaskSpec, car2d_umaze,
                       cartpole_swingup, double_integrator_2d, pendulum_swingup)
from .idx import IdxError, load_idx
from .kernels import BACKEND
from .objectives import (ObjectiveProblem, ackley, mlp_classification_objective,
                         rastrigin, spiral_dataset, synthetic_multimodal_1d)
from .schedule import IndexConvention, NoiseSchedule, make_linear_schedule, sampling_params
from .trajopt import (HARD, ConstraintMode, NonFiniteStateError, Trajectory,
                      TrajOptConfig, penalty, rollout, run_mbd_trajopt, traj_log_weight)

__version__ = "0.1.0"
