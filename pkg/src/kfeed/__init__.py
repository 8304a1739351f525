"""Reinforcement learning from K-level episodic feedback (K-UCBVI)."""
from .errors import (CapacityError, ConfigurationError, GridParseError, KFeedError,
                     NumericError, StateError, SynthesisError)
from .feedback import (WeightBlocks, feedback_probabilities, mix_with_uniform_noise,
                       sample_feedback, sample_level, stack_features,
                       true_expected_reward)
from .gridworld import (GridSpec, GridState, extract_features, feature_table, grid_step,
                        label_table, load_grid, parse_grid_map, rule_based_label,
                        scripted_policy, synthesize_true_weights, to_tabular_mdp)
from .mdp import (TabularMdp, Trajectory, TrajectoryBatch, enumerate_trajectories,
                  random_mdp, sample_trajectories, sample_trajectory, sample_transition)
from .mle import (ConfidenceConstants, FeedbackDataset, SolverConfig, design_matrix_sigma,
                  fit_mle, min_eigenvalue, negative_log_likelihood, nll_gradient,
                  practical_confidence_width, project_to_ball, theoretical_confidence_width,
                  weight_confidence_radius)
from .optimism import OptimisticRewardSpec, estimated_reward, optimistic_reward
from .oracle import exact_policy_gradient, exact_value, finite_difference
from .policy import (PlannerConfig, action_probabilities, log_policy_gradient,
                     optimize_policy, policy_value_estimate, reinforce_gradient)

__version__ = "0.1.0"
