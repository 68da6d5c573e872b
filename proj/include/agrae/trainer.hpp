#pragma once

// Desk-scale RLVR loop over an ensemble of softmax-bandit queries.
//
// Each step: sample G responses per query from the frozen rollout policy,
// reward them by correct-set membership, compute omega_s over the whole
// batch, estimate advantages with the configured variant, then take
// `minibatch_passes` ascent steps on the clipped surrogate.
//
// Queries are independent apart from the omega_s reduction, so the per-query
// loops come in two flavours: an OpenMP kernel (train_step) and a serial
// reference (train_step_serial). Random streams are derived from
// (seed, step, query) so both produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "agrae/advantage.hpp"
#include "agrae/behavior_space.hpp"

namespace agrae {

struct DifficultyScheme {
  std::size_t correct_per_query = 4;
  // Initial success probabilities are spread linearly over [q_min, q_max].
  double q_min = 0.02;
  double q_max = 0.9;
  // Std-dev of Gaussian jitter on the initial logits.
  double logit_noise = 0.5;
};

struct ExperimentConfig {
  std::size_t num_queries = 64;
  std::size_t num_behaviors = 64;
  std::size_t group_size = 8;
  std::size_t steps = 500;
  double eta = 0.05;
  Estimator estimator;
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  std::size_t minibatch_passes = 1;
  std::uint64_t seed = 0;
  DifficultyScheme difficulty;
  double collapse_factor = 3.0;
  // Pass@k evaluation of the initial and final ensembles; 0 disables it.
  std::size_t eval_samples = 256;
  std::vector<std::int64_t> eval_k{1, 2, 4, 8, 16, 32, 64, 128, 256};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  double omega_s = 0.0;
  double mean_entropy = 0.0;
  std::size_t correct_count = 0;
  std::size_t unsolved_count = 0;
  double greedy_accuracy = 0.0;
};

struct QueryRollout {
  std::vector<std::size_t> indices;
  std::vector<double> rollout_probs;  // pi_old at each sampled index
  RewardGroup rewards;
  AdvantageVector advantages;
};

struct StepOutcome {
  StepMetrics metrics;
  std::vector<QueryRollout> rollouts;
};

using Ensemble = std::vector<BehaviorSpace>;

Ensemble make_ensemble(const ExperimentConfig& config);

// (1/G) sum_k min(rho_k A_k, clip(rho_k, 1-eps, 1+eps) A_k)
//   - kl_beta (1/N) sum_i [ref_i/pi_i - log(ref_i/pi_i) - 1]
// with rho_k = pi(indices[k]) / rollout_probs[k]. Throws on a non-positive
// rollout probability.
double surrogate_loss(const BehaviorSpace& space, std::span<const double> rollout_probs,
                      const SampledGroupAssignment& assignment, double clip_epsilon,
                      double kl_beta);

// Exact gradient of surrogate_loss with respect to the logits.
std::vector<double> surrogate_gradient(const BehaviorSpace& space,
                                       std::span<const double> rollout_probs,
                                       const SampledGroupAssignment& assignment,
                                       double clip_epsilon, double kl_beta);

// Advances `ensemble` by one step and sets state.step / state.omega_s.
StepOutcome train_step(Ensemble& ensemble, const ExperimentConfig& config, TrainState& state);
StepOutcome train_step_serial(Ensemble& ensemble, const ExperimentConfig& config,
                              TrainState& state);

struct ExperimentResult {
  std::vector<StepMetrics> metrics;
  Ensemble initial;
  Ensemble final_ensemble;
  // First step at which unsolved_count exceeds collapse_factor times its
  // step-10 value (floored at 1).
  std::optional<std::size_t> collapse_step;
};

// First step whose unsolved_count exceeds factor * max(step-10 value, 1);
// nothing before step 10 can flag.
std::optional<std::size_t> detect_collapse(std::span<const StepMetrics> metrics, double factor);

ExperimentResult run_experiment(const ExperimentConfig& config, bool parallel = true);

// Mean Pass@k over queries from n fresh samples each, one entry per k.
std::vector<double> evaluate_passk(const Ensemble& ensemble, std::size_t n,
                                   std::span<const std::int64_t> k_grid, std::uint64_t seed);

}  // namespace agrae
