#include "agrae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>

#include "agrae/passk.hpp"

namespace agrae {

namespace {

constexpr std::uint64_t kInitDomain = 0x1a17;
constexpr std::uint64_t kRolloutDomain = 0x2b28;
constexpr std::uint64_t kEvalDomain = 0x3c39;

Rng stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t a, std::uint64_t b) {
  return Rng(mix_seed(mix_seed(mix_seed(seed, domain), a), b));
}

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

void check_rollout(const BehaviorSpace& space, std::span<const double> rollout_probs,
                   const SampledGroupAssignment& a) {
  if (rollout_probs.size() != a.indices.size() || a.advantages.values.size() != a.indices.size())
    throw std::invalid_argument("surrogate: rollout, indices and advantages must align");
  for (double p : rollout_probs)
    if (!(p > 0.0)) throw std::invalid_argument("surrogate: rollout probability must be > 0");
  for (std::size_t i : a.indices)
    if (i >= space.size()) throw std::invalid_argument("surrogate: sampled index out of range");
}

QueryRollout rollout_query(const BehaviorSpace& space, const ExperimentConfig& cfg,
                           std::size_t step, std::size_t query) {
  Rng rng = stream(cfg.seed, kRolloutDomain, step, query);
  QueryRollout r;
  r.indices = sample_group(space, cfg.group_size, rng);
  const std::vector<double> pi = space.probabilities();
  r.rollout_probs.reserve(r.indices.size());
  r.rewards.rewards.reserve(r.indices.size());
  for (std::size_t i : r.indices) {
    r.rollout_probs.push_back(pi[i]);
    r.rewards.rewards.push_back(space.is_correct(i) ? 1.0 : 0.0);
  }
  return r;
}

void update_query(BehaviorSpace& space, QueryRollout& r, const ExperimentConfig& cfg,
                  double omega_s) {
  r.advantages = estimate(r.rewards, cfg.estimator, omega_s);
  const SampledGroupAssignment assignment{r.indices, r.advantages};
  // The surrogate averages over the group; scaling the step by G makes the
  // first pass equal eta times the summed per-group logit field.
  const double step = cfg.eta * static_cast<double>(cfg.group_size);
  for (std::size_t pass = 0; pass < cfg.minibatch_passes; ++pass) {
    const std::vector<double> grad = surrogate_gradient(space, r.rollout_probs, assignment,
                                                        cfg.clip_epsilon, cfg.kl_beta);
    space.update(grad, step);
  }
}

StepMetrics collect_metrics(const Ensemble& ensemble, const std::vector<QueryRollout>& rollouts,
                            std::size_t step, double omega_s) {
  StepMetrics m;
  m.step = step;
  m.omega_s = omega_s;
  std::size_t greedy_hits = 0;
  for (std::size_t q = 0; q < ensemble.size(); ++q) {
    m.mean_entropy += entropy(ensemble[q]);
    std::size_t correct = 0;
    for (double r : rollouts[q].rewards.rewards) correct += r == 1.0 ? 1 : 0;
    m.correct_count += correct;
    if (correct == 0) ++m.unsolved_count;
    if (ensemble[q].is_correct(greedy_behavior(ensemble[q]))) ++greedy_hits;
  }
  const auto nq = static_cast<double>(ensemble.size());
  m.mean_entropy /= nq;
  m.greedy_accuracy = static_cast<double>(greedy_hits) / nq;
  return m;
}

std::vector<RewardGroup> reward_groups(const std::vector<QueryRollout>& rollouts) {
  std::vector<RewardGroup> groups;
  groups.reserve(rollouts.size());
  for (const auto& r : rollouts) groups.push_back(r.rewards);
  return groups;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(num_queries >= 1, "num_queries", "must be >= 1");
  require(num_behaviors >= 2, "num_behaviors", "must be >= 2");
  require(group_size >= 1, "group_size", "must be >= 1");
  require(eta > 0.0 && std::isfinite(eta), "eta", "must be > 0");
  require(clip_epsilon > 0.0 && clip_epsilon < 1.0, "clip_epsilon", "must lie in (0,1)");
  require(kl_beta >= 0.0, "kl_beta", "must be >= 0");
  require(minibatch_passes >= 1, "minibatch_passes", "must be >= 1");
  require(estimator.beta > 1.0, "beta", "must be > 1");
  require(estimator.gamma > 0.0, "gamma", "must be > 0");
  require(estimator.alpha > 0.0 && estimator.alpha <= 1.0, "alpha", "must lie in (0,1]");
  require(difficulty.correct_per_query <= num_behaviors, "difficulty.correct_per_query",
          "must be <= num_behaviors");
  require(difficulty.q_min > 0.0 && difficulty.q_min < 1.0, "difficulty.q_min",
          "must lie in (0,1)");
  require(difficulty.q_max > 0.0 && difficulty.q_max < 1.0, "difficulty.q_max",
          "must lie in (0,1)");
  require(difficulty.q_min <= difficulty.q_max, "difficulty.q_min", "must be <= q_max");
  require(difficulty.logit_noise >= 0.0, "difficulty.logit_noise", "must be >= 0");
  require(collapse_factor > 0.0, "collapse_factor", "must be > 0");
  for (std::int64_t k : eval_k) {
    require(k >= 1, "eval_k", "entries must be >= 1");
    require(eval_samples == 0 || static_cast<std::size_t>(k) <= eval_samples, "eval_k",
            "entries must be <= eval_samples");
  }
}

Ensemble make_ensemble(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.num_behaviors;
  const std::size_t k = cfg.difficulty.correct_per_query;
  Ensemble out;
  out.reserve(cfg.num_queries);
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    Rng rng = stream(cfg.seed, kInitDomain, 0, q);
    std::vector<double> logits(n);
    for (double& h : logits) h = cfg.difficulty.logit_noise * standard_normal(rng);

    // Partial Fisher-Yates for the correct set.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - i));
      std::swap(perm[i], perm[std::min(j, n - 1)]);
    }
    std::vector<std::size_t> correct(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));

    if (k > 0 && k < n) {
      const double frac = cfg.num_queries == 1
                              ? 0.0
                              : static_cast<double>(q) / static_cast<double>(cfg.num_queries - 1);
      const double target = cfg.difficulty.q_min + frac * (cfg.difficulty.q_max - cfg.difficulty.q_min);
      std::vector<char> mark(n, 0);
      for (std::size_t i : correct) mark[i] = 1;
      double s_correct = 0.0, s_wrong = 0.0;
      for (std::size_t i = 0; i < n; ++i) (mark[i] ? s_correct : s_wrong) += std::exp(logits[i]);
      const double offset = std::log(target * s_wrong / ((1.0 - target) * s_correct));
      for (std::size_t i : correct) logits[i] += offset;
    }
    out.emplace_back(std::move(logits), std::move(correct));
  }
  return out;
}

double surrogate_loss(const BehaviorSpace& space, std::span<const double> rollout_probs,
                      const SampledGroupAssignment& a, double clip_epsilon, double kl_beta) {
  check_rollout(space, rollout_probs, a);
  const std::vector<double> logp = space.log_probabilities();
  const std::vector<double> pi = space.probabilities();
  double policy = 0.0;
  for (std::size_t k = 0; k < a.indices.size(); ++k) {
    const double adv = a.advantages.values[k];
    const double rho = pi[a.indices[k]] / rollout_probs[k];
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    policy += std::min(rho * adv, clipped * adv);
  }
  if (!a.indices.empty()) policy /= static_cast<double>(a.indices.size());

  double kl = 0.0;
  if (kl_beta > 0.0) {
    const std::vector<double> ref_logp = log_softmax(space.ref_logits());
    for (std::size_t i = 0; i < logp.size(); ++i) {
      const double log_x = ref_logp[i] - logp[i];
      kl += std::exp(log_x) - log_x - 1.0;
    }
    kl /= static_cast<double>(logp.size());
  }
  return policy - kl_beta * kl;
}

std::vector<double> surrogate_gradient(const BehaviorSpace& space,
                                       std::span<const double> rollout_probs,
                                       const SampledGroupAssignment& a, double clip_epsilon,
                                       double kl_beta) {
  check_rollout(space, rollout_probs, a);
  const std::size_t n = space.size();
  const std::vector<double> logp = space.log_probabilities();
  const std::vector<double> pi = space.probabilities();
  std::vector<double> grad(n, 0.0);

  // d/dh of rho_k A_k is rho_k A_k (e_k - pi); the clipped branch is flat.
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < a.indices.size(); ++k) {
    const double adv = a.advantages.values[k];
    const double rho = pi[a.indices[k]] / rollout_probs[k];
    const double clipped = std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    if (rho * adv <= clipped * adv) {
      const double w = rho * adv;
      grad[a.indices[k]] += w;
      weight_sum += w;
    }
  }
  for (std::size_t i = 0; i < n; ++i) grad[i] -= weight_sum * pi[i];
  if (!a.indices.empty()) {
    const double inv_g = 1.0 / static_cast<double>(a.indices.size());
    for (double& g : grad) g *= inv_g;
  }

  if (kl_beta > 0.0) {
    // d/dh_j of (x_i - log x_i - 1), x_i = ref_i / pi_i, is (1 - x_i)(delta_ij - pi_j).
    const std::vector<double> ref_logp = log_softmax(space.ref_logits());
    std::vector<double> one_minus_x(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      one_minus_x[i] = 1.0 - std::exp(ref_logp[i] - logp[i]);
      total += one_minus_x[i];
    }
    const double scale = kl_beta / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) grad[j] -= scale * (one_minus_x[j] - pi[j] * total);
  }
  return grad;
}

StepOutcome train_step_serial(Ensemble& ensemble, const ExperimentConfig& cfg, TrainState& state) {
  const std::size_t nq = ensemble.size();
  std::vector<QueryRollout> rollouts(nq);
  for (std::size_t q = 0; q < nq; ++q) rollouts[q] = rollout_query(ensemble[q], cfg, state.step, q);

  const double omega = batch_mean_reward(reward_groups(rollouts));
  state.omega_s = omega;
  state.alpha = cfg.estimator.alpha;

  for (std::size_t q = 0; q < nq; ++q) update_query(ensemble[q], rollouts[q], cfg, omega);

  ++state.step;
  StepMetrics m = collect_metrics(ensemble, rollouts, state.step, omega);
  return {m, std::move(rollouts)};
}

StepOutcome train_step(Ensemble& ensemble, const ExperimentConfig& cfg, TrainState& state) {
  const auto nq = static_cast<std::ptrdiff_t>(ensemble.size());
  std::vector<QueryRollout> rollouts(ensemble.size());
  std::vector<std::exception_ptr> errors(ensemble.size());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    try {
      rollouts[q] = rollout_query(ensemble[q], cfg, state.step, static_cast<std::size_t>(q));
    } catch (...) {
      errors[q] = std::current_exception();
    }
  }
  rethrow_first(errors);

  // The only cross-query synchronisation point.
  const double omega = batch_mean_reward(reward_groups(rollouts));
  state.omega_s = omega;
  state.alpha = cfg.estimator.alpha;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    try {
      update_query(ensemble[q], rollouts[q], cfg, omega);
    } catch (...) {
      errors[q] = std::current_exception();
    }
  }
  rethrow_first(errors);

  ++state.step;
  StepMetrics m = collect_metrics(ensemble, rollouts, state.step, omega);
  return {m, std::move(rollouts)};
}

std::optional<std::size_t> detect_collapse(std::span<const StepMetrics> metrics, double factor) {
  constexpr std::size_t kBaselineStep = 10;
  if (metrics.size() < kBaselineStep) return std::nullopt;
  const double base = static_cast<double>(std::max<std::size_t>(metrics[kBaselineStep - 1].unsolved_count, 1));
  for (std::size_t s = kBaselineStep; s < metrics.size(); ++s)
    if (static_cast<double>(metrics[s].unsolved_count) > factor * base) return metrics[s].step;
  return std::nullopt;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool parallel) {
  ExperimentResult res;
  res.initial = make_ensemble(cfg);
  res.final_ensemble = res.initial;
  res.metrics.reserve(cfg.steps);

  TrainState state{0, 0.0, cfg.estimator.alpha};
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    StepOutcome out = parallel ? train_step(res.final_ensemble, cfg, state)
                               : train_step_serial(res.final_ensemble, cfg, state);
    res.metrics.push_back(out.metrics);
  }
  res.collapse_step = detect_collapse(res.metrics, cfg.collapse_factor);
  return res;
}

std::vector<double> evaluate_passk(const Ensemble& ensemble, std::size_t n,
                                   std::span<const std::int64_t> k_grid, std::uint64_t seed) {
  for (std::int64_t k : k_grid)
    if (k < 1 || static_cast<std::size_t>(k) > n)
      throw std::invalid_argument("evaluate_passk: every k must lie in [1, n]");

  const auto nq = static_cast<std::ptrdiff_t>(ensemble.size());
  std::vector<std::int64_t> correct(ensemble.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    Rng rng = stream(seed, kEvalDomain, 0, static_cast<std::uint64_t>(q));
    for (std::size_t i : sample_group(ensemble[q], n, rng))
      if (ensemble[q].is_correct(i)) ++correct[q];
  }

  std::vector<double> out;
  out.reserve(k_grid.size());
  for (std::int64_t k : k_grid) {
    double total = 0.0;
    for (std::int64_t c : correct) total += passk_single(static_cast<std::int64_t>(n), c, k);
    out.push_back(ensemble.empty() ? 0.0 : total / static_cast<double>(ensemble.size()));
  }
  return out;
}

}  // namespace agrae
