#pragma once

// A single query modelled as a softmax policy over N discrete behaviors
// (whole responses), with a designated subset of correct behaviors.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "agrae/advantage.hpp"

namespace agrae {

using Rng = std::mt19937_64;

// Uniform draw in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

class BehaviorSpace {
 public:
  // Throws std::invalid_argument if logits.size() < 2 or a correct index is
  // out of range. ref_logits is frozen to the initial logits.
  BehaviorSpace(std::vector<double> logits, std::vector<std::size_t> correct);

  std::size_t size() const noexcept { return logits_.size(); }
  std::span<const double> logits() const noexcept { return logits_; }
  std::span<const double> ref_logits() const noexcept { return ref_logits_; }
  const std::vector<std::size_t>& correct_set() const noexcept { return correct_; }
  bool is_correct(std::size_t i) const noexcept { return is_correct_[i] != 0; }

  std::vector<double> probabilities() const;
  std::vector<double> ref_probabilities() const;
  std::vector<double> log_probabilities() const;

  // h <- h + eta * gradient, in place.
  void update(std::span<const double> gradient, double eta);

 private:
  std::vector<double> logits_;
  std::vector<double> ref_logits_;
  std::vector<std::size_t> correct_;
  std::vector<char> is_correct_;
};

// Numerically stable softmax / log-softmax.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

struct SampledGroupAssignment {
  std::vector<std::size_t> indices;
  AdvantageVector advantages;

  // C = sum of advantages over the sampled group.
  double intragroup_sum() const noexcept { return advantages.sum(); }
};

// g i.i.d. draws (with replacement) from softmax(logits).
std::vector<std::size_t> sample_group(const BehaviorSpace& space, std::size_t g, Rng& rng);

// sum_k A_k log pi(indices[k]).
double objective(const BehaviorSpace& space, const SampledGroupAssignment& assignment);

// dJ/dh_i = sum_{k: indices[k]=i} A_k - C pi_i.
std::vector<double> logit_gradient(const BehaviorSpace& space,
                                   const SampledGroupAssignment& assignment);

BehaviorSpace apply_update(const BehaviorSpace& space, std::span<const double> gradient,
                           double eta);

// Natural-log Shannon entropy of softmax(logits).
double entropy(const BehaviorSpace& space);

// Total probability mass on the correct set.
double success_probability(const BehaviorSpace& space);

// Index of the largest logit, lowest index on ties.
std::size_t greedy_behavior(const BehaviorSpace& space) noexcept;

}  // namespace agrae
