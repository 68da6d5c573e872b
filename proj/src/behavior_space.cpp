#include "agrae/behavior_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace agrae {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double h : logits) z += std::exp(h - m);
  const double log_z = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

BehaviorSpace::BehaviorSpace(std::vector<double> logits, std::vector<std::size_t> correct)
    : logits_(std::move(logits)), ref_logits_(logits_), correct_(std::move(correct)) {
  if (logits_.size() < 2) throw std::invalid_argument("behavior space needs N >= 2");
  std::sort(correct_.begin(), correct_.end());
  correct_.erase(std::unique(correct_.begin(), correct_.end()), correct_.end());
  is_correct_.assign(logits_.size(), 0);
  for (std::size_t i : correct_) {
    if (i >= logits_.size()) throw std::invalid_argument("correct index out of range");
    is_correct_[i] = 1;
  }
}

std::vector<double> BehaviorSpace::probabilities() const { return softmax(logits_); }
std::vector<double> BehaviorSpace::ref_probabilities() const { return softmax(ref_logits_); }
std::vector<double> BehaviorSpace::log_probabilities() const { return log_softmax(logits_); }

void BehaviorSpace::update(std::span<const double> gradient, double eta) {
  if (gradient.size() != logits_.size()) throw std::invalid_argument("gradient size mismatch");
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] += eta * gradient[i];
}

std::vector<std::size_t> sample_group(const BehaviorSpace& space, std::size_t g, Rng& rng) {
  const std::vector<double> pi = space.probabilities();
  std::vector<double> cdf(pi.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) cdf[i] = (acc += pi[i]);

  std::vector<std::size_t> out(g);
  for (auto& idx : out) {
    const double u = uniform01(rng) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), pi.size() - 1);
  }
  return out;
}

namespace {
void require_aligned(const SampledGroupAssignment& a, std::size_t n) {
  if (a.indices.size() != a.advantages.values.size())
    throw std::invalid_argument("assignment indices and advantages differ in length");
  for (std::size_t i : a.indices)
    if (i >= n) throw std::invalid_argument("sampled index out of range");
}
}  // namespace

double objective(const BehaviorSpace& space, const SampledGroupAssignment& assignment) {
  require_aligned(assignment, space.size());
  const std::vector<double> logp = space.log_probabilities();
  double j = 0.0;
  for (std::size_t k = 0; k < assignment.indices.size(); ++k)
    j += assignment.advantages.values[k] * logp[assignment.indices[k]];
  return j;
}

std::vector<double> logit_gradient(const BehaviorSpace& space,
                                   const SampledGroupAssignment& assignment) {
  require_aligned(assignment, space.size());
  const std::vector<double> pi = space.probabilities();
  const double c = assignment.intragroup_sum();
  std::vector<double> grad(space.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = -c * pi[i];
  // With C == 0 the unsampled entries above are exactly zero.
  for (std::size_t k = 0; k < assignment.indices.size(); ++k)
    grad[assignment.indices[k]] += assignment.advantages.values[k];
  return grad;
}

BehaviorSpace apply_update(const BehaviorSpace& space, std::span<const double> gradient,
                           double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  BehaviorSpace out = space;
  out.update(gradient, eta);
  return out;
}

double entropy(const BehaviorSpace& space) {
  const std::vector<double> pi = space.probabilities();
  const std::vector<double> logp = space.log_probabilities();
  double h = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i)
    if (pi[i] > 0.0) h -= pi[i] * logp[i];
  return h;
}

double success_probability(const BehaviorSpace& space) {
  const std::vector<double> pi = space.probabilities();
  double q = 0.0;
  for (std::size_t i : space.correct_set()) q += pi[i];
  return q;
}

std::size_t greedy_behavior(const BehaviorSpace& space) noexcept {
  const auto h = space.logits();
  return static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
}

}  // namespace agrae
