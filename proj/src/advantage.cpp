#include "agrae/advantage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace agrae {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 8> kVariantNames{{
    {Variant::Grae, "grae"},
    {Variant::GraeNoStd, "grae-no-std"},
    {Variant::PositiveDominant, "positive-dominant"},
    {Variant::NegativeDominant, "negative-dominant"},
    {Variant::HardFocused, "hard-focused"},
    {Variant::EasyFocused, "easy-focused"},
    {Variant::AGraeSample, "a-grae-sample"},
    {Variant::AGraeFull, "a-grae-full"},
}};

void require_nonempty(const RewardGroup& group) {
  if (group.rewards.empty()) throw std::invalid_argument("invalid group: no rewards");
}

void require_beta(double beta) {
  if (!(beta > 1.0)) throw std::invalid_argument("beta must be > 1");
}

bool all_equal(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

AdvantageVector zeros_like(const AdvantageVector& adv, Variant tag) {
  return {std::vector<double>(adv.values.size(), 0.0), tag, true};
}

AdvantageVector scale_positives(const AdvantageVector& adv, double factor, Variant tag) {
  AdvantageVector out{adv.values, tag, adv.degenerate};
  for (double& a : out.values)
    if (a > 0.0) a *= factor;
  return out;
}

bool degenerate_rate(double p) { return p <= 0.0 || p >= 1.0; }

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  for (const auto& [var, name] : kVariantNames)
    if (var == v) return name;
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [var, n] : kVariantNames)
    if (n == name) return var;
  std::string msg = "unknown variant '" + std::string(name) + "'; valid:";
  for (const auto& [var, n] : kVariantNames) msg += " " + std::string(n);
  throw std::invalid_argument(msg);
}

std::vector<std::string_view> variant_names() {
  std::vector<std::string_view> out;
  for (const auto& [var, n] : kVariantNames) out.push_back(n);
  return out;
}

bool requires_binary(Variant v) noexcept {
  switch (v) {
    case Variant::HardFocused:
    case Variant::EasyFocused:
    case Variant::AGraeSample:
    case Variant::AGraeFull:
      return true;
    default:
      return false;
  }
}

bool RewardGroup::binary() const noexcept {
  return std::all_of(rewards.begin(), rewards.end(),
                     [](double r) { return r == 0.0 || r == 1.0; });
}

double AdvantageVector::sum() const noexcept {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

GroupStats group_stats(const RewardGroup& group) {
  require_nonempty(group);
  const auto g = static_cast<double>(group.size());
  GroupStats s;
  double abs_sum = 0.0;
  for (double r : group.rewards) {
    s.mean += r;
    abs_sum += std::abs(r);
  }
  s.mean /= g;
  s.success_rate = abs_sum / g;
  if (!all_equal(group.rewards)) {
    double ss = 0.0;
    for (double r : group.rewards) ss += (r - s.mean) * (r - s.mean);
    s.std = std::sqrt(ss / g);
  }
  return s;
}

AdvantageVector grae(const RewardGroup& group) {
  const GroupStats s = group_stats(group);
  AdvantageVector out{std::vector<double>(group.size(), 0.0), Variant::Grae, false};
  if (s.std == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < group.size(); ++i) out.values[i] = (group.rewards[i] - s.mean) / s.std;
  return out;
}

AdvantageVector grae_no_std(const RewardGroup& group) {
  const GroupStats s = group_stats(group);
  AdvantageVector out{std::vector<double>(group.size(), 0.0), Variant::GraeNoStd, s.std == 0.0};
  if (out.degenerate) return out;
  for (std::size_t i = 0; i < group.size(); ++i) out.values[i] = group.rewards[i] - s.mean;
  return out;
}

AdvantageVector positive_dominant(const AdvantageVector& adv, double beta) {
  require_beta(beta);
  return scale_positives(adv, beta, Variant::PositiveDominant);
}

AdvantageVector negative_dominant(const AdvantageVector& adv, double beta) {
  require_beta(beta);
  AdvantageVector out{adv.values, Variant::NegativeDominant, adv.degenerate};
  for (double& a : out.values)
    if (a > 0.0) a /= beta;
  return out;
}

AdvantageVector difficulty_rescale(const AdvantageVector& adv, const GroupStats& stats,
                                   DifficultyFocus mode, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  const Variant tag = mode == DifficultyFocus::Hard ? Variant::HardFocused : Variant::EasyFocused;
  const double p = stats.success_rate;
  if (adv.degenerate || degenerate_rate(p)) return zeros_like(adv, tag);

  const double root = std::sqrt(mode == DifficultyFocus::Hard ? p : 1.0 - p);
  AdvantageVector out{adv.values, tag, false};
  for (double& a : out.values) a = gamma * (a / root);
  return out;
}

AdvantageVector a_grae_sample_level(const RewardGroup& group, const TrainState& state) {
  if (!group.binary())
    throw std::invalid_argument("a-grae requires binary rewards");
  if (!(state.omega_s >= 0.0 && state.omega_s <= 1.0))
    throw std::invalid_argument("omega_s must lie in [0,1]");

  const AdvantageVector z = grae(group);
  const double p = group_stats(group).success_rate;
  if (z.degenerate || degenerate_rate(p)) return zeros_like(z, Variant::AGraeSample);

  const double w_hard = state.omega_s / 2.0;
  const double w_easy = (1.0 - state.omega_s) / 2.0;
  const double root_p = std::sqrt(p);
  const double root_q = std::sqrt(1.0 - p);
  AdvantageVector out{z.values, Variant::AGraeSample, false};
  for (double& a : out.values) a = w_hard * (a / root_p) + w_easy * (a / root_q);
  return out;
}

AdvantageVector a_grae_group_level(const AdvantageVector& adv, const TrainState& state) {
  if (!(state.alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  const double factor = std::min(1.0, state.omega_s / state.alpha);
  return scale_positives(adv, factor, adv.variant);
}

AdvantageVector a_grae_full(const RewardGroup& group, const TrainState& state) {
  AdvantageVector out = a_grae_group_level(a_grae_sample_level(group, state), state);
  out.variant = Variant::AGraeFull;
  return out;
}

double abs_advantage_sum(const AdvantageVector& adv) noexcept {
  double s = 0.0;
  for (double a : adv.values) s += std::abs(a);
  return s;
}

double batch_mean_reward(std::span<const RewardGroup> groups) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& g : groups) {
    for (double r : g.rewards) total += r;
    count += g.size();
  }
  if (count == 0) throw std::invalid_argument("empty batch: no trajectories");
  return total / static_cast<double>(count);
}

AdvantageVector estimate(const RewardGroup& group, const Estimator& est, double omega_s) {
  if (requires_binary(est.variant) && !group.binary())
    throw std::invalid_argument(std::string(variant_name(est.variant)) +
                                " requires binary rewards");
  const TrainState state{0, omega_s, est.alpha};
  switch (est.variant) {
    case Variant::Grae:
      return grae(group);
    case Variant::GraeNoStd:
      return grae_no_std(group);
    case Variant::PositiveDominant:
      return positive_dominant(grae(group), est.beta);
    case Variant::NegativeDominant:
      return negative_dominant(grae(group), est.beta);
    case Variant::HardFocused:
      return difficulty_rescale(grae(group), group_stats(group), DifficultyFocus::Hard, est.gamma);
    case Variant::EasyFocused:
      return difficulty_rescale(grae(group), group_stats(group), DifficultyFocus::Easy, est.gamma);
    case Variant::AGraeSample:
      return a_grae_sample_level(group, state);
    case Variant::AGraeFull:
      return a_grae_full(group, state);
  }
  throw std::logic_error("unhandled variant");
}

std::vector<AdvantageVector> estimate_batch(std::span<const RewardGroup> groups,
                                            const Estimator& est) {
  const bool needs_omega =
      est.variant == Variant::AGraeSample || est.variant == Variant::AGraeFull;
  const double omega = needs_omega ? batch_mean_reward(groups) : 0.0;
  std::vector<AdvantageVector> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(estimate(g, est, omega));
  return out;
}

}  // namespace agrae
