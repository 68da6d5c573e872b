#pragma once

// Group-relative advantage estimators.
//
// Every estimator is a pure function from one group of trajectory rewards
// (plus, for the asymmetric variants, the batch-level training state) to a
// vector of per-trajectory advantages. Degenerate groups (all rewards equal,
// i.e. p in {0,1} for binary rewards) always map to an all-zero vector.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agrae {

enum class Variant {
  Grae,
  GraeNoStd,
  PositiveDominant,
  NegativeDominant,
  HardFocused,
  EasyFocused,
  AGraeSample,
  AGraeFull,
};

// Command-line / config spelling, e.g. "positive-dominant".
std::string_view variant_name(Variant v) noexcept;
// Throws std::invalid_argument listing the accepted names.
Variant parse_variant(std::string_view name);
std::vector<std::string_view> variant_names();

// True for estimators whose definition depends on the success rate p.
bool requires_binary(Variant v) noexcept;

struct RewardGroup {
  std::vector<double> rewards;

  std::size_t size() const noexcept { return rewards.size(); }
  bool binary() const noexcept;
};

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;           // population form, divisor G
  double success_rate = 0.0;  // sum |r_i| / G
};

struct AdvantageVector {
  std::vector<double> values;
  Variant variant = Variant::Grae;
  bool degenerate = false;

  double sum() const noexcept;
};

struct TrainState {
  std::size_t step = 0;
  double omega_s = 0.0;
  double alpha = 1.0;
};

enum class DifficultyFocus { Hard, Easy };

namespace defaults {
inline constexpr double kBeta = 10.0;
inline constexpr double kGamma = 0.5;
inline constexpr double kAlphaMath = 1.0;
inline constexpr double kAlphaMultimodal = 0.5;
}  // namespace defaults

GroupStats group_stats(const RewardGroup& group);

// (r_i - mean) / std; zero vector flagged degenerate when std == 0.
AdvantageVector grae(const RewardGroup& group);
// r_i - mean.
AdvantageVector grae_no_std(const RewardGroup& group);

// Positive entries scaled by beta (resp. divided by beta). beta must exceed 1.
AdvantageVector positive_dominant(const AdvantageVector& adv, double beta);
AdvantageVector negative_dominant(const AdvantageVector& adv, double beta);

// gamma * A_i / sqrt(p) for Hard, gamma * A_i / sqrt(1 - p) for Easy.
// No rescaling at p in {0,1}.
AdvantageVector difficulty_rescale(const AdvantageVector& adv, const GroupStats& stats,
                                   DifficultyFocus mode, double gamma);

// Interpolates between the easy- and hard-focused rescalings with weight omega_s.
AdvantageVector a_grae_sample_level(const RewardGroup& group, const TrainState& state);
// Attenuates positive entries by min(1, omega_s / alpha).
AdvantageVector a_grae_group_level(const AdvantageVector& adv, const TrainState& state);
AdvantageVector a_grae_full(const RewardGroup& group, const TrainState& state);

double abs_advantage_sum(const AdvantageVector& adv) noexcept;

// Pooled mean reward over every trajectory in the batch.
double batch_mean_reward(std::span<const RewardGroup> groups);

// Estimator choice plus the constants it may need.
struct Estimator {
  Variant variant = Variant::Grae;
  double beta = defaults::kBeta;
  double gamma = defaults::kGamma;
  double alpha = defaults::kAlphaMath;
};

// Dispatches to the configured variant. omega_s is only read by the A-GRAE
// variants. Throws std::invalid_argument for non-binary rewards on a
// p-dependent variant.
AdvantageVector estimate(const RewardGroup& group, const Estimator& est, double omega_s);

// Batch form: omega_s is computed from the whole batch first.
std::vector<AdvantageVector> estimate_batch(std::span<const RewardGroup> groups,
                                            const Estimator& est);

}  // namespace agrae
