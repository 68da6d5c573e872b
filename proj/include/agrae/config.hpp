#pragma once

// JSON experiment configs, named presets and the table / summary writers
// shared by the CLI and tests.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "agrae/trainer.hpp"

namespace agrae {

// Unknown keys and ill-typed values throw std::invalid_argument naming the
// field (dotted path for nested keys, e.g. "difficulty.q_min").
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json load_json_file(const std::filesystem::path& path);

// Applies "key=value" to a config document. The value is parsed as JSON and
// falls back to a plain string, so `variant=grae` and `eta=0.05` both work.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// grpo, positive-dominant, negative-dominant, hard-focused, easy-focused, a-grae
std::vector<std::string_view> preset_names();
ExperimentConfig preset(std::string_view name);

// Fixed six-decimal rendering used by every table.
std::string format_fixed(double value);

void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> metrics);
nlohmann::json experiment_summary(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace agrae
