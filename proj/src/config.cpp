#include "agrae/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace agrae {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config field '" + field + "': " + what);
}

template <typename T>
T read_field(const json& v, const std::string& field) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) bad_field(field, "expected a number");
    return v.get<double>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) bad_field(field, "expected a string");
    return v.get<std::string>();
  } else {
    if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_field(field, "expected a non-negative integer");
    return static_cast<T>(v.get<std::int64_t>());
  }
}

void read_difficulty(const json& doc, DifficultyScheme& d) {
  if (!doc.is_object()) bad_field("difficulty", "expected an object");
  for (const auto& [key, v] : doc.items()) {
    const std::string field = "difficulty." + key;
    if (key == "correct_per_query") d.correct_per_query = read_field<std::size_t>(v, field);
    else if (key == "q_min") d.q_min = read_field<double>(v, field);
    else if (key == "q_max") d.q_max = read_field<double>(v, field);
    else if (key == "logit_noise") d.logit_noise = read_field<double>(v, field);
    else bad_field(field, "unknown key");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  if (const auto it = doc.find("preset"); it != doc.end())
    c = preset(read_field<std::string>(*it, "preset"));

  for (const auto& [key, v] : doc.items()) {
    if (key == "preset" || key == "description") continue;  // description is free-form text
    else if (key == "num_queries") c.num_queries = read_field<std::size_t>(v, key);
    else if (key == "num_behaviors") c.num_behaviors = read_field<std::size_t>(v, key);
    else if (key == "group_size") c.group_size = read_field<std::size_t>(v, key);
    else if (key == "steps") c.steps = read_field<std::size_t>(v, key);
    else if (key == "eta") c.eta = read_field<double>(v, key);
    else if (key == "variant") {
      try {
        c.estimator.variant = parse_variant(read_field<std::string>(v, key));
      } catch (const std::invalid_argument& e) {
        bad_field(key, e.what());
      }
    }
    else if (key == "beta") c.estimator.beta = read_field<double>(v, key);
    else if (key == "gamma") c.estimator.gamma = read_field<double>(v, key);
    else if (key == "alpha") c.estimator.alpha = read_field<double>(v, key);
    else if (key == "clip_epsilon") c.clip_epsilon = read_field<double>(v, key);
    else if (key == "kl_beta") c.kl_beta = read_field<double>(v, key);
    else if (key == "minibatch_passes") c.minibatch_passes = read_field<std::size_t>(v, key);
    else if (key == "seed") c.seed = read_field<std::uint64_t>(v, key);
    else if (key == "collapse_factor") c.collapse_factor = read_field<double>(v, key);
    else if (key == "eval_samples") c.eval_samples = read_field<std::size_t>(v, key);
    else if (key == "eval_k") {
      if (!v.is_array()) bad_field(key, "expected an array of integers");
      c.eval_k.clear();
      for (const auto& k : v) c.eval_k.push_back(static_cast<std::int64_t>(read_field<std::uint64_t>(k, key)));
    }
    else if (key == "difficulty") read_difficulty(v, c.difficulty);
    else bad_field(key, "unknown key");
  }

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config field ") + e.what());
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return json{
      {"num_queries", c.num_queries},
      {"num_behaviors", c.num_behaviors},
      {"group_size", c.group_size},
      {"steps", c.steps},
      {"eta", c.eta},
      {"variant", std::string(variant_name(c.estimator.variant))},
      {"beta", c.estimator.beta},
      {"gamma", c.estimator.gamma},
      {"alpha", c.estimator.alpha},
      {"clip_epsilon", c.clip_epsilon},
      {"kl_beta", c.kl_beta},
      {"minibatch_passes", c.minibatch_passes},
      {"seed", c.seed},
      {"collapse_factor", c.collapse_factor},
      {"eval_samples", c.eval_samples},
      {"eval_k", c.eval_k},
      {"difficulty",
       {{"correct_per_query", c.difficulty.correct_per_query},
        {"q_min", c.difficulty.q_min},
        {"q_max", c.difficulty.q_max},
        {"logit_noise", c.difficulty.logit_noise}}},
  };
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed config " + path.string() + ": " + e.what());
  }
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw std::invalid_argument("override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* target = &doc;
  std::string_view rest = key;
  for (auto dot = rest.find('.'); dot != std::string_view::npos; dot = rest.find('.')) {
    target = &(*target)[std::string(rest.substr(0, dot))];
    rest.remove_prefix(dot + 1);
  }
  (*target)[std::string(rest)] = std::move(value);
}

std::vector<std::string_view> preset_names() {
  return {"grpo", "positive-dominant", "negative-dominant", "hard-focused", "easy-focused", "a-grae"};
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "grpo") c.estimator.variant = Variant::Grae;
  else if (name == "positive-dominant") c.estimator.variant = Variant::PositiveDominant;
  else if (name == "negative-dominant") c.estimator.variant = Variant::NegativeDominant;
  else if (name == "hard-focused") c.estimator.variant = Variant::HardFocused;
  else if (name == "easy-focused") c.estimator.variant = Variant::EasyFocused;
  else if (name == "a-grae") c.estimator.variant = Variant::AGraeFull;
  else {
    std::string msg = "unknown preset '" + std::string(name) + "'; valid presets:";
    for (auto p : preset_names()) msg += " " + std::string(p);
    throw std::invalid_argument(msg);
  }
  return c;
}

std::string format_fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> metrics) {
  out << "step,omega_s,mean_entropy,correct_count,unsolved_count,greedy_accuracy\n";
  for (const auto& m : metrics)
    out << m.step << ',' << format_fixed(m.omega_s) << ',' << format_fixed(m.mean_entropy) << ','
        << m.correct_count << ',' << m.unsolved_count << ',' << format_fixed(m.greedy_accuracy)
        << '\n';
}

json experiment_summary(const ExperimentConfig& config, const ExperimentResult& result) {
  auto mean_success = [](const Ensemble& e) {
    double s = 0.0;
    for (const auto& q : e) s += success_probability(q);
    return e.empty() ? 0.0 : s / static_cast<double>(e.size());
  };

  json summary{{"config", config_to_json(config)},
               {"steps_completed", result.metrics.size()},
               {"collapse_step", nullptr},
               {"initial_success_probability", mean_success(result.initial)},
               {"final_success_probability", mean_success(result.final_ensemble)}};
  if (result.collapse_step) summary["collapse_step"] = *result.collapse_step;

  if (!result.metrics.empty()) {
    const StepMetrics& m = result.metrics.back();
    summary["final"] = {{"step", m.step},
                        {"omega_s", m.omega_s},
                        {"mean_entropy", m.mean_entropy},
                        {"correct_count", m.correct_count},
                        {"unsolved_count", m.unsolved_count},
                        {"greedy_accuracy", m.greedy_accuracy}};
  } else {
    summary["final"] = nullptr;
  }

  if (config.eval_samples > 0 && !config.eval_k.empty()) {
    const std::uint64_t eval_seed = mix_seed(config.seed, 0xe7a1);
    const auto before = evaluate_passk(result.initial, config.eval_samples, config.eval_k, eval_seed);
    const auto after =
        evaluate_passk(result.final_ensemble, config.eval_samples, config.eval_k, eval_seed);
    json rows = json::array();
    for (std::size_t i = 0; i < config.eval_k.size(); ++i)
      rows.push_back({{"k", config.eval_k[i]}, {"initial", before[i]}, {"final", after[i]}});
    summary["pass_at_k"] = std::move(rows);
  }
  return summary;
}

}  // namespace agrae
