// agrae: simulator runs, batch advantage computation and Pass@k evaluation.
//
//   agrae simulate  --preset grpo --steps 200 --seed 7 --output run.csv
//   agrae advantage --input groups.jsonl --variant a-grae-full --alpha 1
//   agrae passk     --input log.jsonl --k 1,2,4,8
//   agrae presets   [--show a-grae]
//
// Outputs go to --output, else to $AGRAE_OUTPUT_DIR, else stdout (simulate
// always writes files). A failed command leaves no partial output behind.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "agrae/advantage.hpp"
#include "agrae/config.hpp"
#include "agrae/passk.hpp"
#include "agrae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOutputDirEnv = "AGRAE_OUTPUT_DIR";

std::optional<fs::path> env_output_dir() {
  const char* dir = std::getenv(kOutputDirEnv);
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return fs::path(dir);
}

// Writes to "<path>.tmp" and renames on commit; the temp file is removed if
// the writer is destroyed uncommitted.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".tmp";
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path_.string());
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_.string());
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

// Renders fully in memory, then either prints or writes atomically.
void emit(const std::string& text, const std::optional<fs::path>& path) {
  if (!path) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  AtomicFile f(*path);
  f.stream() << text;
  f.commit();
}

std::optional<fs::path> resolve_output(const std::string& flag, const char* default_name) {
  if (!flag.empty()) return fs::path(flag);
  if (auto dir = env_output_dir()) return *dir / default_name;
  return std::nullopt;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string output;
  std::string summary;
  bool serial = false;
};

int cmd_simulate(const SimulateArgs& a) {
  json doc = json::object();
  if (!a.config.empty()) doc = agrae::load_json_file(a.config);
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  if (!a.preset.empty()) {
    agrae::preset(a.preset);  // validates the name
    doc["preset"] = a.preset;
  }
  if (a.steps) doc["steps"] = *a.steps;
  if (a.seed) doc["seed"] = *a.seed;
  if (!a.variant.empty()) doc["variant"] = a.variant;
  for (const auto& o : a.overrides) agrae::apply_override(doc, o);

  const agrae::ExperimentConfig cfg = agrae::config_from_json(doc);

  const std::string stem = doc.contains("preset") ? doc["preset"].get<std::string>() : "simulate";
  fs::path out = !a.output.empty() ? fs::path(a.output)
                                   : env_output_dir().value_or(fs::path(".")) / (stem + "_metrics.csv");
  fs::path summary_path = a.summary.empty() ? fs::path(out).replace_extension(".summary.json")
                                            : fs::path(a.summary);

  const agrae::ExperimentResult result = agrae::run_experiment(cfg, !a.serial);

  std::ostringstream table;
  agrae::write_metrics_csv(table, result.metrics);
  const std::string summary = agrae::experiment_summary(cfg, result).dump(2) + "\n";

  AtomicFile metrics_file(out);
  metrics_file.stream() << table.str();
  AtomicFile summary_file(summary_path);
  summary_file.stream() << summary;
  metrics_file.commit();
  try {
    summary_file.commit();
  } catch (...) {
    std::error_code ec;
    fs::remove(out, ec);
    throw;
  }
  std::cerr << "wrote " << out.string() << " and " << summary_path.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- advantage

struct AdvantageArgs {
  std::string input;
  std::string variant = "grae";
  double beta = agrae::defaults::kBeta;
  double gamma = agrae::defaults::kGamma;
  double alpha = agrae::defaults::kAlphaMath;
  std::string output;
};

std::string query_label(const json& id) { return id.is_string() ? id.get<std::string>() : id.dump(); }

int cmd_advantage(const AdvantageArgs& a) {
  agrae::Estimator est{agrae::parse_variant(a.variant), a.beta, a.gamma, a.alpha};

  std::ifstream in(a.input);
  if (!in) throw std::runtime_error("cannot open " + a.input);
  std::vector<json> ids;
  std::vector<agrae::RewardGroup> groups;
  std::string raw;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(raw, nullptr, false);
    const std::string where = "line " + std::to_string(line) + ": ";
    if (j.is_discarded() || !j.is_object()) throw std::runtime_error(where + "malformed JSON record");
    if (!j.contains("query_id")) throw std::runtime_error(where + "missing field 'query_id'");
    if (!j.contains("rewards") || !j["rewards"].is_array() || j["rewards"].empty())
      throw std::runtime_error(where + "field 'rewards' must be a non-empty array");
    agrae::RewardGroup g;
    for (const auto& r : j["rewards"]) {
      if (!r.is_number()) throw std::runtime_error(where + "rewards must be numbers");
      g.rewards.push_back(r.get<double>());
    }
    ids.push_back(j["query_id"]);
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw std::runtime_error("no reward groups in " + a.input);

  for (std::size_t i = 0; i < groups.size(); ++i)
    if (agrae::requires_binary(est.variant) && !groups[i].binary())
      throw std::invalid_argument("query " + query_label(ids[i]) + ": " +
                                  std::string(agrae::variant_name(est.variant)) +
                                  " requires binary rewards");

  const auto advantages = agrae::estimate_batch(groups, est);
  std::ostringstream text;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    ordered_json rec;
    rec["query_id"] = ids[i];
    rec["advantages"] = advantages[i].values;
    rec["degenerate"] = advantages[i].degenerate;
    text << rec.dump() << "\n";
  }
  emit(text.str(), resolve_output(a.output, "advantages.jsonl"));
  return 0;
}

// ------------------------------------------------------------------- passk

struct PasskArgs {
  std::string input;
  std::string k_grid;
  std::string output;
};

std::vector<std::int64_t> parse_k_grid(const std::string& text) {
  std::vector<std::int64_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long k = 0;
    try {
      k = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || k < 1)
      throw std::invalid_argument("--k: '" + item + "' is not a positive integer");
    ks.push_back(k);
  }
  if (ks.empty()) throw std::invalid_argument("--k: empty k grid");
  return ks;
}

int cmd_passk(const PasskArgs& a) {
  const auto ks = parse_k_grid(a.k_grid);
  const auto records = agrae::ingest_log(a.input);
  std::ostringstream text;
  text << "k,pass_at_k\n";
  for (std::int64_t k : ks) text << k << ',' << agrae::format_fixed(agrae::passk_aggregate(records, k)) << '\n';
  emit(text.str(), resolve_output(a.output, "passk.csv"));
  return 0;
}

// ----------------------------------------------------------------- presets

int cmd_presets(const std::string& show) {
  if (!show.empty()) {
    std::cout << agrae::config_to_json(agrae::preset(show)).dump(2) << "\n";
    return 0;
  }
  for (auto name : agrae::preset_names())
    std::cout << name << "\t" << agrae::variant_name(agrae::preset(name).estimator.variant) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-relative advantage estimators, softmax-bandit RLVR simulator and Pass@k"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulator experiment");
  simulate->add_option("--preset", sim.preset, "Named preset");
  simulate->add_option("--config", sim.config, "JSON config file");
  simulate->add_option("--set", sim.overrides, "key=value override (repeatable)");
  simulate->add_option("--steps", sim.steps, "Training steps");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--variant", sim.variant, "Advantage estimator");
  simulate->add_option("--output", sim.output, "Metrics CSV path");
  simulate->add_option("--summary", sim.summary, "Summary JSON path");
  simulate->add_flag("--serial", sim.serial, "Use the serial reference kernels");

  AdvantageArgs adv;
  auto* advantage = app.add_subcommand("advantage", "Compute advantages for reward groups");
  advantage->add_option("--input", adv.input, "JSONL of {query_id, rewards}")->required();
  advantage->add_option("--variant", adv.variant, "Estimator")->capture_default_str();
  advantage->add_option("--beta", adv.beta, "Dominance factor for positive-/negative-dominant (> 1)")->capture_default_str();
  advantage->add_option("--gamma", adv.gamma, "Scale for hard-/easy-focused")->capture_default_str();
  advantage->add_option("--alpha", adv.alpha, "A-GRAE attenuation scale")->capture_default_str();
  advantage->add_option("--output", adv.output, "Output JSONL path");

  PasskArgs pk;
  auto* passk = app.add_subcommand("passk", "Evaluate Pass@k from a correctness log");
  passk->add_option("--input", pk.input, "JSONL correctness log")->required();
  passk->add_option("--k", pk.k_grid, "Comma-separated k values")->required();
  passk->add_option("--output", pk.output, "Output CSV path");

  std::string show;
  auto* presets = app.add_subcommand("presets", "List presets or print one as JSON");
  presets->add_option("--show", show, "Preset to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (advantage->parsed()) return cmd_advantage(adv);
    if (passk->parsed()) return cmd_passk(pk);
    if (presets->parsed()) return cmd_presets(show);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
