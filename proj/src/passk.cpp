#include "agrae/passk.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace agrae {

double passk_single(std::int64_t n, std::int64_t c, std::int64_t k) {
  if (n < 1) throw std::invalid_argument("pass@k: n must be >= 1");
  if (k < 1 || k > n) throw std::invalid_argument("pass@k: k must lie in [1, n]");
  if (c < 0 || c > n) throw std::invalid_argument("pass@k: c must lie in [0, n]");
  if (c == 0) return 0.0;
  if (k > n - c) return 1.0;
  if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
  double miss = 1.0;
  for (std::int64_t j = 0; j < k; ++j)
    miss *= static_cast<double>(n - c - j) / static_cast<double>(n - j);
  return 1.0 - miss;
}

double passk_aggregate(std::span<const PassKRecord> records, std::int64_t k) {
  if (records.empty()) throw std::invalid_argument("pass@k: no records");
  double total = 0.0;
  for (const auto& r : records) {
    if (r.n < k)
      throw std::invalid_argument("pass@k: query '" + r.query_id + "' has n=" +
                                  std::to_string(r.n) + " < k=" + std::to_string(k));
    total += passk_single(r.n, r.c, k);
  }
  return total / static_cast<double>(records.size());
}

namespace {

enum class Schema { Unknown, Aggregated, PerResponse };

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

std::string read_query_id(const nlohmann::json& j, std::size_t line) {
  const auto it = j.find("query_id");
  if (it == j.end()) fail(line, "missing field 'query_id'");
  if (!it->is_string()) fail(line, "field 'query_id' must be a string");
  return it->get<std::string>();
}

std::int64_t read_count(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(line, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

std::vector<PassKRecord> parse_log(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  Schema schema = Schema::Unknown;
  std::vector<PassKRecord> out;
  std::unordered_map<std::string, std::size_t> slot;

  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      fail(line, "malformed JSON");
    }
    if (!j.is_object()) fail(line, "expected a JSON object");

    const bool aggregated = j.contains("n") || j.contains("c");
    const bool per_response = j.contains("correct");
    if (aggregated == per_response) fail(line, "record matches neither schema");
    const Schema here = aggregated ? Schema::Aggregated : Schema::PerResponse;
    if (schema == Schema::Unknown) schema = here;
    if (schema != here) fail(line, "mixed record schemas in one log");

    std::string id = read_query_id(j, line);
    if (here == Schema::Aggregated) {
      if (!j.contains("n") || !j.contains("c")) fail(line, "aggregated record needs 'n' and 'c'");
      PassKRecord rec{id, read_count(j, "n", line), read_count(j, "c", line)};
      if (rec.n < 1) fail(line, "n must be >= 1");
      if (rec.c < 0 || rec.c > rec.n) fail(line, "c must lie in [0, n]");
      if (!slot.emplace(id, out.size()).second) fail(line, "duplicate query_id '" + id + "'");
      out.push_back(std::move(rec));
    } else {
      const auto& v = j.at("correct");
      if (!v.is_boolean()) fail(line, "field 'correct' must be a boolean");
      auto [it, inserted] = slot.emplace(id, out.size());
      if (inserted) out.push_back({id, 0, 0});
      auto& rec = out[it->second];
      ++rec.n;
      if (v.get<bool>()) ++rec.c;
    }
  }
  return out;
}

std::vector<PassKRecord> ingest_log(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_log(ss.str());
}

}  // namespace agrae
