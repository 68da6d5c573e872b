#pragma once

// Unbiased Pass@k estimation: 1 - C(n-c, k) / C(n, k), averaged over queries.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace agrae {

struct PassKRecord {
  std::string query_id;
  std::int64_t n = 0;
  std::int64_t c = 0;
};

// Product form 1 - prod_{j<k} (n-c-j)/(n-j). Exact 0 for c == 0, exact 1 for
// k > n - c, exact c/n for k == 1. Throws std::invalid_argument on k outside
// [1, n] or c outside [0, n].
double passk_single(std::int64_t n, std::int64_t c, std::int64_t k);

// Unweighted mean over records. Throws if empty or any record has n < k
// (the message names the offending query_id).
double passk_aggregate(std::span<const PassKRecord> records, std::int64_t k);

// Parses a newline-delimited JSON log. Each line is either an aggregated
// record {"query_id", "n", "c"} or a per-response record {"query_id",
// "correct"}; per-response lines are folded into (n, c) per query_id in order
// of first appearance. Mixing the two schemas is an error. Errors carry the
// 1-based line number.
std::vector<PassKRecord> ingest_log(const std::filesystem::path& path);
std::vector<PassKRecord> parse_log(const std::string& text);

}  // namespace agrae
