#include <stdexcept>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

#include "agrae/passk.hpp"

using namespace agrae;
using doctest::Approx;

namespace {

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Exact rational 1 - C(n-c,k)/C(n,k) = (C(n,k) - C(n-c,k)) / C(n,k).
double passk_exact(int n, int c, int k) {
  const std::uint64_t total = binom(n, k);
  return static_cast<double>(total - binom(n - c, k)) / static_cast<double>(total);
}

// Enumerates every k-subset of n responses (first c correct).
double passk_enumerate(int n, int c, int k) {
  int hits = 0, subsets = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    ++subsets;
    if (mask & ((1u << c) - 1)) ++hits;
  }
  return static_cast<double>(hits) / subsets;
}

}  // namespace

TEST_CASE("passk_single examples") {
  CHECK(passk_enumerate(4, 2, 2) == Approx(5.0 / 6));
  CHECK(passk_single(4, 2, 2) == Approx(5.0 / 6).epsilon(1e-15));
  CHECK(passk_single(4, 2, 2) == Approx(0.833333).epsilon(1e-6));
  for (int n : {1, 5, 256})
    for (int k : {1, n})
      CHECK(passk_single(n, 0, k) == 0.0);
  CHECK(passk_single(4, 1, 4) == 1.0);
}

TEST_CASE("passk_single errors") {
  CHECK_THROWS_AS(passk_single(4, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(passk_single(4, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(passk_single(4, 5, 2), std::invalid_argument);
  CHECK_THROWS_AS(passk_single(4, -1, 2), std::invalid_argument);
}

TEST_CASE("boundary identities") {
  for (int n = 1; n <= 64; ++n) {
    for (int k = 1; k <= n; ++k) CHECK(passk_single(n, n, k) == 1.0);
    for (int c = 0; c <= n; ++c) CHECK(passk_single(n, c, 1) == static_cast<double>(c) / n);
  }
}

TEST_CASE("product form agrees with exact combinatorics for n <= 20") {
  for (int n = 1; n <= 20; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) CHECK(std::abs(passk_single(n, c, k) - passk_exact(n, c, k)) <= 1e-12);
  for (int n = 1; n <= 12; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k)
        CHECK(std::abs(passk_single(n, c, k) - passk_enumerate(n, c, k)) <= 1e-12);
}

TEST_CASE("monotone in k and c") {
  for (int n : {8, 32, 256})
    for (int c = 0; c <= n; c += (n > 32 ? 7 : 1))
      for (int k = 1; k < n; ++k) {
        CHECK(passk_single(n, c, k) <= passk_single(n, c, k + 1));
        if (c < n) CHECK(passk_single(n, c, k) <= passk_single(n, c + 1, k));
      }
}

TEST_CASE("n = 256 stays finite") {
  for (int c = 0; c <= 256; ++c)
    for (int k : {1, 2, 4, 8, 16, 32, 64, 128, 256}) {
      const double v = passk_single(256, c, k);
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("passk_aggregate") {
  std::vector<PassKRecord> recs{{"a", 4, 4}, {"b", 4, 0}};
  CHECK(passk_aggregate(recs, 1) == 0.5);
  std::vector<PassKRecord> single{{"q", 4, 2}};
  CHECK(passk_aggregate(single, 2) == Approx(0.833333).epsilon(1e-6));
  CHECK_THROWS_AS(passk_aggregate(std::vector<PassKRecord>{}, 1), std::invalid_argument);

  std::vector<PassKRecord> short_one{{"ok", 8, 2}, {"too-short", 3, 1}};
  try {
    passk_aggregate(short_one, 4);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("too-short") != std::string::npos);
  }
}

TEST_CASE("parse_log schemas") {
  auto recs = parse_log("{\"query_id\":\"q1\",\"correct\":true}\n{\"query_id\":\"q1\",\"correct\":false}\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].query_id == "q1");
  CHECK(recs[0].n == 2);
  CHECK(recs[0].c == 1);

  recs = parse_log("{\"query_id\":\"q7\",\"n\":16,\"c\":3}\n\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].n == 16);
  CHECK(recs[0].c == 3);

  recs = parse_log(
      "{\"query_id\":\"b\",\"correct\":true}\n{\"query_id\":\"a\",\"correct\":false}\n"
      "{\"query_id\":\"b\",\"correct\":true}\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].query_id == "b");
  CHECK(recs[0].c == 2);
  CHECK(recs[1].n == 1);
}

TEST_CASE("parse_log errors carry line numbers") {
  auto error_of = [](const std::string& text) {
    try {
      parse_log(text);
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("{\"query_id\":\"q\",\"n\":4,\"c\":5}\n").find("line 1") != std::string::npos);
  CHECK(error_of("{\"query_id\":\"q\",\"n\":4,\"c\":1}\nnot json\n").find("line 2") != std::string::npos);
  const auto mixed = error_of("{\"query_id\":\"q\",\"n\":4,\"c\":1}\n{\"query_id\":\"r\",\"correct\":true}\n");
  CHECK(mixed.find("line 2") != std::string::npos);
  CHECK(mixed.find("mixed") != std::string::npos);
  CHECK_FALSE(error_of("{\"correct\":true}\n").empty());
  CHECK_FALSE(error_of("{\"query_id\":\"q\",\"correct\":1}\n").empty());
  CHECK_FALSE(error_of("{\"query_id\":\"q\",\"n\":4}\n").empty());
  CHECK_FALSE(error_of("{\"query_id\":\"q\",\"n\":4,\"c\":1}\n{\"query_id\":\"q\",\"n\":4,\"c\":2}\n").empty());
}

TEST_CASE("ingest_log reads files") {
  const auto path = std::filesystem::temp_directory_path() / "agrae_test_passk.jsonl";
  {
    std::ofstream f(path);
    f << "{\"query_id\":\"x\",\"n\":4,\"c\":2}\n";
  }
  const auto recs = ingest_log(path);
  std::filesystem::remove(path);
  REQUIRE(recs.size() == 1);
  CHECK(passk_aggregate(recs, 2) == Approx(5.0 / 6));
  CHECK_THROWS(ingest_log(path));
}

namespace {

double binomial_pmf(int n, int c, double q) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(c + 1.0) - std::lgamma(n - c + 1.0) + c * std::log(q) +
                  (n - c) * std::log1p(-q));
}

}  // namespace

TEST_CASE("expectation over the binomial equals 1 - (1-q)^k exactly") {
  for (int n : {8, 32, 100})
    for (double q : {0.05, 0.3, 0.5, 0.9})
      for (int k = 1; k <= n; k += 3) {
        double e = 0;
        for (int c = 0; c <= n; ++c) e += binomial_pmf(n, c, q) * passk_single(n, c, k);
        CHECK(e == doctest::Approx(1 - std::pow(1 - q, k)).epsilon(1e-12));
      }
}

TEST_CASE("unbiasedness under binomial sampling") {
  std::mt19937_64 rng(20240501);
  const int n = 32, draws = 20000;
  for (double q : {0.1, 0.3, 0.7}) {
    std::binomial_distribution<int> binom_draw(n, q);
    std::vector<int> cs(draws);
    for (int& c : cs) c = binom_draw(rng);
    for (int k : {1, 4, 16}) {
      double sum = 0;
      for (int c : cs) sum += passk_single(n, c, k);
      // Exact standard error: the sample one degenerates when almost every
      // draw returns the same value.
      double m1 = 0, m2 = 0;
      for (int c = 0; c <= n; ++c) {
        const double v = passk_single(n, c, k);
        m1 += binomial_pmf(n, c, q) * v;
        m2 += binomial_pmf(n, c, q) * v * v;
      }
      const double se = std::sqrt(std::max(m2 - m1 * m1, 0.0) / draws);
      const double truth = 1 - std::pow(1 - q, k);
      CHECK(std::abs(sum / draws - truth) <= 3 * se + 1e-12);
    }
  }
}
