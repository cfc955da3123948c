/*
 * Copyright 2026 The factoidlink Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "factoidlink/core_model.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/parallel.hpp"
#include "factoidlink/random.hpp"
#include "factoidlink/text.hpp"

namespace factoidlink {

struct SimilarityEntry {
  std::uint32_t i;
  std::uint32_t j;
  double s;

  friend bool operator==(const SimilarityEntry&, const SimilarityEntry&) = default;
};

/// Symmetric sparse matrix over O_pred. Only i < j is stored, sorted; the
/// diagonal is implicitly 1.
struct SparseSimilarityMatrix {
  std::string predicate;
  std::size_t n = 0;
  std::vector<SimilarityEntry> entries;
};

/// Sorted, duplicate-free pairs with i < j.
using CandidatePairs = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// ---------------------------------------------------------------------------
// Similarity functions

/// Jaro-Winkler over code points: prefix scale 0.1, prefix capped at 4.
/// Case-sensitive; callers lowercase first when they want that.
inline double jaro_winkler(std::u32string_view a, std::u32string_view b) {
  if (a == b) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t window = std::max(a.size(), b.size()) / 2 == 0
                                 ? 0
                                 : std::max(a.size(), b.size()) / 2 - 1;
  std::vector<char> a_hit(a.size(), 0), b_hit(b.size(), 0);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(b.size(), i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!b_hit[j] && a[i] == b[j]) {
        a_hit[i] = b_hit[j] = 1;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  std::size_t half_transpositions = 0;
  for (std::size_t i = 0, j = 0; i < a.size(); ++i) {
    if (!a_hit[i]) continue;
    while (!b_hit[j]) ++j;
    if (a[i] != b[j]) ++half_transpositions;
    ++j;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(half_transpositions / 2);
  const double jaro = (m / static_cast<double>(a.size()) + m / static_cast<double>(b.size()) + (m - t) / m) / 3.0;
  std::size_t prefix = 0;
  while (prefix < 4 && prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  return jaro + static_cast<double>(prefix) * 0.1 * (1.0 - jaro);
}

inline double jaro_winkler(std::string_view a, std::string_view b) {
  return jaro_winkler(text::code_points(a), text::code_points(b));
}

inline double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch (" + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()) + ")");
  }
  double dot = 0, xx = 0, yy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    dot += x[k] * y[k];
    xx += x[k] * x[k];
    yy += y[k] * y[k];
  }
  if (xx == 0.0 || yy == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(xx) * std::sqrt(yy)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Blocking

namespace detail {

inline void emit_bucket_pairs(const std::vector<std::uint32_t>& bucket, CandidatePairs& out) {
  for (std::size_t x = 0; x < bucket.size(); ++x) {
    for (std::size_t y = x + 1; y < bucket.size(); ++y) {
      out.emplace_back(std::min(bucket[x], bucket[y]), std::max(bucket[x], bucket[y]));
    }
  }
}

inline void canonicalize(CandidatePairs& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

}  // namespace detail

/// Pairs of strings sharing at least one lowercased character trigram.
/// Strings shorter than three code points are bucketed by their whole text.
inline CandidatePairs trigram_candidate_pairs(std::span<const std::string> objects) {
  std::map<std::u32string, std::vector<std::uint32_t>> index;
  for (std::uint32_t i = 0; i < objects.size(); ++i) {
    const std::u32string s = text::lowercase_code_points(objects[i]);
    if (s.size() < 3) {
      index[U"\U0010FFFF" + s].push_back(i);  // separate namespace for whole-text keys
      continue;
    }
    std::vector<std::u32string> grams;
    for (std::size_t k = 0; k + 3 <= s.size(); ++k) grams.push_back(s.substr(k, 3));
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) index[std::move(g)].push_back(i);
  }
  CandidatePairs pairs;
  for (const auto& [key, bucket] : index) detail::emit_bucket_pairs(bucket, pairs);
  detail::canonicalize(pairs);
  return pairs;
}

struct LshParams {
  int tables = 16;
  int bits = 8;
  std::uint64_t seed = 0;
};

/// Random-hyperplane LSH: a pair is a candidate iff its sign signatures agree
/// in at least one table.
inline CandidatePairs lsh_candidate_pairs(const std::vector<std::vector<double>>& vectors, int tables,
                                          int bits, std::uint64_t seed) {
  if (tables < 1 || bits < 1 || bits > 64) {
    throw std::invalid_argument("lsh_candidate_pairs: need tables >= 1 and 1 <= bits <= 64");
  }
  CandidatePairs pairs;
  if (vectors.size() < 2) return pairs;
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::invalid_argument("lsh_candidate_pairs: mixed dimensionality");
  }
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < tables; ++t) {
    std::vector<double> planes(static_cast<std::size_t>(bits) * dim);
    for (auto& x : planes) x = gauss(rng);
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    for (std::uint32_t i = 0; i < vectors.size(); ++i) {
      std::uint64_t sig = 0;
      for (int b = 0; b < bits; ++b) {
        double dot = 0;
        for (std::size_t k = 0; k < dim; ++k) dot += planes[static_cast<std::size_t>(b) * dim + k] * vectors[i][k];
        if (dot >= 0) sig |= std::uint64_t{1} << b;
      }
      buckets[sig].push_back(i);
    }
    for (const auto& [sig, bucket] : buckets) detail::emit_bucket_pairs(bucket, pairs);
  }
  detail::canonicalize(pairs);
  return pairs;
}

/// Candidate pairs for a catalog, dispatching on the object kind.
inline CandidatePairs block_catalog(const ObjectCatalog& catalog, const LshParams& lsh) {
  if (catalog.predicate.kind == ObjectKind::kText) {
    std::vector<std::string> texts;
    texts.reserve(catalog.objects.size());
    for (const auto& o : catalog.objects) texts.push_back(o.as_text());
    return trigram_candidate_pairs(texts);
  }
  std::vector<std::vector<double>> vecs;
  vecs.reserve(catalog.objects.size());
  for (const auto& o : catalog.objects) vecs.push_back(o.as_features());
  return lsh_candidate_pairs(vecs, lsh.tables, lsh.bits, lsh.seed);
}

// ---------------------------------------------------------------------------
// Matrix assembly

/// Scores every candidate pair. Text objects: 2 * jaro_winkler - 1 on
/// lowercased strings. Vector objects: cosine similarity.
inline SparseSimilarityMatrix build_similarity_matrix(const ObjectCatalog& catalog,
                                                      const CandidatePairs& candidates) {
  SparseSimilarityMatrix m;
  m.predicate = catalog.predicate.name;
  m.n = catalog.objects.size();
  const bool is_text = catalog.predicate.kind == ObjectKind::kText;
  std::vector<std::u32string> lowered;
  if (is_text) {
    lowered.reserve(m.n);
    for (const auto& o : catalog.objects) lowered.push_back(text::lowercase_code_points(o.as_text()));
  }
  for (const auto& [i, j] : candidates) {
    if (i >= j || j >= m.n) {
      throw std::invalid_argument("build_similarity_matrix: candidate pair (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") out of range");
    }
  }
  m.entries.resize(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t k) {
    const auto [i, j] = candidates[k];
    double s = is_text ? 2.0 * jaro_winkler(lowered[i], lowered[j]) - 1.0
                       : cosine_similarity(catalog.objects[i].as_features(), catalog.objects[j].as_features());
    m.entries[k] = SimilarityEntry{i, j, std::clamp(s, -1.0, 1.0)};
  });
  // candidates are canonical, so entries are already sorted by (i, j)
  return m;
}

// ---------------------------------------------------------------------------
// Persistence: "# pred=<name> n=<count>" then i,j,s rows.

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  double x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError("bad number '" + std::string(s) + "' in " + std::string(what));
  }
  return x;
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  std::uint64_t x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError("bad count '" + std::string(s) + "' in " + std::string(what));
  }
  return x;
}

}  // namespace detail

inline void write_similarity_csv(std::ostream& out, const SparseSimilarityMatrix& m) {
  out << "# pred=" << m.predicate << " n=" << m.n << '\n';
  for (const auto& e : m.entries) out << e.i << ',' << e.j << ',' << detail::format_double(e.s) << '\n';
}

inline SparseSimilarityMatrix read_similarity_csv(std::istream& in, std::string_view origin = "similarity") {
  SparseSimilarityMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw InputError(std::string(origin) + ": empty similarity file");
  {
    std::istringstream header(line);
    std::string hash, pred, count;
    header >> hash >> pred >> count;
    if (hash != "#" || pred.rfind("pred=", 0) != 0 || count.rfind("n=", 0) != 0) {
      throw InputError(std::string(origin) + ":1: expected '# pred=<name> n=<count>'");
    }
    m.predicate = pred.substr(5);
    m.n = detail::parse_uint(count.substr(2), origin);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim_ascii(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3) throw InputError(detail::location(origin, lineno) + "expected i,j,s");
    const auto i = detail::parse_uint(fields[0], origin);
    const auto j = detail::parse_uint(fields[1], origin);
    const double s = detail::parse_double(fields[2], origin);
    if (i >= j || j >= m.n || !(s >= -1.0 && s <= 1.0)) {
      throw InputError(detail::location(origin, lineno) + "entry out of range");
    }
    m.entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  return m;
}

}  // namespace factoidlink
