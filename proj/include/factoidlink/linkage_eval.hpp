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
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "factoidlink/core_model.hpp"
#include "factoidlink/embedding_table.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/parallel.hpp"
#include "factoidlink/similarity.hpp"
#include "factoidlink/text.hpp"

namespace factoidlink {

/// Target candidates for one source user, best first. Ids are local ids.
struct RankingResult {
  std::string source_id;
  std::vector<std::pair<std::string, double>> ranked;  // (target id, score)
};

struct GroundTruth {
  std::vector<std::pair<std::string, std::string>> pairs;  // (source id, target id)
};

inline const std::vector<int>& default_k_grid() {
  static const std::vector<int> grid = {1, 2, 3, 4, 5, 10, 30};
  return grid;
}

struct Metrics {
  std::map<int, double> hr_at_k;
  double mrr = 0;
  std::size_t n_pairs = 0;
  std::size_t n_missing = 0;

  nlohmann::json to_json() const {
    nlohmann::json hr = nlohmann::json::object();
    for (const auto& [k, v] : hr_at_k) hr[std::to_string(k)] = v;
    return {{"hr", hr}, {"mrr", mrr}, {"n_pairs", n_pairs}, {"n_missing", n_missing}};
  }
};

/// Descending score, ties by ascending target id.
inline void sort_ranking(std::vector<std::pair<std::string, double>>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}

/// Cosine ranking over an identity table ("src:"/"tgt:" rows). Target
/// vectors are normalized once; zero vectors score 0 against everything.
class CosineRanker {
 public:
  explicit CosineRanker(const EmbeddingTable& identities) : table_(&identities) {
    for (std::size_t r = 0; r < identities.size(); ++r) {
      const std::string& id = identities.id(r);
      if (id.rfind("tgt:", 0) == 0) {
        target_ids_.push_back(id.substr(4));
        target_rows_.push_back(r);
        const double n = norm(identities.row(r));
        target_inv_norm_.push_back(n > 0 ? 1.0 / n : 0.0);
      }
    }
  }

  std::size_t target_count() const { return target_ids_.size(); }

  RankingResult rank(std::string_view source_local_id) const {
    const auto row = table_->find("src:" + std::string(source_local_id));
    if (!row) throw InputError("rank_targets: unknown source id '" + std::string(source_local_id) + "'");
    if (target_ids_.empty()) throw InputError("rank_targets: no target users");
    const auto v = table_->row(*row);
    const double vn = norm(v);
    const double inv = vn > 0 ? 1.0 / vn : 0.0;
    RankingResult out{std::string(source_local_id), {}};
    out.ranked.reserve(target_ids_.size());
    for (std::size_t t = 0; t < target_ids_.size(); ++t) {
      const double c = dot(v, table_->row(target_rows_[t])) * inv * target_inv_norm_[t];
      out.ranked.emplace_back(target_ids_[t], c);
    }
    sort_ranking(out.ranked);
    return out;
  }

 private:
  const EmbeddingTable* table_;
  std::vector<std::string> target_ids_;
  std::vector<std::size_t> target_rows_;
  std::vector<double> target_inv_norm_;
};

inline RankingResult rank_targets(std::string_view source_local_id, const EmbeddingTable& identities) {
  return CosineRanker(identities).rank(source_local_id);
}

/// Rankings for every listed source, computed in parallel.
inline std::vector<RankingResult> rank_all(const EmbeddingTable& identities, const std::vector<std::string>& sources) {
  const CosineRanker ranker(identities);
  std::vector<RankingResult> out(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) { out[i] = ranker.rank(sources[i]); });
  return out;
}

/// Every "src:" id in the table, in table order, without the prefix.
inline std::vector<std::string> source_ids(const EmbeddingTable& identities) {
  std::vector<std::string> out;
  for (const auto& id : identities.ids()) {
    if (id.rfind("src:", 0) == 0) out.push_back(id.substr(4));
  }
  return out;
}

/// HR@K and MRR against ground truth. A true target that is absent from
/// its ranking counts as a miss at both metrics and in n_missing.
inline Metrics compute_metrics(const std::vector<RankingResult>& rankings, const GroundTruth& truth,
                               const std::vector<int>& ks = default_k_grid()) {
  if (truth.pairs.empty()) throw InputError("compute_metrics: no ground-truth pairs");
  std::unordered_map<std::string_view, const RankingResult*> by_source;
  for (const auto& r : rankings) by_source.emplace(r.source_id, &r);

  Metrics m;
  m.n_pairs = truth.pairs.size();
  std::map<int, std::size_t> hits;
  for (int k : ks) hits[k] = 0;
  double reciprocal = 0;
  for (const auto& [src, tgt] : truth.pairs) {
    auto it = by_source.find(src);
    if (it == by_source.end()) throw InputError("compute_metrics: no ranking for source '" + src + "'");
    const auto& ranked = it->second->ranked;
    auto pos = std::find_if(ranked.begin(), ranked.end(), [&](const auto& e) { return e.first == tgt; });
    if (pos == ranked.end()) {
      ++m.n_missing;
      continue;
    }
    const auto rank = static_cast<std::size_t>(pos - ranked.begin()) + 1;
    reciprocal += 1.0 / static_cast<double>(rank);
    for (auto& [k, h] : hits) {
      if (rank <= static_cast<std::size_t>(k)) ++h;
    }
  }
  const double n = static_cast<double>(m.n_pairs);
  for (const auto& [k, h] : hits) m.hr_at_k[k] = static_cast<double>(h) / n;
  m.mrr = reciprocal / n;
  return m;
}

/// Ranks all target users by Jaro-Winkler similarity of one text attribute
/// (lowercased). Users without the attribute score 0.
inline std::vector<RankingResult> name_baseline(const SocialNetwork& source, const SocialNetwork& target,
                                                const PredicateSpec& predicate) {
  if (predicate.kind != ObjectKind::kText) {
    throw InputError("name_baseline: predicate '" + predicate.name + "' is not textual");
  }
  auto name_of = [&](const UserRecord& u) -> std::optional<std::u32string> {
    auto it = u.attributes.find(predicate.attribute_key);
    if (it == u.attributes.end()) return std::nullopt;
    return text::lowercase_code_points(it->second.as_text());
  };
  std::vector<std::optional<std::u32string>> target_names;
  target_names.reserve(target.users.size());
  for (const auto& u : target.users) target_names.push_back(name_of(u));

  std::vector<RankingResult> out(source.users.size());
  parallel_for(source.users.size(), [&](std::size_t i) {
    const auto& u = source.users[i];
    const auto name = name_of(u);
    RankingResult r{u.local_id, {}};
    r.ranked.reserve(target.users.size());
    for (std::size_t t = 0; t < target.users.size(); ++t) {
      const double s = (name && target_names[t]) ? jaro_winkler(*name, *target_names[t]) : 0.0;
      r.ranked.emplace_back(target.users[t].local_id, s);
    }
    sort_ranking(r.ranked);
    out[i] = std::move(r);
  });
  return out;
}

/// "source_id,rank,target_id,score" rows, top_k per source (0 = all).
inline void write_rankings_csv(std::ostream& out, const std::vector<RankingResult>& rankings, std::size_t top_k) {
  for (const auto& r : rankings) {
    const std::size_t n = top_k == 0 ? r.ranked.size() : std::min(top_k, r.ranked.size());
    for (std::size_t k = 0; k < n; ++k) {
      out << r.source_id << ',' << (k + 1) << ',' << r.ranked[k].first << ','
          << detail::format_double(r.ranked[k].second) << '\n';
    }
  }
}

inline GroundTruth load_truth(const std::string& path) { return GroundTruth{load_pairs(path)}; }

}  // namespace factoidlink
