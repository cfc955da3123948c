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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factoidlink/core_model.hpp"
#include "factoidlink/embedding_table.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/factoid_embedding.hpp"
#include "factoidlink/linkage_eval.hpp"
#include "factoidlink/object_embedding.hpp"
#include "factoidlink/random.hpp"
#include "factoidlink/similarity.hpp"
#include "factoidlink/synthetic.hpp"

namespace factoidlink {

/// Everything one pipeline run needs. Stage seeds are derived from `seed`
/// by stage name.
struct PipelineConfig {
  std::string source_users, source_edges, target_users, target_edges;
  bool source_undirected = false;
  bool target_undirected = false;
  std::vector<PredicateSpec> predicates = known_predicates();
  std::optional<std::string> anchors;
  std::optional<std::string> truth;
  ObjectTrainConfig object;
  FactoidTrainConfig factoid;
  LshParams lsh;
  std::size_t top_k = 30;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  bool verbose = false;
};

/// File layout inside the output directory.
struct PipelinePaths {
  std::filesystem::path dir;
  std::filesystem::path unified() const { return dir / "unified.jsonl"; }
  std::filesystem::path similarity(const std::string& pred) const { return dir / ("sim_" + pred + ".csv"); }
  std::filesystem::path objects(const std::string& pred) const { return dir / ("obj_" + pred + ".emb"); }
  std::filesystem::path object_report() const { return dir / "object_report.json"; }
  std::filesystem::path users() const { return dir / "users.emb"; }
  std::filesystem::path train_report() const { return dir / "train_report.json"; }
  std::filesystem::path rankings() const { return dir / "rankings.csv"; }
  std::filesystem::path metrics() const { return dir / "metrics.json"; }
  std::filesystem::path baseline_metrics() const { return dir / "baseline_metrics.json"; }
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

inline std::ifstream open_existing(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing stage input '" + path.string() + "'");
  return in;
}

inline void log(const PipelineConfig& cfg, const std::string& msg) {
  if (cfg.verbose) std::cerr << msg << '\n';
}

inline void require(const std::string& path, const char* flag) {
  if (path.empty()) throw InputError(std::string("missing required ") + flag);
}

}  // namespace detail

inline UnifiedNetwork read_unified(const std::filesystem::path& path) {
  auto in = detail::open_existing(path);
  return read_snapshot(in, path.string());
}

inline EmbeddingTable read_embedding_file(const std::filesystem::path& path) {
  auto in = detail::open_existing(path);
  return read_embedding(in, path.string());
}

inline std::pair<SocialNetwork, SocialNetwork> load_networks(const PipelineConfig& cfg) {
  detail::require(cfg.source_users, "--source-users");
  detail::require(cfg.target_users, "--target-users");
  return {load_network(cfg.source_users, cfg.source_edges, "source", LoadOptions{cfg.source_undirected}),
          load_network(cfg.target_users, cfg.target_edges, "target", LoadOptions{cfg.target_undirected})};
}

// ---------------------------------------------------------------------------
// Stages

inline UnifiedNetwork stage_ingest(const PipelineConfig& cfg) {
  const auto [source, target] = load_networks(cfg);
  UnifiedNetwork net = build_unified_network(source, target, cfg.predicates);
  if (cfg.anchors) net = merge_anchor_pairs(net, load_pairs(*cfg.anchors));
  auto out = detail::open_output(PipelinePaths{cfg.out_dir}.unified());
  write_snapshot(out, net);
  detail::log(cfg, "[ingest] " + std::to_string(net.node_count()) + " nodes, " + std::to_string(net.factoids.size()) +
                       " factoids");
  return net;
}

inline std::map<std::string, SparseSimilarityMatrix> stage_sim(const PipelineConfig& cfg) {
  const PipelinePaths paths{cfg.out_dir};
  const UnifiedNetwork net = read_unified(paths.unified());
  std::map<std::string, SparseSimilarityMatrix> out;
  for (const auto& cat : net.catalogs) {
    if (cat.objects.empty()) continue;
    LshParams lsh = cfg.lsh;
    lsh.seed = derive_seed(cfg.seed, "sim:" + cat.predicate.name);
    const auto candidates = block_catalog(cat, lsh);
    auto m = build_similarity_matrix(cat, candidates);
    auto file = detail::open_output(paths.similarity(cat.predicate.name));
    write_similarity_csv(file, m);
    detail::log(cfg, "[sim] " + cat.predicate.name + ": " + std::to_string(m.n) + " objects, " +
                         std::to_string(m.entries.size()) + " stored pairs");
    out.emplace(cat.predicate.name, std::move(m));
  }
  return out;
}

inline std::map<std::string, EmbeddingTable> stage_embed_objects(const PipelineConfig& cfg) {
  const PipelinePaths paths{cfg.out_dir};
  const UnifiedNetwork net = read_unified(paths.unified());
  std::map<std::string, EmbeddingTable> out;
  nlohmann::json report = nlohmann::json::object();
  for (const auto& cat : net.catalogs) {
    if (cat.objects.empty()) continue;
    auto in = detail::open_existing(paths.similarity(cat.predicate.name));
    const auto s = read_similarity_csv(in, paths.similarity(cat.predicate.name).string());
    if (s.n != cat.objects.size()) {
      throw InputError("similarity matrix for '" + cat.predicate.name + "' does not match the catalog");
    }
    ObjectTrainConfig oc = cfg.object;
    oc.seed = derive_seed(cfg.seed, "embed-objects:" + cat.predicate.name);
    auto emb = embed_objects(s, oc);
    report[cat.predicate.name] = {{"n", s.n},
                                  {"stored_pairs", s.entries.size()},
                                  {"final_loss", emb.epoch_loss.empty() ? reconstruction_error(s, emb.table)
                                                                        : emb.epoch_loss.back()},
                                  {"epochs", oc.epochs},
                                  {"dim", oc.dim},
                                  {"seed", oc.seed}};
    auto file = detail::open_output(paths.objects(cat.predicate.name));
    write_embedding(file, emb.table);
    detail::log(cfg, "[embed-objects] " + cat.predicate.name + ": final loss " +
                         std::to_string(report[cat.predicate.name]["final_loss"].get<double>()));
    out.emplace(cat.predicate.name, std::move(emb.table));
  }
  auto file = detail::open_output(paths.object_report());
  file << report.dump(2) << '\n';
  return out;
}

inline EmbeddingTable stage_train(const PipelineConfig& cfg) {
  const PipelinePaths paths{cfg.out_dir};
  const UnifiedNetwork net = read_unified(paths.unified());
  std::map<std::string, EmbeddingTable> tables;
  for (const auto& cat : net.catalogs) {
    if (cat.objects.empty()) continue;
    tables.emplace(cat.predicate.name, read_embedding_file(paths.objects(cat.predicate.name)));
  }
  FactoidTrainConfig fc = cfg.factoid;
  fc.seed = derive_seed(cfg.seed, "train");
  const auto result = train(net, tables, fc);
  EmbeddingTable identities = identity_table(net, result.users);
  {
    auto file = detail::open_output(paths.users());
    write_embedding(file, identities);
  }
  {
    nlohmann::json report = result.report.to_json();
    report["global_seed"] = cfg.seed;
    auto file = detail::open_output(paths.train_report());
    file << report.dump(2) << '\n';
  }
  detail::log(cfg, "[train] " + std::to_string(result.report.updates) + " updates");
  return identities;
}

inline std::vector<RankingResult> stage_link(const PipelineConfig& cfg) {
  const PipelinePaths paths{cfg.out_dir};
  const EmbeddingTable identities = read_embedding_file(paths.users());
  auto rankings = rank_all(identities, source_ids(identities));
  auto file = detail::open_output(paths.rankings());
  write_rankings_csv(file, rankings, cfg.top_k);
  detail::log(cfg, "[link] ranked " + std::to_string(rankings.size()) + " source users");
  return rankings;
}

inline void write_metrics(const std::filesystem::path& path, const Metrics& m) {
  auto file = detail::open_output(path);
  file << m.to_json().dump(2) << '\n';
}

/// Metrics of the learned embeddings against ground truth. Ranks are exact
/// (full target list), independent of --top-k.
inline Metrics stage_eval(const PipelineConfig& cfg) {
  if (!cfg.truth) throw InputError("eval needs --truth");
  const PipelinePaths paths{cfg.out_dir};
  const EmbeddingTable identities = read_embedding_file(paths.users());
  const GroundTruth truth = load_truth(*cfg.truth);
  std::vector<std::string> sources;
  for (const auto& [s, t] : truth.pairs) sources.push_back(s);
  const Metrics m = compute_metrics(rank_all(identities, sources), truth);
  write_metrics(paths.metrics(), m);
  detail::log(cfg, "[eval] HR@1 " + std::to_string(m.hr_at_k.at(1)) + " MRR " + std::to_string(m.mrr));
  return m;
}

/// Name baseline on the best-scoring text predicate (by MRR).
inline Metrics stage_baseline(const PipelineConfig& cfg) {
  if (!cfg.truth) throw InputError("baseline needs --truth");
  const auto [source, target] = load_networks(cfg);
  const GroundTruth truth = load_truth(*cfg.truth);
  std::optional<Metrics> best;
  std::string best_pred;
  for (const auto& p : cfg.predicates) {
    if (p.kind != ObjectKind::kText) continue;
    Metrics m = compute_metrics(name_baseline(source, target, p), truth);
    if (!best || m.mrr > best->mrr) {
      best = m;
      best_pred = p.name;
    }
  }
  if (!best) throw InputError("baseline needs a text predicate");
  auto j = best->to_json();
  j["predicate"] = best_pred;
  auto file = detail::open_output(PipelinePaths{cfg.out_dir}.baseline_metrics());
  file << j.dump(2) << '\n';
  return *best;
}

namespace detail {

template <class Fn>
auto run_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("stage '") + name + "': " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string("stage '") + name + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("stage '") + name + "': " + e.what());
  }
}

}  // namespace detail

struct PipelineResult {
  std::optional<Metrics> metrics;
  std::optional<Metrics> baseline;
};

/// ingest -> sim -> embed-objects -> train -> link -> eval; every stage
/// reads its inputs back from the files the previous stage wrote.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  detail::run_stage("ingest", [&] { return stage_ingest(cfg); });
  detail::run_stage("sim", [&] { return stage_sim(cfg); });
  detail::run_stage("embed-objects", [&] { return stage_embed_objects(cfg); });
  detail::run_stage("train", [&] { return stage_train(cfg); });
  detail::run_stage("link", [&] { return stage_link(cfg); });
  PipelineResult result;
  if (cfg.truth) {
    result.metrics = detail::run_stage("eval", [&] { return stage_eval(cfg); });
    const bool has_text = std::any_of(cfg.predicates.begin(), cfg.predicates.end(),
                                      [](const PredicateSpec& p) { return p.kind == ObjectKind::kText; });
    if (has_text) result.baseline = detail::run_stage("baseline", [&] { return stage_baseline(cfg); });
  }
  return result;
}

/// Writes a synthetic pair as the four network files plus truth.csv.
inline SyntheticPair write_synthetic(const SyntheticParams& params, const std::filesystem::path& dir) {
  auto pair = generate_synthetic_pair(params);
  {
    auto f = detail::open_output(dir / "source_users.jsonl");
    write_users_jsonl(f, pair.source);
  }
  {
    auto f = detail::open_output(dir / "source_edges.csv");
    write_pairs_csv(f, pair.source.edges);
  }
  {
    auto f = detail::open_output(dir / "target_users.jsonl");
    write_users_jsonl(f, pair.target);
  }
  {
    auto f = detail::open_output(dir / "target_edges.csv");
    write_pairs_csv(f, pair.target.edges);
  }
  {
    auto f = detail::open_output(dir / "truth.csv");
    write_pairs_csv(f, pair.truth.pairs);
  }
  return pair;
}

}  // namespace factoidlink
