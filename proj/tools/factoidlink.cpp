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

// Command-line driver: one subcommand per pipeline stage plus "pipeline"
// (all stages) and "synth" (synthetic benchmark networks).

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "factoidlink/factoidlink.hpp"

namespace {

using factoidlink::PipelineConfig;

enum ExitCode { kOk = 0, kInputError = 2, kDivergence = 3 };

void add_network_flags(CLI::App* cmd, PipelineConfig& cfg, std::string& preds) {
  cmd->add_option("--source-users", cfg.source_users, "Source users JSONL");
  cmd->add_option("--source-edges", cfg.source_edges, "Source follower,followee CSV");
  cmd->add_option("--target-users", cfg.target_users, "Target users JSONL");
  cmd->add_option("--target-edges", cfg.target_edges, "Target follower,followee CSV");
  cmd->add_flag("--source-undirected", cfg.source_undirected, "Source edges are friendships (add reverse)");
  cmd->add_flag("--target-undirected", cfg.target_undirected, "Target edges are friendships (add reverse)");
  cmd->add_option("--preds", preds, "User-object predicates, comma separated")->capture_default_str();
  cmd->add_option("--anchors", cfg.anchors, "Known matches source_id,target_id CSV (semi-supervised)");
}

void add_object_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--dim-obj", cfg.object.dim, "Object embedding dimension")->capture_default_str();
  cmd->add_option("--obj-epochs", cfg.object.epochs, "Object embedding epochs")->capture_default_str();
  cmd->add_option("--obj-lr", cfg.object.learning_rate, "Object embedding initial learning rate")
      ->capture_default_str();
  cmd->add_option("--lsh-tables", cfg.lsh.tables, "LSH tables for vector predicates")->capture_default_str();
  cmd->add_option("--lsh-bits", cfg.lsh.bits, "LSH bits per table")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--dim-user", cfg.factoid.dim, "User embedding dimension")->capture_default_str();
  cmd->add_option("--neg", cfg.factoid.negatives, "Negative samples K per factoid")->capture_default_str();
  cmd->add_option("--epochs", cfg.factoid.epochs, "Factoid embedding epochs")->capture_default_str();
  cmd->add_option("--batch", cfg.factoid.batch_size, "Factoids per batch")->capture_default_str();
  cmd->add_option("--lr", cfg.factoid.learning_rate, "Factoid embedding initial learning rate")
      ->capture_default_str();
  cmd->add_option("--norm-cap", cfg.factoid.norm_cap, "Frobenius norm cap C on projections")
      ->capture_default_str();
  cmd->add_option("--w-period", cfg.factoid.w_update_period, "Batches between projection updates")
      ->capture_default_str();
}

void add_common_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "Global seed")->capture_default_str();
  cmd->add_option("--out-dir", cfg.out_dir, "Stage file directory")->capture_default_str();
  cmd->add_flag("-v,--verbose", cfg.verbose, "Stage progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factoidlink: unsupervised user identity linkage by factoid embedding"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::string preds = "username,screen_name,image";
  std::string truth;
  std::size_t top_k = cfg.top_k;
  bool with_baseline = false;
  factoidlink::SyntheticParams synth;
  double mean_degree = 8.0;

  auto* ingest = app.add_subcommand("ingest", "Load both networks and write the unified factoid snapshot");
  add_network_flags(ingest, cfg, preds);
  add_common_flags(ingest, cfg);

  auto* sim = app.add_subcommand("sim", "Build per-predicate sparse similarity matrices");
  add_object_flags(sim, cfg);
  add_common_flags(sim, cfg);

  auto* embed = app.add_subcommand("embed-objects", "Embed objects from the similarity matrices");
  add_object_flags(embed, cfg);
  add_common_flags(embed, cfg);

  auto* trn = app.add_subcommand("train", "Learn user embeddings from factoids");
  add_train_flags(trn, cfg);
  add_common_flags(trn, cfg);

  auto* link = app.add_subcommand("link", "Rank target users for every source user");
  link->add_option("--top-k", top_k, "Rows per source in rankings.csv (0 = all)")->capture_default_str();
  add_common_flags(link, cfg);

  auto* eval = app.add_subcommand("eval", "HR@K and MRR against ground truth");
  eval->add_option("--truth", truth, "Ground truth source_id,target_id CSV")->required();
  eval->add_flag("--with-baseline", with_baseline, "Also score the Name baseline (needs network flags)");
  add_network_flags(eval, cfg, preds);
  add_common_flags(eval, cfg);

  auto* syn = app.add_subcommand("synth", "Generate a synthetic network pair with ground truth");
  syn->add_option("--n-users", synth.n_users, "People in the latent population")->capture_default_str();
  syn->add_option("--mean-degree", mean_degree, "Mean out-degree of the latent graph")->capture_default_str();
  syn->add_option("--overlap", synth.overlap_frac, "Per-view edge keep probability")->capture_default_str();
  syn->add_option("--name-noise", synth.name_noise, "Per-view name perturbation probability")
      ->capture_default_str();
  syn->add_option("--feature-dim", synth.feature_dim, "Image feature dimension")->capture_default_str();
  syn->add_option("--feature-noise", synth.feature_noise, "Per-view feature noise norm")->capture_default_str();
  add_common_flags(syn, cfg);

  auto* pipe = app.add_subcommand("pipeline", "Run ingest, sim, embed-objects, train, link and eval");
  add_network_flags(pipe, cfg, preds);
  add_object_flags(pipe, cfg);
  add_train_flags(pipe, cfg);
  pipe->add_option("--top-k", top_k, "Rows per source in rankings.csv (0 = all)")->capture_default_str();
  pipe->add_option("--truth", truth, "Ground truth CSV; enables eval and the Name baseline");
  add_common_flags(pipe, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    cfg.predicates = factoidlink::parse_predicate_list(preds);
    cfg.top_k = top_k;
    if (!truth.empty()) cfg.truth = truth;
    using namespace factoidlink::detail;
    if (ingest->parsed()) {
      run_stage("ingest", [&] { return factoidlink::stage_ingest(cfg); });
    } else if (sim->parsed()) {
      run_stage("sim", [&] { return factoidlink::stage_sim(cfg); });
    } else if (embed->parsed()) {
      run_stage("embed-objects", [&] { return factoidlink::stage_embed_objects(cfg); });
    } else if (trn->parsed()) {
      run_stage("train", [&] { return factoidlink::stage_train(cfg); });
    } else if (link->parsed()) {
      run_stage("link", [&] { return factoidlink::stage_link(cfg); });
    } else if (eval->parsed()) {
      const auto m = run_stage("eval", [&] { return factoidlink::stage_eval(cfg); });
      std::cout << m.to_json().dump(2) << '\n';
      if (with_baseline) run_stage("baseline", [&] { return factoidlink::stage_baseline(cfg); });
    } else if (syn->parsed()) {
      synth.seed = factoidlink::derive_seed(cfg.seed, "synth");
      synth.edge_prob = factoidlink::edge_prob_for_mean_degree(synth.n_users, mean_degree);
      run_stage("synth", [&] { return factoidlink::write_synthetic(synth, cfg.out_dir); });
    } else if (pipe->parsed()) {
      const auto result = factoidlink::run_pipeline(cfg);
      if (result.metrics) std::cout << result.metrics->to_json().dump(2) << '\n';
    }
  } catch (const factoidlink::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const factoidlink::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
