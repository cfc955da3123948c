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
#include <numeric>
#include <string>
#include <vector>

#include "factoidlink/embedding_table.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/random.hpp"
#include "factoidlink/similarity.hpp"

namespace factoidlink {

struct ObjectTrainConfig {
  std::size_t dim = 32;
  double learning_rate = 0.05;
  double final_learning_rate = 0.001;  // linear decay target
  int epochs = 100;
  std::uint64_t seed = 0;
  /// Initial entries are uniform in [-init_scale/sqrt(m), init_scale/sqrt(m)].
  double init_scale = 0.5;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("object dim must be >= 1");
    if (!(learning_rate > 0) || !(final_learning_rate > 0)) {
      throw std::invalid_argument("object learning rate must be > 0");
    }
    if (epochs < 0) throw std::invalid_argument("object epochs must be >= 0");
  }
};

struct ObjectEmbedding {
  EmbeddingTable table;             // row i is object i of the catalog
  std::vector<double> epoch_loss;   // reconstruction error after each epoch
};

/// sum over all ordered (i, j) present in the symmetric matrix of
/// (v_i . v_j - S_ij)^2: each stored off-diagonal entry counts twice, each
/// diagonal term (S_ii = 1) once.
inline double reconstruction_error(const SparseSimilarityMatrix& s, const EmbeddingTable& table) {
  if (table.size() < s.n) {
    throw InputError("reconstruction_error: table has " + std::to_string(table.size()) + " rows, matrix needs " +
                     std::to_string(s.n));
  }
  double err = 0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double r = dot(table.row(i), table.row(i)) - 1.0;
    err += r * r;
  }
  for (const auto& e : s.entries) {
    const double r = dot(table.row(e.i), table.row(e.j)) - e.s;
    err += 2.0 * r * r;
  }
  return err;
}

/// Fits object vectors so that v_i . v_j approximates S_ij on the stored
/// entries and |v_i|^2 approximates 1, by SGD over a shuffled entry list.
inline ObjectEmbedding embed_objects(const SparseSimilarityMatrix& s, const ObjectTrainConfig& cfg) {
  cfg.validate();
  if (s.n == 0) throw InputError("embed_objects: predicate '" + s.predicate + "' has no objects");

  Rng rng(cfg.seed);
  ObjectEmbedding out{EmbeddingTable(cfg.dim), {}};
  const double half_width = cfg.init_scale / std::sqrt(static_cast<double>(cfg.dim));
  for (std::size_t i = 0; i < s.n; ++i) {
    const std::size_t r = out.table.add_row(std::to_string(i));
    for (double& x : out.table.row(r)) x = uniform(rng, -half_width, half_width);
  }

  // Entries 0..n-1 are the diagonal; the rest index s.entries.
  std::vector<std::size_t> order(s.n + s.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> vi_old(cfg.dim);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double eta = cfg.learning_rate + (cfg.final_learning_rate - cfg.learning_rate) * progress;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k : order) {
      if (k < s.n) {
        auto v = out.table.row(k);
        const double r = dot(v, v) - 1.0;
        for (double& x : v) x -= eta * r * x;
        continue;
      }
      const auto& e = s.entries[k - s.n];
      auto vi = out.table.row(e.i);
      auto vj = out.table.row(e.j);
      const double r = dot(vi, vj) - e.s;
      std::copy(vi.begin(), vi.end(), vi_old.begin());
      for (std::size_t d = 0; d < cfg.dim; ++d) vi[d] -= eta * r * vj[d];
      for (std::size_t d = 0; d < cfg.dim; ++d) vj[d] -= eta * r * vi_old[d];
    }
    const double loss = reconstruction_error(s, out.table);
    if (!std::isfinite(loss)) {
      throw DivergenceError("object embedding for '" + s.predicate + "' diverged at epoch " +
                            std::to_string(epoch + 1));
    }
    out.epoch_loss.push_back(loss);
  }
  return out;
}

}  // namespace factoidlink
