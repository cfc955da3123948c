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
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "factoidlink/core_model.hpp"
#include "factoidlink/embedding_table.hpp"
#include "factoidlink/error.hpp"
#include "factoidlink/random.hpp"

namespace factoidlink {

// ---------------------------------------------------------------------------
// Projection phi(v) = W v + b with a Frobenius-norm cap on W.

struct ProjectionParams {
  std::string predicate;
  std::size_t rows = 0;  // user dimension
  std::size_t cols = 0;  // input (object or user) dimension
  std::vector<double> weights;  // row-major rows x cols
  std::vector<double> bias;     // rows
  double norm_cap = 1.0;

  /// Identity padded or truncated to rows x cols, scaled so that
  /// ||W||_F = min(cap, ||I||_F). Bias starts at zero.
  static ProjectionParams near_identity(std::string predicate, std::size_t rows, std::size_t cols, double cap) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("projection shape must be positive");
    if (!(cap > 0)) throw std::invalid_argument("projection norm cap must be > 0");
    ProjectionParams p{std::move(predicate), rows, cols, std::vector<double>(rows * cols, 0.0),
                       std::vector<double>(rows, 0.0), cap};
    const std::size_t diag = std::min(rows, cols);
    const double scale = std::min(cap, std::sqrt(static_cast<double>(diag))) / std::sqrt(static_cast<double>(diag));
    for (std::size_t k = 0; k < diag; ++k) p.weights[k * cols + k] = scale;
    return p;
  }

  double frobenius_norm() const { return std::sqrt(std::inner_product(weights.begin(), weights.end(), weights.begin(), 0.0)); }

  /// W <- W * (C / ||W||) when the cap is exceeded.
  void enforce_norm_cap() {
    const double n = frobenius_norm();
    if (n > norm_cap) {
      const double f = norm_cap / n;
      for (double& w : weights) w *= f;
    }
  }
};

inline void project_into(const ProjectionParams& p, std::span<const double> v, std::span<double> out) {
  if (v.size() != p.cols) {
    throw std::invalid_argument("project: input has dimension " + std::to_string(v.size()) + ", expected " +
                                std::to_string(p.cols));
  }
  for (std::size_t r = 0; r < p.rows; ++r) {
    const double* w = p.weights.data() + r * p.cols;
    double s = p.bias[r];
    for (std::size_t c = 0; c < p.cols; ++c) s += w[c] * v[c];
    out[r] = s;
  }
}

inline std::vector<double> project(const ProjectionParams& p, std::span<const double> v) {
  std::vector<double> out(p.rows);
  project_into(p, v, out);
  return out;
}

// ---------------------------------------------------------------------------
// Noise distributions for negative sampling.

enum class NoiseKind { kOutDegree, kUniform };

class NoiseDistribution {
 public:
  /// Normalizes non-negative weights. Throws when they sum to zero.
  static NoiseDistribution from_weights(NoiseKind kind, std::vector<double> weights) {
    double total = 0;
    for (double w : weights) {
      if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("noise weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0)) throw InputError("noise distribution has zero total weight");
    NoiseDistribution d;
    d.kind_ = kind;
    d.probability_.resize(weights.size());
    d.cumulative_.resize(weights.size());
    double run = 0;
    for (std::size_t u = 0; u < weights.size(); ++u) {
      d.probability_[u] = weights[u] / total;
      run += weights[u];
      d.cumulative_[u] = run / total;
    }
    d.cumulative_.back() = 1.0;
    return d;
  }

  /// P2: uniform over every node.
  static NoiseDistribution uniform(std::size_t n) { return from_weights(NoiseKind::kUniform, std::vector<double>(n, 1.0)); }

  /// P1: weight d_u^(3/4), d_u the out-degree over follows factoids.
  static NoiseDistribution out_degree(const UnifiedNetwork& net) {
    std::vector<double> degree(net.node_count(), 0.0);
    for (const auto& f : net.factoids) {
      if (f.is_user_user()) degree[f.subject] += 1.0;
    }
    for (double& d : degree) d = std::pow(d, 0.75);
    return from_weights(NoiseKind::kOutDegree, std::move(degree));
  }

  NoiseKind kind() const { return kind_; }
  std::size_t size() const { return probability_.size(); }
  double probability(NodeId u) const { return probability_.at(u); }
  const std::vector<double>& cumulative() const { return cumulative_; }

 private:
  NoiseKind kind_ = NoiseKind::kUniform;
  std::vector<double> probability_;
  std::vector<double> cumulative_;
};

inline NodeId sample_negative(const NoiseDistribution& dist, Rng& rng) {
  const auto& cdf = dist.cumulative();
  if (cdf.empty()) throw InputError("sample_negative: empty distribution");
  const double x = uniform01(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
  if (it == cdf.end()) --it;
  return static_cast<NodeId>(it - cdf.begin());
}

/// Redraws until the sample differs from `exclude`.
inline NodeId sample_negative_excluding(const NoiseDistribution& dist, Rng& rng, NodeId exclude) {
  if (exclude < dist.size() && dist.probability(exclude) >= 1.0) {
    throw InputError("sample_negative: the only node with noise mass is the factoid's own subject");
  }
  NodeId u;
  do {
    u = sample_negative(dist, rng);
  } while (u == exclude);
  return u;
}

// ---------------------------------------------------------------------------
// Objective and gradients

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow or cancellation.
inline double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

/// log s(z) and s(-z), the objective term and its derivative, sharing one exp.
struct LogisticTerm {
  double log_value;
  double slope;
};

inline LogisticTerm logistic_term(double z) {
  const double e = std::exp(-std::abs(z));
  const double l = std::log1p(e);
  if (z >= 0) return {-l, e / (1.0 + e)};
  return {z - l, 1.0 / (1.0 + e)};
}

/// log s(v_u . phi(v_o)) + sum_k log s(-v_k . phi(v_o)).
inline double score_user_object(std::span<const double> v_u, const ProjectionParams& params,
                                std::span<const double> v_o,
                                const std::vector<std::span<const double>>& negatives) {
  const auto phi = project(params, v_o);
  double f = log_sigmoid(dot(v_u, phi));
  for (const auto& neg : negatives) f += log_sigmoid(-dot(neg, phi));
  return f;
}

/// Partial derivatives of one factoid's negative-sampling objective. User
/// rows are merged by node so a node appearing twice gets the summed
/// gradient. Buffers are reused across factoid_gradient_into calls, so a
/// long-lived instance keeps updates allocation-free.
struct FactoidGradient {
  double objective = 0;
  std::vector<double> projected;    // phi(context)
  std::vector<double> d_projected;  // df/dphi, also df/db
  std::vector<double> d_context;    // W^T df/dphi, filled on request
  std::vector<double> context;      // copy of the context the gradient was taken at
  std::vector<NodeId> nodes;        // distinct participating users, first-seen order
  std::vector<double> rows;         // df/dv for nodes[k] at [k*dim, (k+1)*dim)
  std::size_t dim = 0;

  std::span<const double> row(std::size_t k) const { return {rows.data() + k * dim, dim}; }
  std::span<double> row(std::size_t k) { return {rows.data() + k * dim, dim}; }

  /// Gradient row of user `u`, added (zeroed) on first use.
  std::span<double> row_for(NodeId u) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] == u) return row(k);
    }
    nodes.push_back(u);
    rows.insert(rows.end(), dim, 0.0);
    return row(nodes.size() - 1);
  }

  void reset(std::size_t user_dim) {
    dim = user_dim;
    objective = 0;
    nodes.clear();
    rows.clear();
  }
};

inline void factoid_gradient_into(FactoidGradient& g, const EmbeddingTable& users, NodeId subject,
                                  std::span<const double> context, const ProjectionParams& params,
                                  std::span<const NodeId> negatives, bool want_context) {
  const std::size_t m = params.rows;
  if (users.dim() != m) throw std::invalid_argument("factoid_gradient: user dimension does not match projection");
  g.reset(m);
  g.context.assign(context.begin(), context.end());
  g.projected.resize(m);
  project_into(params, g.context, g.projected);
  g.d_projected.assign(m, 0.0);

  const auto v_i = users.row(subject);
  const auto pos = logistic_term(dot(v_i, g.projected));
  g.objective = pos.log_value;
  const double c_pos = pos.slope;
  {
    auto gi = g.row_for(subject);
    for (std::size_t d = 0; d < m; ++d) {
      gi[d] += c_pos * g.projected[d];
      g.d_projected[d] += c_pos * v_i[d];
    }
  }
  for (NodeId k : negatives) {
    const auto v_k = users.row(k);
    const auto neg = logistic_term(-dot(v_k, g.projected));
    g.objective += neg.log_value;
    const double c_neg = neg.slope;
    auto gk = g.row_for(k);
    for (std::size_t d = 0; d < m; ++d) {
      gk[d] -= c_neg * g.projected[d];
      g.d_projected[d] -= c_neg * v_k[d];
    }
  }
  if (want_context) {
    g.d_context.assign(params.cols, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const double* w = params.weights.data() + r * params.cols;
      const double a = g.d_projected[r];
      for (std::size_t c = 0; c < params.cols; ++c) g.d_context[c] += a * w[c];
    }
  } else {
    g.d_context.clear();
  }
}

inline FactoidGradient factoid_gradient(const EmbeddingTable& users, NodeId subject, std::span<const double> context,
                                        const ProjectionParams& params, std::span<const NodeId> negatives,
                                        bool want_context) {
  FactoidGradient g;
  factoid_gradient_into(g, users, subject, context, params, negatives, want_context);
  return g;
}

struct ProjectionAccumulator {
  std::vector<double> d_weights;
  std::vector<double> d_bias;
  std::size_t count = 0;

  explicit ProjectionAccumulator(const ProjectionParams& p = {})
      : d_weights(p.rows * p.cols, 0.0), d_bias(p.rows, 0.0) {}

  void add(std::span<const double> d_projected, std::span<const double> context) {
    const std::size_t cols = context.size();
    for (std::size_t r = 0; r < d_projected.size(); ++r) {
      const double a = d_projected[r];
      double* w = d_weights.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) w[c] += a * context[c];
      d_bias[r] += a;
    }
    ++count;
  }

  /// Gradient-ascent step with the mean accumulated gradient, then the norm
  /// cap. Resets the accumulator.
  void apply(ProjectionParams& p, double eta) {
    if (count == 0) return;
    const double f = eta / static_cast<double>(count);
    for (std::size_t k = 0; k < p.weights.size(); ++k) p.weights[k] += f * d_weights[k];
    for (std::size_t r = 0; r < p.bias.size(); ++r) p.bias[r] += f * d_bias[r];
    for (double w : p.weights) {
      if (!std::isfinite(w)) throw DivergenceError("projection '" + p.predicate + "' became non-finite");
    }
    p.enforce_norm_cap();
    std::fill(d_weights.begin(), d_weights.end(), 0.0);
    std::fill(d_bias.begin(), d_bias.end(), 0.0);
    count = 0;
  }
};

namespace detail {

inline void apply_rows(EmbeddingTable& users, const FactoidGradient& g, double eta, const std::string& predicate) {
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    auto row = users.row(g.nodes[k]);
    const auto grad = g.row(k);
    double sum = 0;  // NaN or Inf in any entry propagates to the sum
    for (std::size_t d = 0; d < row.size(); ++d) {
      row[d] += eta * grad[d];
      sum += row[d];
    }
    if (!std::isfinite(sum)) {
      throw DivergenceError("user vector " + users.id(g.nodes[k]) + " became non-finite on a " + predicate +
                            " update");
    }
  }
}

}  // namespace detail

/// One ascent step on <subject, pred, o>: v_subject moves along phi(v_o),
/// each negative along -phi(v_o). Object vectors stay fixed. Returns the
/// objective before the step. `scratch`, when given, holds the buffers.
inline double sgd_step_user_object(EmbeddingTable& users, NodeId subject, std::span<const double> object_vec,
                                   std::span<const NodeId> negatives, const ProjectionParams& params, double eta,
                                   ProjectionAccumulator* acc = nullptr, FactoidGradient* scratch = nullptr) {
  FactoidGradient local;
  FactoidGradient& g = scratch != nullptr ? *scratch : local;
  factoid_gradient_into(g, users, subject, object_vec, params, negatives, false);
  detail::apply_rows(users, g, eta, params.predicate);
  if (acc != nullptr) acc->add(g.d_projected, g.context);
  return g.objective;
}

/// One ascent step on <subject, follows, followee>. The followee's vector is
/// the projected context and, when `followee_gradient` is set, also receives
/// its chain-rule gradient W^T df/dphi.
inline double sgd_step_user_user(EmbeddingTable& users, NodeId subject, NodeId followee,
                                 std::span<const NodeId> negatives, const ProjectionParams& params, double eta,
                                 ProjectionAccumulator* acc = nullptr, bool followee_gradient = true,
                                 FactoidGradient* scratch = nullptr) {
  FactoidGradient local;
  FactoidGradient& g = scratch != nullptr ? *scratch : local;
  factoid_gradient_into(g, users, subject, users.row(followee), params, negatives, followee_gradient);
  if (followee_gradient) {
    auto gj = g.row_for(followee);
    for (std::size_t d = 0; d < gj.size(); ++d) gj[d] += g.d_context[d];
  }
  detail::apply_rows(users, g, eta, params.predicate);
  if (acc != nullptr) acc->add(g.d_projected, g.context);
  return g.objective;
}

// ---------------------------------------------------------------------------
// Training loop

struct FactoidTrainConfig {
  std::size_t dim = 64;
  int negatives = 5;
  double learning_rate = 0.25;  // decays linearly to 1e-4 of this
  std::size_t batch_size = 256;
  int epochs = 200;
  int w_update_period = 100;     // batches per predicate between projection updates
  double norm_cap = 1.0;
  double init_scale = 0.5;
  bool followee_gradient = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("user dim must be >= 1");
    if (negatives < 1) throw std::invalid_argument("negatives K must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (w_update_period < 1) throw std::invalid_argument("W update period must be >= 1");
    if (!(norm_cap > 0)) throw std::invalid_argument("norm cap must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"dim_user", dim},
            {"negatives", negatives},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"w_update_period", w_update_period},
            {"norm_cap", norm_cap},
            {"init_scale", init_scale},
            {"followee_gradient", followee_gradient},
            {"seed", seed}};
  }
};

struct TrainReport {
  nlohmann::json config;
  std::vector<std::string> predicates;                    // schedule order, follows last
  std::vector<std::map<std::string, double>> epoch_objective;  // mean f per predicate
  std::map<std::string, double> final_w_norm;
  std::size_t cycles_per_epoch = 0;
  std::size_t updates = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config"] = config;
    j["seed"] = config.value("seed", std::uint64_t{0});
    j["schedule"] = predicates;
    j["cycles_per_epoch"] = cycles_per_epoch;
    j["updates"] = updates;
    j["followee_gradient"] = config.value("followee_gradient", true);
    j["epoch_objective"] = epoch_objective;
    j["final_w_norm"] = final_w_norm;
    return j;
  }
};

struct FactoidTrainResult {
  EmbeddingTable users;  // row n is unified node n
  std::vector<ProjectionParams> projections;
  TrainReport report;
};

/// Row id used for a unified node in the training table: the qualified id of
/// its first identity.
inline std::string node_row_id(const UnifiedNetwork& net, NodeId n) { return qualified_id(net.nodes[n].front()); }

namespace detail {

struct FactoidGroup {
  std::string predicate;
  bool user_user = false;
  const EmbeddingTable* objects = nullptr;
  std::vector<std::pair<NodeId, std::uint32_t>> items;  // (subject, object index or followee)
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::size_t batches = 0;
  ProjectionParams params;
  ProjectionAccumulator acc;
  double objective_sum = 0;
  std::size_t objective_count = 0;
};

}  // namespace detail

/// Each cycle runs one batch per user-object predicate (catalog order), then
/// one batch of follows factoids. An epoch is enough cycles for the largest
/// predicate's factoids to be visited once.
inline FactoidTrainResult train(const UnifiedNetwork& net, const std::map<std::string, EmbeddingTable>& object_tables,
                                const FactoidTrainConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.dim;
  Rng rng(cfg.seed);

  FactoidTrainResult out{EmbeddingTable(m), {}, {}};
  const double half_width = cfg.init_scale / std::sqrt(static_cast<double>(m));
  for (NodeId n = 0; n < net.node_count(); ++n) {
    const std::size_t r = out.users.add_row(node_row_id(net, n));
    for (double& x : out.users.row(r)) x = uniform(rng, -half_width, half_width);
  }

  std::vector<detail::FactoidGroup> groups;
  for (const auto& cat : net.catalogs) {
    detail::FactoidGroup g;
    g.predicate = cat.predicate.factoid_name;
    for (const auto& f : net.factoids) {
      if (f.predicate == g.predicate) g.items.emplace_back(f.subject, std::get<ObjectRef>(f.object).index);
    }
    if (g.items.empty()) continue;
    auto it = object_tables.find(cat.predicate.name);
    if (it == object_tables.end()) {
      throw InputError("missing object embedding for predicate '" + cat.predicate.name + "'");
    }
    if (it->second.size() < cat.objects.size()) {
      throw InputError("object embedding for '" + cat.predicate.name + "' covers " +
                       std::to_string(it->second.size()) + " of " + std::to_string(cat.objects.size()) + " objects");
    }
    g.objects = &it->second;
    g.params = ProjectionParams::near_identity(cat.predicate.name, m, it->second.dim(), cfg.norm_cap);
    groups.push_back(std::move(g));
  }
  {
    detail::FactoidGroup g;
    g.predicate = std::string(kFollows);
    g.user_user = true;
    for (const auto& f : net.factoids) {
      if (f.is_user_user()) g.items.emplace_back(f.subject, std::get<UserRef>(f.object).node);
    }
    if (!g.items.empty()) {
      g.params = ProjectionParams::near_identity(std::string(kFollows), m, m, cfg.norm_cap);
      groups.push_back(std::move(g));
    }
  }
  if (groups.empty()) throw InputError("train: no factoids for any predicate");

  std::size_t largest = 0;
  for (auto& g : groups) {
    g.acc = ProjectionAccumulator(g.params);
    g.order.resize(g.items.size());
    std::iota(g.order.begin(), g.order.end(), std::size_t{0});
    std::shuffle(g.order.begin(), g.order.end(), rng);
    largest = std::max(largest, g.items.size());
    out.report.predicates.push_back(g.predicate);
  }
  out.report.config = cfg.to_json();
  out.report.cycles_per_epoch = (largest + cfg.batch_size - 1) / cfg.batch_size;

  const bool need_p1 = groups.back().user_user;
  const NoiseDistribution p1 = need_p1 ? NoiseDistribution::out_degree(net) : NoiseDistribution::uniform(1);
  const NoiseDistribution p2 = NoiseDistribution::uniform(net.node_count());

  const std::size_t total_cycles = out.report.cycles_per_epoch * static_cast<std::size_t>(cfg.epochs);
  std::vector<NodeId> negatives(static_cast<std::size_t>(cfg.negatives));
  FactoidGradient scratch;

  for (std::size_t cycle = 0; cycle < total_cycles; ++cycle) {
    const double eta =
        cfg.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(cycle) / static_cast<double>(total_cycles));
    for (auto& g : groups) {
      const NoiseDistribution& noise = g.user_user ? p1 : p2;
      const std::size_t batch = std::min(cfg.batch_size, g.items.size());
      for (std::size_t b = 0; b < batch; ++b) {
        if (g.cursor == g.order.size()) {
          std::shuffle(g.order.begin(), g.order.end(), rng);
          g.cursor = 0;
        }
        const auto [subject, object] = g.items[g.order[g.cursor++]];
        for (auto& k : negatives) k = sample_negative_excluding(noise, rng, subject);
        const double f = g.user_user
                             ? sgd_step_user_user(out.users, subject, object, negatives, g.params, eta, &g.acc,
                                                  cfg.followee_gradient, &scratch)
                             : sgd_step_user_object(out.users, subject, g.objects->row(object), negatives, g.params,
                                                    eta, &g.acc, &scratch);
        g.objective_sum += f;
        ++g.objective_count;
        ++out.report.updates;
      }
      if (++g.batches % static_cast<std::size_t>(cfg.w_update_period) == 0) g.acc.apply(g.params, eta);
    }
    if ((cycle + 1) % out.report.cycles_per_epoch == 0) {
      std::map<std::string, double> row;
      for (auto& g : groups) {
        row[g.predicate] = g.objective_count ? g.objective_sum / static_cast<double>(g.objective_count) : 0.0;
        g.objective_sum = 0;
        g.objective_count = 0;
      }
      out.report.epoch_objective.push_back(std::move(row));
    }
  }

  for (auto& g : groups) {
    out.report.final_w_norm[g.predicate] = g.params.frobenius_norm();
    out.projections.push_back(std::move(g.params));
  }
  return out;
}

/// One row per identity ("src:..."/"tgt:..."); merged nodes repeat their
/// vector under both ids.
inline EmbeddingTable identity_table(const UnifiedNetwork& net, const EmbeddingTable& node_table) {
  EmbeddingTable out(node_table.dim());
  for (NodeId n = 0; n < net.node_count(); ++n) {
    for (const auto& who : net.nodes[n]) out.add_row(qualified_id(who), node_table.row(n));
  }
  return out;
}

}  // namespace factoidlink
