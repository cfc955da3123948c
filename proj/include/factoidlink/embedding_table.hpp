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

#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "factoidlink/error.hpp"
#include "factoidlink/similarity.hpp"

namespace factoidlink {

/// Dense row-major table of m-dimensional vectors keyed by string id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("EmbeddingTable: dimension must be positive");
  }
  EmbeddingTable(std::size_t dim, std::vector<std::string> ids) : EmbeddingTable(dim) {
    for (auto& id : ids) add_row(std::move(id));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  std::size_t add_row(std::string id) {
    if (id.empty() || id.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("EmbeddingTable: id '" + id + "' is empty or contains whitespace");
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw std::invalid_argument("EmbeddingTable: duplicate id '" + id + "'");
    }
    ids_.push_back(std::move(id));
    data_.resize(data_.size() + dim_, 0.0);
    return ids_.size() - 1;
  }

  std::size_t add_row(std::string id, std::span<const double> values) {
    if (values.size() != dim_) throw std::invalid_argument("EmbeddingTable: row length mismatch");
    const std::size_t r = add_row(std::move(id));
    std::copy(values.begin(), values.end(), row(r).begin());
    return r;
  }

  bool all_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim_ = 1;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// "m=<dim> n=<rows>" header, then "id v_1 ... v_m" per row with shortest
/// round-trip decimal formatting.
inline void write_embedding(std::ostream& out, const EmbeddingTable& table) {
  out << "m=" << table.dim() << " n=" << table.size() << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.id(r);
    for (double x : table.row(r)) out << ' ' << detail::format_double(x);
    out << '\n';
  }
}

inline EmbeddingTable read_embedding(std::istream& in, std::string_view origin = "embedding") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(std::string(origin) + ": empty embedding file");
  std::istringstream header(line);
  std::string m_field, n_field;
  header >> m_field >> n_field;
  if (m_field.rfind("m=", 0) != 0 || n_field.rfind("n=", 0) != 0) {
    throw InputError(std::string(origin) + ":1: expected 'm=<dim> n=<rows>'");
  }
  const auto dim = detail::parse_uint(m_field.substr(2), origin);
  const auto rows = detail::parse_uint(n_field.substr(2), origin);
  if (dim == 0) throw InputError(std::string(origin) + ":1: dimension must be positive");
  EmbeddingTable table(dim);
  std::vector<double> values(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim_ascii(line).empty()) continue;
    std::istringstream fields(line);
    std::string id, tok;
    fields >> id;
    std::size_t k = 0;
    while (fields >> tok) {
      if (k == dim) throw InputError(detail::location(origin, lineno) + "too many values");
      values[k++] = detail::parse_double(tok, origin);
    }
    if (k != dim) throw InputError(detail::location(origin, lineno) + "too few values");
    try {
      table.add_row(id, values);
    } catch (const std::invalid_argument& e) {
      throw InputError(detail::location(origin, lineno) + e.what());
    }
  }
  if (table.size() != rows) throw InputError(std::string(origin) + ": row count does not match header");
  return table;
}

}  // namespace factoidlink
