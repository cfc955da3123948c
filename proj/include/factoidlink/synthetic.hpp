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
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "factoidlink/core_model.hpp"
#include "factoidlink/linkage_eval.hpp"
#include "factoidlink/random.hpp"
#include "factoidlink/similarity.hpp"

namespace factoidlink {

struct SyntheticParams {
  std::size_t n_users = 200;
  double edge_prob = 8.0 / 199.0;  // per ordered pair of the latent graph
  double overlap_frac = 0.8;       // per-view probability of keeping a latent edge
  double name_noise = 0.3;         // per-view, per-name perturbation probability
  std::size_t feature_dim = 32;
  double feature_noise = 0.2;      // expected norm of the per-view Gaussian noise
  std::uint64_t seed = 0;

  void validate() const {
    if (n_users < 1) throw std::invalid_argument("synthetic: n_users must be >= 1");
    auto unit = [](double p) { return p >= 0 && p <= 1; };
    if (!unit(edge_prob) || !unit(overlap_frac) || !unit(name_noise)) {
      throw std::invalid_argument("synthetic: probabilities must lie in [0, 1]");
    }
    if (feature_dim < 1) throw std::invalid_argument("synthetic: feature_dim must be >= 1");
    if (!(feature_noise >= 0)) throw std::invalid_argument("synthetic: feature_noise must be >= 0");
  }
};

/// Edge probability that gives the requested mean out-degree.
inline double edge_prob_for_mean_degree(std::size_t n_users, double mean_degree) {
  if (n_users < 2) return 0.0;
  return std::clamp(mean_degree / static_cast<double>(n_users - 1), 0.0, 1.0);
}

struct SyntheticPair {
  SocialNetwork source;
  SocialNetwork target;
  GroundTruth truth;
  std::size_t perturbed_names = 0;
};

namespace detail {

/// Distinct capitalized pseudo-names built from random syllables.
inline std::vector<std::string> syllable_lexicon(Rng& rng, std::size_t count) {
  static const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v",
                                  "w", "z", "ch", "sh", "th", "br", "kr", "st", "tr", "gl", "pl", "fr"};
  static const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ea", "ie", "ou", "y"};
  static const char* kCodas[] = {"", "", "", "n", "r", "s", "l", "m", "k", "t", "nd", "x"};
  auto pick = [&](const auto& arr) { return std::string(arr[rng() % std::size(arr)]); };
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < count) {
    const int syllables = 2 + static_cast<int>(rng() % 2);
    std::string name;
    for (int s = 0; s < syllables; ++s) name += pick(kOnsets) + pick(kNuclei) + pick(kCodas);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    if (seen.insert(name).second) out.push_back(std::move(name));
  }
  return out;
}

/// Token drop, truncation or adjacent character swap; never returns the
/// input unchanged or empty.
inline std::string perturb_name(const std::string& name, Rng& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::string out = name;
    switch (rng() % 3) {
      case 0: {
        std::vector<std::string> tokens;
        std::size_t pos = 0;
        while (pos < name.size()) {
          const std::size_t sp = std::min(name.find(' ', pos), name.size());
          if (sp > pos) tokens.push_back(name.substr(pos, sp - pos));
          pos = sp + 1;
        }
        if (tokens.size() < 2) continue;
        tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(rng() % tokens.size()));
        out.clear();
        for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
        break;
      }
      case 1: {
        if (name.size() < 3) continue;
        const auto keep = static_cast<std::size_t>(std::ceil(static_cast<double>(name.size()) * uniform(rng, 0.5, 0.8)));
        out = name.substr(0, std::max<std::size_t>(2, keep));
        while (!out.empty() && out.back() == ' ') out.pop_back();
        break;
      }
      default: {
        if (name.size() < 2) continue;
        const std::size_t at = rng() % (name.size() - 1);
        std::swap(out[at], out[at + 1]);
        break;
      }
    }
    if (out != name && !out.empty() && out.front() != ' ') return out;
  }
  return name + "x";
}

/// Draws lexicon ranks with P(r) proportional to 1/(r+1), the heavy-tailed
/// popularity of real given names and surnames.
class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cdf_(n) {
    double run = 0;
    for (std::size_t r = 0; r < n; ++r) cdf_[r] = (run += 1.0 / static_cast<double>(r + 1));
    for (double& c : cdf_) c /= run;
  }
  std::size_t operator()(Rng& rng) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), uniform01(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

inline std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> gauss;
  std::vector<double> v(dim);
  double n = 0;
  do {
    for (double& x : v) x = gauss(rng);
    n = norm(v);
  } while (n == 0);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace detail

/// Two noisy views of one latent population. Names are Zipf-distributed over
/// a 2000 x 2000 syllable lexicon, so some people share names. Source ids are "s<i>", target
/// ids "t<perm(i)>" for a seeded permutation, so id order carries no hint of
/// the alignment. Ground truth pairs person i's two accounts.
inline SyntheticPair generate_synthetic_pair(const SyntheticParams& params) {
  params.validate();
  const std::size_t n = params.n_users;
  Rng lex_rng(derive_seed(params.seed, "lexicon"));
  const auto firsts = detail::syllable_lexicon(lex_rng, 2000);
  const auto lasts = detail::syllable_lexicon(lex_rng, 2000);

  const detail::ZipfSampler popularity(firsts.size());
  Rng rng(derive_seed(params.seed, "population"));
  struct Person {
    std::string username, screen_name;
    std::vector<double> features;
  };
  std::vector<Person> people(n);
  for (auto& p : people) {
    const auto& first = firsts[popularity(rng)];
    const auto& last = lasts[popularity(rng)];
    p.screen_name = first + " " + last;
    p.username = text::lowercase(first + last);
    if (rng() % 2 == 0) p.username += std::to_string(rng() % 100);
    p.features = detail::unit_gaussian(rng, params.feature_dim);
  }
  std::vector<std::pair<std::size_t, std::size_t>> latent_edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && uniform01(rng) < params.edge_prob) latent_edges.emplace_back(a, b);
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  SyntheticPair out;
  std::normal_distribution<double> gauss(0.0, params.feature_noise / std::sqrt(static_cast<double>(params.feature_dim)));

  auto make_view = [&](SocialNetwork& net, const std::string& label, bool is_target) {
    net.network_id = label;
    net.users.resize(n);
    auto local_id = [&](std::size_t person) {
      return is_target ? "t" + std::to_string(perm[person]) : "s" + std::to_string(person);
    };
    for (std::size_t person = 0; person < n; ++person) {
      const std::size_t slot = is_target ? perm[person] : person;
      UserRecord& u = net.users[slot];
      u.local_id = local_id(person);
      const Person& p = people[person];
      for (const auto* key : {"username", "screen_name"}) {
        std::string name = std::string(key) == "username" ? p.username : p.screen_name;
        if (uniform01(rng) < params.name_noise) {
          name = detail::perturb_name(name, rng);
          ++out.perturbed_names;
        }
        u.attributes.emplace(key, AttributeObject::text(text::normalize(name)));
      }
      std::vector<double> f = p.features;
      for (double& x : f) x += gauss(rng);
      const double fn = norm(f);
      if (fn > 0) {
        for (double& x : f) x /= fn;
      } else {
        f = p.features;
      }
      u.attributes.emplace("image_features", AttributeObject::features(std::move(f)));
    }
    for (const auto& [a, b] : latent_edges) {
      if (uniform01(rng) < params.overlap_frac) net.edges.emplace_back(local_id(a), local_id(b));
    }
  };
  make_view(out.source, "source", false);
  make_view(out.target, "target", true);

  if (params.name_noise > 0 && out.perturbed_names == 0) {
    auto& attr = out.source.users.front().attributes.at("screen_name");
    attr = AttributeObject::text(text::normalize(detail::perturb_name(attr.as_text(), rng)));
    out.perturbed_names = 1;
  }
  for (std::size_t person = 0; person < n; ++person) {
    out.truth.pairs.emplace_back("s" + std::to_string(person), "t" + std::to_string(perm[person]));
  }
  return out;
}

/// Writes a network as users JSONL plus edges CSV.
inline void write_users_jsonl(std::ostream& out, const SocialNetwork& net) {
  for (const auto& u : net.users) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [key, value] : u.attributes) {
      if (value.is_text()) {
        attrs[key] = value.as_text();
      } else {
        attrs[key] = value.as_features();
      }
    }
    out << nlohmann::json{{"id", u.local_id}, {"attrs", attrs}}.dump() << '\n';
  }
}

inline void write_pairs_csv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& pairs) {
  for (const auto& [a, b] : pairs) out << a << ',' << b << '\n';
}

}  // namespace factoidlink
