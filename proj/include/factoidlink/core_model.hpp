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
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "factoidlink/error.hpp"
#include "factoidlink/text.hpp"

namespace factoidlink {

using NodeId = std::uint32_t;

enum class ObjectKind { kText, kVector };

/// A user-object predicate: the attribute key in the users file, the factoid
/// predicate name, and the kind of object it carries.
struct PredicateSpec {
  std::string name;           // "username"
  std::string attribute_key;  // "username"
  std::string factoid_name;   // "has_username"
  ObjectKind kind;

  friend bool operator==(const PredicateSpec&, const PredicateSpec&) = default;
};

inline constexpr std::string_view kFollows = "follows";

inline const std::vector<PredicateSpec>& known_predicates() {
  static const std::vector<PredicateSpec> preds = {
      {"username", "username", "has_username", ObjectKind::kText},
      {"screen_name", "screen_name", "has_screen_name", ObjectKind::kText},
      {"image", "image_features", "has_image", ObjectKind::kVector},
  };
  return preds;
}

/// Looks a predicate up by short name, attribute key or factoid name.
inline const PredicateSpec& find_predicate(std::string_view key) {
  for (const auto& p : known_predicates()) {
    if (p.name == key || p.attribute_key == key || p.factoid_name == key) return p;
  }
  throw InputError("unknown predicate '" + std::string(key) + "'");
}

inline std::vector<PredicateSpec> parse_predicate_list(std::string_view csv) {
  std::vector<PredicateSpec> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = std::min(csv.find(',', pos), csv.size());
    const std::string_view item = csv.substr(pos, comma - pos);
    if (!item.empty()) {
      const auto& p = find_predicate(item);
      if (std::find(out.begin(), out.end(), p) != out.end()) {
        throw InputError("predicate '" + p.name + "' listed twice");
      }
      out.push_back(p);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw InputError("empty predicate list");
  return out;
}

class AttributeObject {
 public:
  AttributeObject() = default;
  static AttributeObject text(std::string s) { return AttributeObject(std::move(s)); }
  static AttributeObject features(std::vector<double> v) { return AttributeObject(std::move(v)); }

  bool is_text() const { return std::holds_alternative<std::string>(value_); }
  const std::string& as_text() const { return std::get<std::string>(value_); }
  const std::vector<double>& as_features() const { return std::get<std::vector<double>>(value_); }

  friend bool operator==(const AttributeObject&, const AttributeObject&) = default;
  friend auto operator<=>(const AttributeObject&, const AttributeObject&) = default;

 private:
  explicit AttributeObject(std::string s) : value_(std::move(s)) {}
  explicit AttributeObject(std::vector<double> v) : value_(std::move(v)) {}

  std::variant<std::string, std::vector<double>> value_;
};

struct UserRecord {
  std::string local_id;
  std::map<std::string, AttributeObject> attributes;  // keyed by attribute key
};

struct SocialNetwork {
  std::string network_id;
  std::vector<UserRecord> users;
  std::vector<std::pair<std::string, std::string>> edges;  // (follower, followee)
};

enum class NetworkSide : std::uint8_t { kSource = 0, kTarget = 1 };

struct UserIdentity {
  NetworkSide side;
  std::string local_id;

  friend bool operator==(const UserIdentity&, const UserIdentity&) = default;
  friend auto operator<=>(const UserIdentity&, const UserIdentity&) = default;
};

/// "src:<id>" / "tgt:<id>", the id form used in embedding files.
inline std::string qualified_id(const UserIdentity& who) {
  return (who.side == NetworkSide::kSource ? "src:" : "tgt:") + who.local_id;
}

struct ObjectRef {
  std::uint32_t index;
  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
  friend auto operator<=>(const ObjectRef&, const ObjectRef&) = default;
};

struct UserRef {
  NodeId node;
  friend bool operator==(const UserRef&, const UserRef&) = default;
  friend auto operator<=>(const UserRef&, const UserRef&) = default;
};

/// <subject, predicate, object-or-user>. User-object factoids carry the
/// factoid name of a PredicateSpec and an ObjectRef into that predicate's
/// catalog; user-user factoids carry "follows" and a UserRef.
struct Factoid {
  NodeId subject;
  std::string predicate;
  std::variant<ObjectRef, UserRef> object;

  bool is_user_user() const { return std::holds_alternative<UserRef>(object); }

  friend bool operator==(const Factoid&, const Factoid&) = default;
  friend auto operator<=>(const Factoid&, const Factoid&) = default;
};

/// Distinct objects O_pred of one predicate, in first-seen order.
struct ObjectCatalog {
  PredicateSpec predicate;
  std::vector<AttributeObject> objects;
};

/// Both networks merged into one node space. Node ids are dense; source
/// users come first in input order. After anchor merging a node may carry
/// one identity from each side.
struct UnifiedNetwork {
  std::string source_label = "source";
  std::string target_label = "target";
  std::vector<std::vector<UserIdentity>> nodes;
  std::vector<Factoid> factoids;
  std::vector<ObjectCatalog> catalogs;

  std::size_t node_count() const { return nodes.size(); }

  const ObjectCatalog* catalog(std::string_view predicate) const {
    for (const auto& c : catalogs) {
      if (c.predicate.name == predicate || c.predicate.factoid_name == predicate) return &c;
    }
    return nullptr;
  }

  std::optional<NodeId> find(NetworkSide side, std::string_view local_id) const {
    for (NodeId n = 0; n < nodes.size(); ++n) {
      for (const auto& who : nodes[n]) {
        if (who.side == side && who.local_id == local_id) return n;
      }
    }
    return std::nullopt;
  }

  bool has_side(NodeId n, NetworkSide side) const {
    return std::any_of(nodes[n].begin(), nodes[n].end(),
                       [side](const UserIdentity& w) { return w.side == side; });
  }
};

// ---------------------------------------------------------------------------
// Validation and loading

inline void validate(const SocialNetwork& net) {
  std::set<std::string_view> ids;
  std::map<std::string, std::size_t> dims;
  for (const auto& u : net.users) {
    if (u.local_id.empty()) throw InputError(net.network_id + ": empty user id");
    if (!ids.insert(u.local_id).second) {
      throw InputError(net.network_id + ": duplicate user id '" + u.local_id + "'");
    }
    for (const auto& [key, value] : u.attributes) {
      const auto& pred = find_predicate(key);
      if (pred.attribute_key != key) {
        throw InputError(net.network_id + ": unknown attribute key '" + key + "'");
      }
      if (value.is_text() != (pred.kind == ObjectKind::kText)) {
        throw InputError(net.network_id + ": wrong value type for '" + key + "'");
      }
      if (value.is_text()) {
        if (value.as_text().empty()) {
          throw InputError(net.network_id + ": empty '" + key + "' for user '" + u.local_id + "'");
        }
      } else {
        const auto& v = value.as_features();
        if (v.empty()) {
          throw InputError(net.network_id + ": empty '" + key + "' for user '" + u.local_id + "'");
        }
        for (double x : v) {
          if (!std::isfinite(x)) throw InputError(net.network_id + ": non-finite feature value");
        }
        auto [it, fresh] = dims.emplace(key, v.size());
        if (!fresh && it->second != v.size()) {
          throw InputError(net.network_id + ": '" + key + "' dimension mismatch for user '" +
                           u.local_id + "'");
        }
      }
    }
  }
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& [from, to] : net.edges) {
    if (!ids.contains(from)) throw InputError(net.network_id + ": dangling edge endpoint '" + from + "'");
    if (!ids.contains(to)) throw InputError(net.network_id + ": dangling edge endpoint '" + to + "'");
    if (from == to) throw InputError(net.network_id + ": self-loop on '" + from + "'");
    if (!seen.emplace(from, to).second) {
      throw InputError(net.network_id + ": duplicate edge " + from + "," + to);
    }
  }
}

namespace detail {

inline std::string location(std::string_view path, std::size_t line) {
  return std::string(path) + ":" + std::to_string(line) + ": ";
}

inline std::string trim_ascii(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    fields.push_back(trim_ascii(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return fields;
}

}  // namespace detail

/// Parses the users JSONL stream. `origin` is used in diagnostics only.
inline std::vector<UserRecord> parse_users(std::istream& in, std::string_view origin) {
  std::vector<UserRecord> users;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim_ascii(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(detail::location(origin, lineno) + "malformed JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw InputError(detail::location(origin, lineno) + "record needs a string \"id\"");
    }
    UserRecord user;
    user.local_id = rec["id"].get<std::string>();
    if (user.local_id.empty() || user.local_id.find_first_of(" \t,") != std::string::npos) {
      throw InputError(detail::location(origin, lineno) + "id must be non-empty without spaces or commas");
    }
    if (rec.contains("attrs")) {
      const auto& attrs = rec["attrs"];
      if (!attrs.is_object()) {
        throw InputError(detail::location(origin, lineno) + "\"attrs\" must be an object");
      }
      for (const auto& [key, value] : attrs.items()) {
        const PredicateSpec* pred = nullptr;
        for (const auto& p : known_predicates()) {
          if (p.attribute_key == key) pred = &p;
        }
        if (pred == nullptr) {
          throw InputError(detail::location(origin, lineno) + "unknown attribute key '" + key + "'");
        }
        if (pred->kind == ObjectKind::kText) {
          if (!value.is_string()) {
            throw InputError(detail::location(origin, lineno) + "'" + key + "' must be a string");
          }
          std::string normalized;
          try {
            normalized = text::normalize(value.get<std::string>());
          } catch (const InputError& e) {
            throw InputError(detail::location(origin, lineno) + e.what());
          }
          if (normalized.empty()) {
            throw InputError(detail::location(origin, lineno) + "'" + key + "' is empty");
          }
          user.attributes.emplace(key, AttributeObject::text(std::move(normalized)));
        } else {
          if (!value.is_array() || value.empty()) {
            throw InputError(detail::location(origin, lineno) + "'" + key + "' must be a non-empty array");
          }
          std::vector<double> v;
          v.reserve(value.size());
          for (const auto& x : value) {
            if (!x.is_number()) {
              throw InputError(detail::location(origin, lineno) + "'" + key + "' must hold numbers");
            }
            v.push_back(x.get<double>());
          }
          user.attributes.emplace(key, AttributeObject::features(std::move(v)));
        }
      }
    }
    users.push_back(std::move(user));
  }
  return users;
}

/// Parses a two-column CSV (no header). Blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_pairs(std::istream& in,
                                                                   std::string_view origin) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim_ascii(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw InputError(detail::location(origin, lineno) + "expected two comma-separated ids");
    }
    pairs.emplace_back(std::move(fields[0]), std::move(fields[1]));
  }
  return pairs;
}

struct LoadOptions {
  /// Treat each edge as a friendship and add the reverse direction.
  bool undirected = false;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

/// Reads a users JSONL file and a follower,followee CSV into a validated
/// network. An empty edges path means no edges.
inline SocialNetwork load_network(const std::string& users_path, const std::string& edges_path,
                                  std::string network_id, LoadOptions options = {}) {
  SocialNetwork net;
  net.network_id = std::move(network_id);
  {
    auto in = open_input(users_path);
    net.users = parse_users(in, users_path);
  }
  if (!edges_path.empty()) {
    auto in = open_input(edges_path);
    net.edges = parse_pairs(in, edges_path);
  }
  if (options.undirected) {
    std::set<std::pair<std::string, std::string>> present(net.edges.begin(), net.edges.end());
    const std::size_t n = net.edges.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::pair<std::string, std::string> rev{net.edges[i].second, net.edges[i].first};
      if (present.insert(rev).second) net.edges.push_back(std::move(rev));
    }
  }
  validate(net);
  return net;
}

inline std::vector<std::pair<std::string, std::string>> load_pairs(const std::string& path) {
  auto in = open_input(path);
  return parse_pairs(in, path);
}

// ---------------------------------------------------------------------------
// Unified network

/// Generates one user-object factoid per present attribute of a listed
/// predicate and one follows factoid per directed edge. Identical objects
/// share one catalog entry per predicate.
inline UnifiedNetwork build_unified_network(const SocialNetwork& source, const SocialNetwork& target,
                                            const std::vector<PredicateSpec>& predicates =
                                                known_predicates()) {
  validate(source);
  validate(target);
  UnifiedNetwork net;
  net.source_label = source.network_id;
  net.target_label = target.network_id;
  for (const auto& p : predicates) net.catalogs.push_back(ObjectCatalog{p, {}});

  std::vector<std::map<AttributeObject, std::uint32_t>> index(predicates.size());
  std::vector<std::vector<Factoid>> object_factoids(predicates.size());
  std::vector<Factoid> follows;

  auto add_side = [&](const SocialNetwork& sn, NetworkSide side) {
    std::unordered_map<std::string, NodeId> local;
    for (const auto& user : sn.users) {
      const auto node = static_cast<NodeId>(net.nodes.size());
      net.nodes.push_back({UserIdentity{side, user.local_id}});
      local.emplace(user.local_id, node);
      for (std::size_t p = 0; p < predicates.size(); ++p) {
        auto it = user.attributes.find(predicates[p].attribute_key);
        if (it == user.attributes.end()) continue;
        auto& objects = net.catalogs[p].objects;
        auto [slot, fresh] = index[p].emplace(it->second, static_cast<std::uint32_t>(objects.size()));
        if (fresh) objects.push_back(it->second);
        object_factoids[p].push_back(Factoid{node, predicates[p].factoid_name, ObjectRef{slot->second}});
      }
    }
    for (const auto& [from, to] : sn.edges) {
      follows.push_back(Factoid{local.at(from), std::string(kFollows), UserRef{local.at(to)}});
    }
  };
  add_side(source, NetworkSide::kSource);
  add_side(target, NetworkSide::kTarget);

  for (auto& group : object_factoids) {
    net.factoids.insert(net.factoids.end(), group.begin(), group.end());
  }
  net.factoids.insert(net.factoids.end(), follows.begin(), follows.end());
  return net;
}

/// Collapses each (source id, target id) anchor into the source node. The
/// merged node keeps both identities and shares one embedding downstream.
inline UnifiedNetwork merge_anchor_pairs(const UnifiedNetwork& net,
                                         const std::vector<std::pair<std::string, std::string>>& anchors) {
  if (anchors.empty()) return net;

  std::map<UserIdentity, NodeId> lookup;
  for (NodeId n = 0; n < net.nodes.size(); ++n) {
    for (const auto& who : net.nodes[n]) lookup.emplace(who, n);
  }
  std::vector<NodeId> redirect(net.nodes.size());
  for (NodeId n = 0; n < redirect.size(); ++n) redirect[n] = n;
  std::set<NodeId> used;
  for (const auto& [src, tgt] : anchors) {
    auto s = lookup.find(UserIdentity{NetworkSide::kSource, src});
    auto t = lookup.find(UserIdentity{NetworkSide::kTarget, tgt});
    if (s == lookup.end()) throw InputError("anchor references unknown source id '" + src + "'");
    if (t == lookup.end()) throw InputError("anchor references unknown target id '" + tgt + "'");
    if (s->second == t->second) throw InputError("anchor (" + src + "," + tgt + ") already merged");
    if (!used.insert(s->second).second || !used.insert(t->second).second) {
      throw InputError("conflicting anchors around (" + src + "," + tgt + ")");
    }
    redirect[t->second] = s->second;
  }

  UnifiedNetwork out;
  out.source_label = net.source_label;
  out.target_label = net.target_label;
  out.catalogs = net.catalogs;
  std::vector<NodeId> renumber(net.nodes.size());
  for (NodeId n = 0; n < net.nodes.size(); ++n) {
    if (redirect[n] != n) continue;
    renumber[n] = static_cast<NodeId>(out.nodes.size());
    out.nodes.push_back(net.nodes[n]);
  }
  for (NodeId n = 0; n < net.nodes.size(); ++n) {
    if (redirect[n] == n) continue;
    auto& merged = out.nodes[renumber[redirect[n]]];
    merged.insert(merged.end(), net.nodes[n].begin(), net.nodes[n].end());
  }
  auto map_node = [&](NodeId n) { return renumber[redirect[n]]; };

  std::set<Factoid> seen;
  for (const auto& f : net.factoids) {
    Factoid g = f;
    g.subject = map_node(f.subject);
    if (auto* u = std::get_if<UserRef>(&g.object)) u->node = map_node(u->node);
    if (seen.insert(g).second) out.factoids.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot (JSONL)

inline void write_snapshot(std::ostream& out, const UnifiedNetwork& net) {
  using nlohmann::json;
  json meta = {{"kind", "meta"},
               {"format", "factoidlink-unified"},
               {"version", 1},
               {"source", net.source_label},
               {"target", net.target_label},
               {"nodes", net.nodes.size()},
               {"factoids", net.factoids.size()}};
  json preds = json::array();
  for (const auto& c : net.catalogs) preds.push_back(c.predicate.name);
  meta["predicates"] = preds;
  out << meta.dump() << '\n';
  for (NodeId n = 0; n < net.nodes.size(); ++n) {
    json ids = json::array();
    for (const auto& who : net.nodes[n]) ids.push_back(qualified_id(who));
    out << json{{"kind", "node"}, {"id", n}, {"identities", ids}}.dump() << '\n';
  }
  for (const auto& c : net.catalogs) {
    for (std::size_t i = 0; i < c.objects.size(); ++i) {
      json rec = {{"kind", "object"}, {"pred", c.predicate.name}, {"index", i}};
      if (c.objects[i].is_text()) {
        rec["text"] = c.objects[i].as_text();
      } else {
        rec["vector"] = c.objects[i].as_features();
      }
      out << rec.dump() << '\n';
    }
  }
  for (const auto& f : net.factoids) {
    json rec = {{"kind", "factoid"}, {"s", f.subject}, {"p", f.predicate}};
    if (const auto* o = std::get_if<ObjectRef>(&f.object)) {
      rec["o"] = o->index;
    } else {
      rec["u"] = std::get<UserRef>(f.object).node;
    }
    out << rec.dump() << '\n';
  }
}

inline UnifiedNetwork read_snapshot(std::istream& in, std::string_view origin = "snapshot") {
  using nlohmann::json;
  UnifiedNetwork net;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  std::size_t expect_nodes = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim_ascii(line).empty()) continue;
      const json rec = json::parse(line);
      const std::string kind = rec.at("kind");
      if (kind == "meta") {
        if (rec.at("format") != "factoidlink-unified" || rec.at("version") != 1) {
          throw InputError(detail::location(origin, lineno) + "unsupported snapshot format");
        }
        net.source_label = rec.at("source");
        net.target_label = rec.at("target");
        expect_nodes = rec.at("nodes");
        for (const auto& p : rec.at("predicates")) {
          net.catalogs.push_back(ObjectCatalog{find_predicate(p.get<std::string>()), {}});
        }
        have_meta = true;
      } else if (!have_meta) {
        throw InputError(detail::location(origin, lineno) + "snapshot must start with a meta record");
      } else if (kind == "node") {
        if (rec.at("id").get<std::size_t>() != net.nodes.size()) {
          throw InputError(detail::location(origin, lineno) + "node ids must be dense and ordered");
        }
        std::vector<UserIdentity> ids;
        for (const auto& q : rec.at("identities")) {
          const std::string s = q;
          if (s.rfind("src:", 0) == 0) {
            ids.push_back({NetworkSide::kSource, s.substr(4)});
          } else if (s.rfind("tgt:", 0) == 0) {
            ids.push_back({NetworkSide::kTarget, s.substr(4)});
          } else {
            throw InputError(detail::location(origin, lineno) + "bad identity '" + s + "'");
          }
        }
        net.nodes.push_back(std::move(ids));
      } else if (kind == "object") {
        const std::string pred = rec.at("pred");
        auto cat_it = std::find_if(net.catalogs.begin(), net.catalogs.end(),
                                   [&](const ObjectCatalog& c) { return c.predicate.name == pred; });
        ObjectCatalog* cat = cat_it == net.catalogs.end() ? nullptr : &*cat_it;
        if (cat == nullptr || rec.at("index").get<std::size_t>() != cat->objects.size()) {
          throw InputError(detail::location(origin, lineno) + "object out of order");
        }
        if (rec.contains("text")) {
          cat->objects.push_back(AttributeObject::text(rec["text"].get<std::string>()));
        } else {
          cat->objects.push_back(AttributeObject::features(rec.at("vector").get<std::vector<double>>()));
        }
      } else if (kind == "factoid") {
        Factoid f{rec.at("s").get<NodeId>(), rec.at("p").get<std::string>(), ObjectRef{0}};
        if (rec.contains("u")) {
          f.object = UserRef{rec["u"].get<NodeId>()};
        } else {
          f.object = ObjectRef{rec.at("o").get<std::uint32_t>()};
        }
        net.factoids.push_back(std::move(f));
      } else {
        throw InputError(detail::location(origin, lineno) + "unknown record kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InputError(detail::location(origin, lineno) + "malformed snapshot: " + e.what());
  }
  if (!have_meta || net.nodes.size() != expect_nodes) {
    throw InputError(std::string(origin) + ": truncated snapshot");
  }
  for (const auto& f : net.factoids) {
    bool ok = f.subject < net.nodes.size();
    if (const auto* u = std::get_if<UserRef>(&f.object)) {
      ok = ok && u->node < net.nodes.size() && f.predicate == kFollows;
    } else {
      const auto* cat = net.catalog(f.predicate);
      ok = ok && cat != nullptr && std::get<ObjectRef>(f.object).index < cat->objects.size();
    }
    if (!ok) throw InputError(std::string(origin) + ": factoid references unknown node or object");
  }
  return net;
}

}  // namespace factoidlink
