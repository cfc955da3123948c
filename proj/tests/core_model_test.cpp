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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"

namespace factoidlink {
namespace {

using testsupport::named_user;
using testsupport::TempDir;
using testsupport::toy_dir;

SocialNetwork toy_source() {
  return load_network((toy_dir() / "twitter_users.jsonl").string(), (toy_dir() / "twitter_edges.csv").string(),
                      "twitter");
}

SocialNetwork toy_target() {
  return load_network((toy_dir() / "facebook_users.jsonl").string(), (toy_dir() / "facebook_edges.csv").string(),
                      "facebook");
}

UnifiedNetwork toy_unified() {
  return build_unified_network(toy_source(), toy_target(), parse_predicate_list("screen_name"));
}

std::size_t count_factoids(const UnifiedNetwork& net, NodeId subject, std::string_view predicate) {
  return static_cast<std::size_t>(std::count_if(net.factoids.begin(), net.factoids.end(), [&](const Factoid& f) {
    return f.subject == subject && f.predicate == predicate;
  }));
}

TEST(LoadNetwork, ToySourceHasFiveUsersAndSevenEdges) {
  const auto net = toy_source();
  EXPECT_EQ(net.users.size(), 5u);
  EXPECT_EQ(net.edges.size(), 7u);
  EXPECT_EQ(net.users.front().attributes.at("screen_name").as_text(), "Amy Tan");
}

TEST(LoadNetwork, EmptyUsersFileGivesEmptyNetwork) {
  TempDir dir("empty");
  testsupport::write_text(dir.path() / "u.jsonl", "");
  testsupport::write_text(dir.path() / "e.csv", "");
  const auto net = load_network((dir.path() / "u.jsonl").string(), (dir.path() / "e.csv").string(), "x");
  EXPECT_TRUE(net.users.empty());
  EXPECT_TRUE(net.edges.empty());
}

TEST(LoadNetwork, DanglingEdgeIsRejected) {
  TempDir dir("dangling");
  testsupport::write_text(dir.path() / "u.jsonl", R"({"id": "1", "attrs": {"screen_name": "A"}})" "\n");
  testsupport::write_text(dir.path() / "e.csv", "1,99\n");
  EXPECT_THROW(load_network((dir.path() / "u.jsonl").string(), (dir.path() / "e.csv").string(), "x"), InputError);
}

TEST(LoadNetwork, UndirectedAddsReverseEdgesOnce) {
  TempDir dir("undirected");
  testsupport::write_text(dir.path() / "u.jsonl", "{\"id\": \"1\"}\n{\"id\": \"2\"}\n{\"id\": \"3\"}\n");
  testsupport::write_text(dir.path() / "e.csv", "1,2\n2,1\n2,3\n");
  const auto net =
      load_network((dir.path() / "u.jsonl").string(), (dir.path() / "e.csv").string(), "x", LoadOptions{true});
  EXPECT_EQ(net.edges.size(), 4u);
}

TEST(ParseUsers, MalformedLineReportsLineNumber) {
  std::istringstream in("{\"id\": \"1\"}\n{not json\n");
  try {
    parse_users(in, "users.jsonl");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("users.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(ParseUsers, TextIsNormalizedToNfc) {
  // "e" + combining acute accent composes to U+00E9.
  std::istringstream in("{\"id\": \"1\", \"attrs\": {\"screen_name\": \"  Jose\xcc\x81  \"}}\n");
  const auto users = parse_users(in, "users");
  ASSERT_EQ(users.size(), 1u);
  EXPECT_EQ(users[0].attributes.at("screen_name").as_text(), "Jos\xc3\xa9");
}

TEST(Validate, RejectsDuplicateIdsAndSelfLoops) {
  SocialNetwork dup{"x", {named_user("1", "A"), named_user("1", "B")}, {}};
  EXPECT_THROW(validate(dup), InputError);
  SocialNetwork loop{"x", {named_user("1", "A")}, {{"1", "1"}}};
  EXPECT_THROW(validate(loop), InputError);
}

TEST(Validate, RejectsInconsistentFeatureDimensions) {
  SocialNetwork net{"x", {}, {}};
  UserRecord a{"a", {}}, b{"b", {}};
  a.attributes.emplace("image_features", AttributeObject::features({1.0, 0.0}));
  b.attributes.emplace("image_features", AttributeObject::features({1.0, 0.0, 0.0}));
  net.users = {a, b};
  EXPECT_THROW(validate(net), InputError);
}

TEST(UnifiedNetwork, ToyExampleHasNineNodesAndNameFactoid) {
  const auto net = toy_unified();
  EXPECT_EQ(net.node_count(), 9u);
  const auto one = net.find(NetworkSide::kSource, "1");
  ASSERT_TRUE(one.has_value());
  const auto* names = net.catalog("screen_name");
  ASSERT_NE(names, nullptr);
  bool found = false;
  for (const auto& f : net.factoids) {
    if (f.subject == *one && !f.is_user_user() &&
        names->objects[std::get<ObjectRef>(f.object).index].as_text() == "Amy Tan") {
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(UnifiedNetwork, SharedNameIsOneCatalogObject) {
  const auto net = toy_unified();
  const auto* names = net.catalog("screen_name");
  ASSERT_NE(names, nullptr);
  EXPECT_EQ(std::count(names->objects.begin(), names->objects.end(), AttributeObject::text("Amy Tan")), 1);
  // 9 users, 8 distinct names: "Amy Tan" is shared.
  EXPECT_EQ(names->objects.size(), 8u);
}

TEST(UnifiedNetwork, InvariantsHold) {
  const auto net = toy_unified();
  std::set<UserIdentity> seen;
  for (const auto& ids : net.nodes) {
    for (const auto& who : ids) EXPECT_TRUE(seen.insert(who).second);
  }
  std::set<std::uint32_t> referenced;
  for (const auto& f : net.factoids) {
    EXPECT_LT(f.subject, net.node_count());
    if (f.is_user_user()) {
      EXPECT_LT(std::get<UserRef>(f.object).node, net.node_count());
    } else {
      referenced.insert(std::get<ObjectRef>(f.object).index);
    }
  }
  EXPECT_EQ(referenced.size(), net.catalog("screen_name")->objects.size());
  // 7 + 8 directed edges become follows factoids.
  EXPECT_EQ(std::count_if(net.factoids.begin(), net.factoids.end(), [](const Factoid& f) { return f.is_user_user(); }),
            15);
}

TEST(UnifiedNetwork, UserWithoutAttributesOnlyFollows) {
  SocialNetwork a{"a", {named_user("1", "A"), UserRecord{"2", {}}}, {{"2", "1"}}};
  SocialNetwork b{"b", {named_user("3", "A")}, {}};
  const auto net = build_unified_network(a, b, parse_predicate_list("screen_name"));
  const NodeId two = *net.find(NetworkSide::kSource, "2");
  for (const auto& f : net.factoids) {
    if (f.subject == two) {
      EXPECT_TRUE(f.is_user_user());
    }
  }
  EXPECT_EQ(count_factoids(net, two, kFollows), 1u);
}

TEST(UnifiedNetwork, FactoidCountMatchesAttributesPlusEdgesOnRandomInputs) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    auto make = [&](const std::string& prefix) {
      SocialNetwork net{prefix, {}, {}};
      const int n = 2 + static_cast<int>(rng() % 12);
      for (int i = 0; i < n; ++i) {
        UserRecord u{prefix + std::to_string(i), {}};
        if (rng() % 3 != 0) u.attributes.emplace("screen_name", AttributeObject::text("name" + std::to_string(rng() % 5)));
        if (rng() % 2 == 0) u.attributes.emplace("username", AttributeObject::text("u" + std::to_string(rng() % 7)));
        net.users.push_back(std::move(u));
      }
      std::set<std::pair<int, int>> edges;
      for (int k = 0; k < 2 * n; ++k) {
        const int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
        if (a != b) edges.emplace(a, b);
      }
      for (const auto& [a, b] : edges) net.edges.emplace_back(prefix + std::to_string(a), prefix + std::to_string(b));
      return net;
    };
    const auto s = make("s"), g = make("t");
    std::size_t expected = s.edges.size() + g.edges.size();
    for (const auto* net : {&s, &g}) {
      for (const auto& u : net->users) expected += u.attributes.size();
    }
    const auto net = build_unified_network(s, g, parse_predicate_list("username,screen_name"));
    EXPECT_EQ(net.factoids.size(), expected);
    EXPECT_EQ(net.node_count(), s.users.size() + g.users.size());
    EXPECT_EQ(build_unified_network(s, g, parse_predicate_list("username,screen_name")).factoids, net.factoids);
  }
}

TEST(MergeAnchors, EachPairRemovesOneNode) {
  const auto net = toy_unified();
  EXPECT_EQ(merge_anchor_pairs(net, {{"1", "6"}, {"2", "7"}, {"3", "8"}}).node_count(), net.node_count() - 3);
}

TEST(MergeAnchors, EmptyAnchorsLeaveNetworkUnchanged) {
  const auto net = toy_unified();
  const auto merged = merge_anchor_pairs(net, {});
  EXPECT_EQ(merged.nodes, net.nodes);
  EXPECT_EQ(merged.factoids, net.factoids);
}

TEST(MergeAnchors, MergedNodeCarriesNameAndUnionOfFollows) {
  const auto net = toy_unified();
  const auto merged = merge_anchor_pairs(net, {{"1", "6"}});
  EXPECT_EQ(merged.node_count(), 8u);
  const NodeId n = *merged.find(NetworkSide::kSource, "1");
  EXPECT_EQ(merged.find(NetworkSide::kTarget, "6"), n);
  // Both identities carry the identical triplet <n, has_screen_name, Amy Tan>;
  // the unified factoid set keeps one copy.
  EXPECT_EQ(count_factoids(merged, n, "has_screen_name"), 1u);
  // Twitter 1 follows 2 and 3; Facebook 6 follows 7 and 8.
  EXPECT_EQ(count_factoids(merged, n, kFollows), 4u);
  std::size_t into_n = 0;
  for (const auto& f : merged.factoids) {
    if (f.is_user_user() && std::get<UserRef>(f.object).node == n) ++into_n;
  }
  // Followed by 2 and 3 (Twitter) and by 7 and 8 (Facebook).
  EXPECT_EQ(into_n, 4u);
}

TEST(MergeAnchors, ConflictingAnchorsAreRejected) {
  const auto net = toy_unified();
  EXPECT_THROW(merge_anchor_pairs(net, {{"1", "6"}, {"1", "7"}}), InputError);
  EXPECT_THROW(merge_anchor_pairs(net, {{"1", "6"}, {"2", "6"}}), InputError);
  EXPECT_THROW(merge_anchor_pairs(net, {{"1", "404"}}), InputError);
}

TEST(Snapshot, RoundTripsUnifiedNetwork) {
  const auto net = merge_anchor_pairs(toy_unified(), {{"2", "7"}});
  std::stringstream buf;
  write_snapshot(buf, net);
  const auto back = read_snapshot(buf);
  EXPECT_EQ(back.nodes, net.nodes);
  EXPECT_EQ(back.factoids, net.factoids);
  ASSERT_EQ(back.catalogs.size(), net.catalogs.size());
  EXPECT_EQ(back.catalogs[0].objects, net.catalogs[0].objects);
}

TEST(Snapshot, RejectsForeignFormat) {
  std::istringstream in(R"({"kind": "meta", "format": "something-else", "version": 1, "source": "a", "target": "b"})" "\n");
  EXPECT_THROW(read_snapshot(in), InputError);
}

TEST(Predicates, ParsesKnownListAndRejectsUnknown) {
  const auto preds = parse_predicate_list("username,image");
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0].factoid_name, "has_username");
  EXPECT_EQ(preds[1].kind, ObjectKind::kVector);
  EXPECT_THROW(parse_predicate_list("username,shoe_size"), InputError);
}

TEST(Random, DerivedSeedsDifferByStage) {
  EXPECT_NE(derive_seed(1, "sim:username"), derive_seed(1, "sim:image"));
  EXPECT_EQ(derive_seed(1, "train"), derive_seed(1, "train"));
  EXPECT_NE(derive_seed(1, "train"), derive_seed(2, "train"));
}

}  // namespace
}  // namespace factoidlink
