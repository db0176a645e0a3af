#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers/reference.hpp"
#include "stabletree/core/dataset_io.hpp"
#include "stabletree/core/region.hpp"
#include "stabletree/core/tree.hpp"
#include "stabletree/core/tree_io.hpp"
#include "stabletree/error.hpp"
#include "stabletree/random.hpp"

using namespace stabletree;
using namespace stabletree::core;

namespace {

Schema mixed_schema() {
  return Schema({ColumnSpec::continuous("age"), ColumnSpec::continuous("score"),
                 ColumnSpec::ordinal("q17", 4, {"never", "rarely", "often", "always"})},
                {"healthy", "mild", "severe"});
}

/// Random tree over mixed_schema with thresholds drawn inside each node's region.
Tree random_tree(std::mt19937_64& rng, std::size_t max_depth) {
  Tree tree(mixed_schema());
  struct Builder {
    std::mt19937_64& rng;
    Tree& tree;
    std::size_t max_depth;
    NodeId grow(const Region& region, std::size_t depth) {
      const NodeId id = tree.reserve_node();
      if (depth < max_depth && uniform01(rng) < 0.75) {
        for (int attempt = 0; attempt < 10; ++attempt) {
          const std::size_t c = uniform_index(rng, 3);
          const auto& b = region.bounds(c);
          double t;
          if (c == 2) {
            const auto [lo, hi] = region.level_range(c);
            if (hi <= lo) continue;
            t = lo + 0.5 + static_cast<double>(uniform_index(rng, static_cast<std::size_t>(hi - lo)));
          } else {
            const double lo = std::isfinite(b.lower) ? b.lower : -2.0;
            const double hi = std::isfinite(b.upper) ? b.upper : 2.0;
            t = lo + (hi - lo) * (0.1 + 0.8 * uniform01(rng));
          }
          const SplitRule rule{c, t};
          InternalNode in{rule, 0, 0, {}};
          in.left = grow(refine(region, rule, Side::Left), depth + 1);
          in.right = grow(refine(region, rule, Side::Right), depth + 1);
          tree.set_node(id, in);
          return id;
        }
      }
      std::vector<double> p{uniform01(rng), uniform01(rng), uniform01(rng)};
      const double s = p[0] + p[1] + p[2];
      for (auto& v : p) v /= s;
      tree.set_node(id, Tree::make_leaf(p, 10));
      return id;
    }
  } b{rng, tree, max_depth};
  b.grow(Region(tree.schema()), 1);
  return tree;
}

std::vector<double> random_row(std::mt19937_64& rng) {
  return {4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0, static_cast<double>(uniform_index(rng, 4))};
}

}  // namespace

TEST_CASE("schema validation") {
  CHECK_THROWS_AS(Schema({ColumnSpec::continuous("a")}, {"only"}), SchemaError);
  CHECK_THROWS_AS(Schema({ColumnSpec::continuous("a"), ColumnSpec::continuous("a")}, {"x", "y"}), SchemaError);
  CHECK_THROWS_AS(Schema({ColumnSpec::ordinal("a", 1)}, {"x", "y"}), SchemaError);
  CHECK_THROWS_AS(Schema({ColumnSpec::continuous("label")}, {"x", "y"}), SchemaError);
  const auto s = mixed_schema();
  CHECK(s.find_column("q17") == std::optional<std::size_t>{2});
  const std::vector<double> ok{0.1, 2.0, 3.0}, bad_level{0.1, 2.0, 1.5}, short_row{0.1};
  CHECK_NOTHROW(s.check_row(ok));
  CHECK_THROWS_AS(s.check_row(bad_level), SchemaError);
  CHECK_THROWS_AS(s.check_row(short_row), SchemaError);
}

TEST_CASE("schema digest depends on content only") {
  CHECK(mixed_schema().digest() == mixed_schema().digest());
  const Schema other({ColumnSpec::continuous("age"), ColumnSpec::continuous("score"), ColumnSpec::ordinal("q17", 5)},
                     {"healthy", "mild", "severe"});
  CHECK(other.digest() != mixed_schema().digest());
  CHECK(schema_from_json(schema_to_json(mixed_schema())) == mixed_schema());
}

TEST_CASE("routing convention") {
  const std::vector<double> below{0.3, 0.0, 0.0}, at{0.5, 0.0, 0.0}, ord{0.0, 0.0, 2.0};
  CHECK(route({0, 0.5}, below) == Side::Left);
  CHECK(route({0, 0.5}, at) == Side::Left);
  CHECK(route({2, 1.5}, ord) == Side::Right);
  CHECK_THROWS_AS(route({7, 0.5}, below), SchemaError);
}

TEST_CASE("region refinement") {
  const Region root(mixed_schema());
  const auto left = refine(root, {0, 0.5}, Side::Left);
  CHECK(left.bounds(0).upper == 0.5);
  CHECK(std::isinf(left.bounds(0).lower));

  const auto mid = refine(refine(root, {0, 0.2}, Side::Right), {0, 0.8}, Side::Left);
  const auto right = refine(mid, {0, 0.5}, Side::Right);
  CHECK(right.bounds(0).lower == 0.5);
  CHECK(right.bounds(0).upper == 0.8);

  const auto thin = refine(refine(root, {0, 0.2}, Side::Right), {0, 0.4}, Side::Left);
  CHECK_THROWS_AS(refine(thin, {0, 0.5}, Side::Left), DegenerateSplitError);
  CHECK_THROWS_AS(refine(thin, {0, 0.5}, Side::Right), DegenerateSplitError);

  SUBCASE("ordinal levels") {
    const auto low = refine(root, {2, 1.5}, Side::Left);
    CHECK(low.level_range(2) == std::pair{0, 1});
    const auto one = refine(low, {2, 0.5}, Side::Right);
    CHECK(one.level_range(2) == std::pair{1, 1});
    CHECK_THROWS_AS(refine(one, {2, 0.5}, Side::Left), DegenerateSplitError);
  }
  SUBCASE("refinement is monotone") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
      const auto x = random_row(rng);
      for (auto side : {Side::Left, Side::Right}) {
        const auto r = refine(mid, {1, 0.1}, side);
        if (r.contains(x)) {
          CHECK(mid.contains(x));
          CHECK(route({1, 0.1}, x) == side);
        }
      }
    }
  }
}

TEST_CASE("tree basics and validation") {
  Tree leaf_only(mixed_schema());
  leaf_only.set_node(leaf_only.reserve_node(), Tree::make_leaf({0.3, 0.7, 0.0}));
  const std::vector<double> x{0.0, 0.0, 1.0};
  const auto pred = predict(leaf_only, x);
  CHECK(pred.class_probs[0] == 0.3);
  CHECK(pred.class_probs[1] == 0.7);
  CHECK(pred.predicted_class == 1);
  CHECK(pred.path.empty());

  CHECK(Tree::make_leaf({0.4, 0.4, 0.2}).predicted_class == 0);

  Tree t(mixed_schema());
  const NodeId root = t.reserve_node();
  const NodeId a = t.reserve_node();
  const NodeId b = t.reserve_node();
  t.set_node(a, Tree::make_leaf({1, 0, 0}));
  t.set_node(b, Tree::make_leaf({0, 0, 1}));
  t.set_node(root, InternalNode{{0, 0.0}, a, b, {}});
  CHECK_NOTHROW(t.validate(2));
  CHECK_THROWS_AS(t.validate(1), InvariantError);
  CHECK(t.depth() == 2);
  CHECK(t.leaf_count() == 2);
  CHECK(t.internal_count() == 1);

  Tree broken(mixed_schema());
  const NodeId r2 = broken.reserve_node();
  const NodeId c2 = broken.reserve_node();
  broken.set_node(c2, Tree::make_leaf({1, 0, 0}));
  broken.set_node(r2, InternalNode{{0, 0.0}, c2, c2, {}});
  CHECK_THROWS_AS(broken.validate(), InvariantError);
}

TEST_CASE("prediction agrees with path enumeration on random trees") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const auto tree = random_tree(rng, 6);
    REQUIRE_NOTHROW(tree.validate(6));
    for (int i = 0; i < 200; ++i) {
      const auto x = random_row(rng);
      const auto expected = reference::predict_by_paths(tree, x);
      REQUIRE(expected.size() == 3);
      const auto got = predict(tree, x);
      CHECK(std::vector<double>(got.class_probs.begin(), got.class_probs.end()) == expected);
      CHECK(got.path.size() == got.sides.size());
      for (std::size_t s = 0; s < got.path.size(); ++s) CHECK(route(got.path[s], x) == got.sides[s]);
    }
  }
}

TEST_CASE("digest mismatch is refused") {
  std::mt19937_64 rng(1);
  auto tree = random_tree(rng, 3);
  tree.set_schema_digest(tree.schema_digest() ^ 1);
  const std::vector<double> x{0.0, 0.0, 1.0};
  CHECK_THROWS_AS(predict(tree, x), IncompatibleTreeError);
}

TEST_CASE("tree JSON export") {
  std::mt19937_64 rng(7);
  const auto tree = random_tree(rng, 5);
  const auto j = tree_to_json(tree);

  SUBCASE("document layout") {
    CHECK(j.at("format") == "stabletree.tree");
    CHECK(j.at("version") == 1);
    CHECK(j.at("schema_digest") == digest_hex(mixed_schema().digest()));
    CHECK(j.at("schema").at("columns").size() == 3);
    CHECK(j.at("schema").at("columns")[2].at("kind") == "ordinal");
    CHECK(j.at("schema").at("columns")[2].at("levels") == 4);
    CHECK(j.at("schema").at("columns")[2].at("level_labels")[3] == "always");
    CHECK(j.at("schema").at("classes")[2] == "severe");
    // Every node is either a rule with two children or a leaf with probabilities.
    std::vector<nlohmann::json> stack{j.at("root")};
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      if (n.contains("rule")) {
        CHECK(n.at("rule").at("column").is_number_integer());
        CHECK(n.at("rule").at("threshold").is_number());
        CHECK(n.at("diagnostics").contains("pseudo_samples_used"));
        stack.push_back(n.at("left"));
        stack.push_back(n.at("right"));
      } else {
        CHECK(n.at("probs").size() == 3);
      }
    }
  }

  SUBCASE("round trip keeps predictions bit-equal") {
    const auto back = tree_from_json(nlohmann::json::parse(tree_to_string(tree)));
    CHECK(back == tree);
    for (int i = 0; i < 1000; ++i) {
      const auto x = random_row(rng);
      const auto a = predict_proba(tree, x);
      const auto b = predict_proba(back, x);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
    CHECK(tree_to_string(back) == tree_to_string(tree));
  }

  SUBCASE("tampered schema is detected") {
    auto bad = j;
    bad["schema"]["classes"][0] = "renamed";
    CHECK_THROWS_AS(tree_from_json(bad), IncompatibleTreeError);
  }
  SUBCASE("wrong format marker") {
    auto bad = j;
    bad["format"] = "something";
    CHECK_THROWS_AS(tree_from_json(bad), DataError);
  }
  SUBCASE("leaf with the wrong number of classes") {
    auto bad = j;
    auto* n = &bad["root"];
    while (n->contains("rule")) n = &(*n)["left"];
    (*n)["probs"] = {0.5, 0.5};
    CHECK_THROWS_AS(tree_from_json(bad), DataError);
  }
}

TEST_CASE("DOT export names every node") {
  std::mt19937_64 rng(3);
  const auto tree = random_tree(rng, 3);
  const auto dot = tree_to_dot(tree);
  CHECK(dot.rfind("digraph", 0) == 0);
  for (NodeId id = 0; id < tree.nodes().size(); ++id) CHECK(dot.find("n" + std::to_string(id) + " [") != std::string::npos);
}

TEST_CASE("CSV reading") {
  const auto schema = mixed_schema();
  SUBCASE("columns matched by name, labels by name or index") {
    std::istringstream in("q17,label,age,score\n2,severe,0.5,1\n0,1,-1.25,3e-1\n");
    const auto d = read_csv(in, schema, LabelPolicy::Required, "t.csv");
    REQUIRE(d.size() == 2);
    CHECK(d.rows(0, 0) == 0.5);
    CHECK(d.rows(0, 2) == 2.0);
    CHECK(d.rows(1, 1) == 0.3);
    CHECK(*d.labels == std::vector<int>{2, 1});
  }
  SUBCASE("missing label column is named") {
    std::istringstream in("age,score,q17\n0.5,1,2\n");
    try {
      read_csv(in, schema, LabelPolicy::Required, "t.csv");
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'label'") != std::string::npos);
    }
  }
  SUBCASE("missing covariates are listed") {
    std::istringstream in("age,label\n0.5,mild\n");
    try {
      read_csv(in, schema, LabelPolicy::Optional, "t.csv");
      FAIL("expected an error");
    } catch (const SchemaError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("score") != std::string::npos);
      CHECK(msg.find("q17") != std::string::npos);
    }
  }
  SUBCASE("bad cell reports line and column") {
    std::istringstream in("age,score,q17\n0.5,1,2\n0.5,abc,2\n");
    try {
      read_csv(in, schema, LabelPolicy::Optional, "t.csv");
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).rfind("t.csv:3:2: ", 0) == 0);
    }
  }
  SUBCASE("ordinal cell outside its levels") {
    std::istringstream in("age,score,q17\n0.5,1,9\n");
    CHECK_THROWS_AS(read_csv(in, schema, LabelPolicy::Optional, "t.csv"), DataError);
  }
  SUBCASE("unknown extra column") {
    std::istringstream in("age,score,q17,extra\n0.5,1,2,0\n");
    CHECK_THROWS_AS(read_csv(in, schema, LabelPolicy::Optional, "t.csv"), SchemaError);
  }
  SUBCASE("write then read is exact") {
    std::mt19937_64 rng(2);
    Matrix m(0, 3);
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
      m.append_row(random_row(rng));
      labels.push_back(i % 3);
    }
    const Dataset d(schema, m, labels);
    std::stringstream buf;
    write_csv(buf, d);
    const auto back = read_csv(buf, schema, LabelPolicy::Required);
    CHECK(back.rows == d.rows);
    CHECK(*back.labels == labels);
  }
}

TEST_CASE("argmax and probability checks") {
  const std::vector<double> tie{0.5, 0.5}, v{0.1, 0.7, 0.2}, bad{0.6, 0.6};
  CHECK(argmax(tie) == 0);
  CHECK(argmax(v) == 1);
  CHECK_NOTHROW(check_probability_vector(v));
  CHECK_THROWS_AS(check_probability_vector(bad), ContractError);
}
