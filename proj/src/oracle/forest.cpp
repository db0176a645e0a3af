#include "stabletree/oracle/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "stabletree/core/dataset_io.hpp"
#include "stabletree/error.hpp"
#include "stabletree/parallel.hpp"
#include "stabletree/random.hpp"
#include "stabletree/splitstat/splitstat.hpp"

namespace stabletree::oracle {

static_assert(std::endian::native == std::endian::little, "forest files are little-endian");

std::span<const double> CartTree::leaf_for(std::span<const double> x, std::size_t k) const {
  std::uint32_t id = 0;
  while (nodes[id].feature >= 0) {
    const auto& node = nodes[id];
    id = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return {leaf_probs.data() + nodes[id].leaf * k, k};
}

namespace {

struct PendingNode {
  std::uint32_t id;
  std::size_t begin;
  std::size_t end;
  std::size_t depth;
};

void make_leaf(CartTree& tree, std::uint32_t id, std::span<const double> counts, double total) {
  auto& node = tree.nodes[id];
  node.feature = -1;
  node.leaf = static_cast<std::uint32_t>(tree.leaf_probs.size() / counts.size());
  for (double c : counts) tree.leaf_probs.push_back(c / total);
}

}  // namespace

CartTree fit_cart(const core::Matrix& x, std::span<const int> labels, std::size_t k,
                  std::span<const std::size_t> rows, std::size_t features_per_split,
                  std::optional<std::size_t> max_depth, std::size_t min_leaf, std::mt19937_64& rng) {
  const std::size_t m = x.cols;
  if (rows.empty()) throw ContractError("fit_cart: no rows");
  features_per_split = std::clamp<std::size_t>(features_per_split, 1, m);
  min_leaf = std::max<std::size_t>(min_leaf, 1);

  CartTree tree;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<std::size_t> features(m);
  std::vector<std::size_t> scratch;
  std::vector<double> counts(k), left(k), right(k);
  std::vector<PendingNode> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, idx.size(), 1});

  while (!stack.empty()) {
    const PendingNode cur = stack.back();
    stack.pop_back();
    const std::size_t size = cur.end - cur.begin;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t p = cur.begin; p < cur.end; ++p) counts[static_cast<std::size_t>(labels[idx[p]])] += 1;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || size < 2 * min_leaf || (max_depth && cur.depth >= *max_depth)) {
      make_leaf(tree, cur.id, counts, static_cast<double>(size));
      continue;
    }

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t f = 0; f < features_per_split; ++f)
      std::swap(features[f], features[f + uniform_index(rng, m - f)]);

    double best_gini = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_feature;
    double best_threshold = 0.0;
    for (std::size_t f = 0; f < features_per_split; ++f) {
      const std::size_t feat = features[f];
      scratch.assign(idx.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                     idx.begin() + static_cast<std::ptrdiff_t>(cur.end));
      std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
        return x(a, feat) < x(b, feat) || (x(a, feat) == x(b, feat) && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      for (std::size_t p = 0; p + 1 < size; ++p) {
        left[static_cast<std::size_t>(labels[scratch[p]])] += 1;
        const double here = x(scratch[p], feat), next = x(scratch[p + 1], feat);
        if (here == next) continue;
        const std::size_t nl = p + 1;
        if (nl < min_leaf || size - nl < min_leaf) continue;
        for (std::size_t j = 0; j < k; ++j) right[j] = counts[j] - left[j];
        const double g = splitstat::children_gini(static_cast<double>(nl), left,
                                                  static_cast<double>(size - nl), right);
        if (g < best_gini) {
          best_gini = g;
          best_feature = feat;
          best_threshold = here + (next - here) / 2.0;
          if (!(best_threshold < next)) best_threshold = here;
        }
      }
    }
    if (!best_feature) {
      make_leaf(tree, cur.id, counts, static_cast<double>(size));
      continue;
    }
    const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                    idx.begin() + static_cast<std::ptrdiff_t>(cur.end),
                                    [&](std::size_t r) { return x(r, *best_feature) <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    const auto left_id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[cur.id];
    node.feature = static_cast<std::int32_t>(*best_feature);
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = left_id + 1;
    // Right first so the left subtree is expanded next (depth-first, left to right).
    stack.push_back({left_id + 1, split, cur.end, cur.depth + 1});
    stack.push_back({left_id, cur.begin, split, cur.depth + 1});
  }
  return tree;
}

std::shared_ptr<RandomForest> fit_forest(const core::Dataset& data, const ForestConfig& config) {
  if (!data.labels) throw DataError("fit_forest needs labelled data");
  if (config.tree_count < 1) throw ConfigError("tree_count must be at least 1");
  const std::size_t n = data.size();
  const std::size_t m = data.schema.column_count();
  const std::size_t k = data.schema.class_count();
  if (n < 2) throw DataError("fit_forest needs at least 2 rows");
  const std::size_t mtry = config.features_per_split.value_or(
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m)))));
  if (mtry < 1 || mtry > m) throw ConfigError("features_per_split must be in 1.." + std::to_string(m));

  const auto& labels = *data.labels;
  std::vector<double> freq(k, 0.0);
  for (int l : labels) freq[static_cast<std::size_t>(l)] += 1;
  const auto observed = std::count_if(freq.begin(), freq.end(), [](double c) { return c > 0; });
  if (observed < 2) {
    if (!config.allow_constant)
      throw DegenerateOracleError("training labels contain a single class; the oracle would be constant");
    CartTree leaf;
    leaf.nodes.emplace_back();
    make_leaf(leaf, 0, freq, static_cast<double>(n));
    return std::make_shared<RandomForest>(data.schema, std::vector<CartTree>(config.tree_count, leaf),
                                          config, std::numeric_limits<double>::quiet_NaN());
  }

  std::vector<CartTree> trees(config.tree_count);
  std::vector<std::vector<char>> in_bag(config.tree_count);
  const SeedPath root = SeedPath(config.seed).child("forest");
  parallel_for(config.tree_count, config.threads, [&](std::size_t t) {
    auto rng = root.child(t).engine();
    std::vector<std::size_t> rows(n);
    auto& bag = in_bag[t];
    bag.assign(n, 0);
    if (config.bootstrap) {
      for (auto& r : rows) {
        r = uniform_index(rng, n);
        bag[r] = 1;
      }
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::fill(bag.begin(), bag.end(), 1);
    }
    trees[t] = fit_cart(data.rows, labels, k, rows, mtry, config.max_depth, config.min_leaf, rng);
  });

  double oob = std::numeric_limits<double>::quiet_NaN();
  if (config.bootstrap) {
    std::size_t scored = 0, correct = 0;
    std::vector<double> acc(k);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t votes = 0;
      for (std::size_t t = 0; t < trees.size(); ++t) {
        if (in_bag[t][i]) continue;
        const auto p = trees[t].leaf_for(data.rows.row(i), k);
        for (std::size_t j = 0; j < k; ++j) acc[j] += p[j];
        ++votes;
      }
      if (votes == 0) continue;
      ++scored;
      correct += core::argmax(acc) == static_cast<std::size_t>(labels[i]);
    }
    if (scored) oob = static_cast<double>(correct) / static_cast<double>(scored);
  }
  return std::make_shared<RandomForest>(data.schema, std::move(trees), config, oob);
}

RandomForest::RandomForest(core::Schema schema, std::vector<CartTree> trees, ForestConfig config,
                           double oob_accuracy)
    : schema_(std::move(schema)), trees_(std::move(trees)), config_(config), oob_accuracy_(oob_accuracy) {
  if (trees_.empty()) throw ConfigError("forest has no trees");
}

core::Matrix RandomForest::predict_proba(const core::Matrix& rows) const {
  const std::size_t k = class_count();
  if (rows.rows > 0 && rows.cols != feature_count())
    throw SchemaError("forest expects " + std::to_string(feature_count()) + " columns, got " +
                      std::to_string(rows.cols));
  core::Matrix out(rows.rows, k);
  const double scale = 1.0 / static_cast<double>(trees_.size());
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (rows.rows + kBlock - 1) / kBlock;
  parallel_for(blocks, config_.threads, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(rows.rows, lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      auto dst = out.row(i);
      const auto x = rows.row(i);
      for (const auto& tree : trees_) {
        const auto p = tree.leaf_for(x, k);
        for (std::size_t j = 0; j < k; ++j) dst[j] += p[j];
      }
      for (auto& v : dst) v *= scale;
    }
  });
  return out;
}

std::string RandomForest::describe() const {
  return "random forest (" + std::to_string(trees_.size()) + " trees)";
}

namespace {

constexpr char kMagic[8] = {'S', 'T', 'F', 'O', 'R', 'E', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_ += s;
  }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("forest file truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint64_t>();
    if (len > bytes_.size() - pos_) throw DataError("forest file truncated");
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string RandomForest::serialize() const {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put_string(core::schema_to_json(schema_).dump());
  w.put<std::uint64_t>(schema_.digest());
  w.put<std::uint64_t>(config_.tree_count);
  w.put<std::int64_t>(config_.max_depth ? static_cast<std::int64_t>(*config_.max_depth) : -1);
  w.put<std::uint64_t>(config_.min_leaf);
  w.put<std::int64_t>(config_.features_per_split ? static_cast<std::int64_t>(*config_.features_per_split) : -1);
  w.put<std::uint8_t>(config_.bootstrap);
  w.put<std::uint64_t>(config_.seed);
  w.put<double>(oob_accuracy_);
  w.put<std::uint64_t>(trees_.size());
  for (const auto& tree : trees_) {
    w.put<std::uint64_t>(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      w.put(node.feature);
      w.put(node.threshold);
      w.put(node.left);
      w.put(node.right);
      w.put(node.leaf);
    }
    w.put<std::uint64_t>(tree.leaf_probs.size());
    for (double p : tree.leaf_probs) w.put(p);
  }
  return w.take();
}

std::shared_ptr<RandomForest> RandomForest::deserialize(const std::string& bytes) {
  Reader r(bytes);
  for (char c : kMagic)
    if (r.get<char>() != c) throw DataError("not a stabletree forest file");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion)
    throw DataError("unsupported forest file version " + std::to_string(v));
  core::Schema schema;
  try {
    schema = core::schema_from_json(nlohmann::json::parse(r.get_string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("forest file has a malformed schema: ") + e.what());
  }
  if (r.get<std::uint64_t>() != schema.digest()) throw DataError("forest file schema digest mismatch");
  ForestConfig config;
  config.tree_count = r.get<std::uint64_t>();
  if (const auto d = r.get<std::int64_t>(); d >= 0) config.max_depth = static_cast<std::size_t>(d);
  config.min_leaf = r.get<std::uint64_t>();
  if (const auto f = r.get<std::int64_t>(); f >= 0) config.features_per_split = static_cast<std::size_t>(f);
  config.bootstrap = r.get<std::uint8_t>() != 0;
  config.seed = r.get<std::uint64_t>();
  const double oob = r.get<double>();
  const auto count = r.get<std::uint64_t>();
  const std::size_t k = schema.class_count();
  const std::size_t m = schema.column_count();
  std::vector<CartTree> trees(count);
  for (auto& tree : trees) {
    const auto nodes = r.get<std::uint64_t>();
    if (nodes == 0 || nodes > bytes.size()) throw DataError("forest file has a corrupt tree");
    tree.nodes.resize(nodes);
    for (auto& node : tree.nodes) {
      node.feature = r.get<std::int32_t>();
      node.threshold = r.get<double>();
      node.left = r.get<std::uint32_t>();
      node.right = r.get<std::uint32_t>();
      node.leaf = r.get<std::uint32_t>();
    }
    const auto probs = r.get<std::uint64_t>();
    if (probs > bytes.size() || probs % k != 0) throw DataError("forest file has a corrupt leaf table");
    tree.leaf_probs.resize(probs);
    for (auto& p : tree.leaf_probs) p = r.get<double>();
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      const auto& node = tree.nodes[id];
      const bool bad = node.feature >= 0
                           ? (static_cast<std::size_t>(node.feature) >= m || node.left <= id ||
                              node.right <= id || node.left >= nodes || node.right >= nodes)
                           : (static_cast<std::size_t>(node.leaf) * k + k > probs);
      if (bad) throw DataError("forest file has a corrupt node");
    }
  }
  if (!r.done()) throw DataError("forest file has trailing bytes");
  return std::make_shared<RandomForest>(std::move(schema), std::move(trees), config, oob);
}

void RandomForest::save(const std::filesystem::path& path) const {
  core::write_text_file(path, serialize());
}

std::shared_ptr<RandomForest> RandomForest::load(const std::filesystem::path& path) {
  return deserialize(core::read_text_file(path));
}

}  // namespace stabletree::oracle
