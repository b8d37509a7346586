#include "kgp/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <string>
#include <string_view>

#include "kgp/binary_io.hpp"
#include "kgp/error.hpp"

namespace kgp {
namespace {

constexpr std::uint32_t kSnapshotVersion = 1;

// Splits on blanks and parses each token as a non-negative 32-bit integer.
std::vector<std::uint32_t> parse_ids(std::string_view line, const std::string& path,
                                     std::size_t line_no) {
  std::vector<std::uint32_t> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    const std::string_view token = line.substr(pos, end - pos);
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw LoadError(path, line_no, "malformed token '" + std::string(token) + "'");
    }
    out.push_back(value);
    pos = end;
  }
  return out;
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

void sort_unique(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::size_t UserItemLists::max_item_plus_one() const {
  std::size_t m = 0;
  for (const auto& list : items) {
    if (!list.empty()) m = std::max<std::size_t>(m, list.back() + 1);
  }
  return m;
}

UserItemLists load_interactions(const std::filesystem::path& path) {
  std::ifstream in = open_text(path);
  UserItemLists lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto ids = parse_ids(line, path.string(), line_no);
    if (ids.empty()) continue;
    const std::uint32_t user = ids.front();
    if (lists.items.size() <= user) lists.items.resize(static_cast<std::size_t>(user) + 1);
    auto& dst = lists.items[user];
    dst.insert(dst.end(), ids.begin() + 1, ids.end());
    sort_unique(dst);
  }
  return lists;
}

InteractionStore InteractionStore::build(UserItemLists train, UserItemLists test,
                                         std::optional<std::size_t> num_users,
                                         std::optional<std::size_t> num_items) {
  const std::size_t seen_users = std::max(train.items.size(), test.items.size());
  const std::size_t seen_items = std::max(train.max_item_plus_one(), test.max_item_plus_one());
  InteractionStore s;
  s.num_users_ = num_users.value_or(seen_users);
  s.num_items_ = num_items.value_or(seen_items);
  if (seen_users > s.num_users_) {
    throw ValidationError("user id " + std::to_string(seen_users - 1) + " exceeds declared count " +
                          std::to_string(s.num_users_));
  }
  if (seen_items > s.num_items_) {
    throw ValidationError("item id " + std::to_string(seen_items - 1) + " exceeds declared count " +
                          std::to_string(s.num_items_));
  }
  train.items.resize(s.num_users_);
  test.items.resize(s.num_users_);
  for (std::size_t u = 0; u < s.num_users_; ++u) {
    sort_unique(train.items[u]);
    sort_unique(test.items[u]);
    std::vector<ItemId> overlap;
    std::set_intersection(train.items[u].begin(), train.items[u].end(), test.items[u].begin(),
                          test.items[u].end(), std::back_inserter(overlap));
    if (!overlap.empty()) {
      throw ValidationError("user " + std::to_string(u) + " has item " +
                            std::to_string(overlap.front()) + " in both train and test");
    }
    s.num_train_ += train.items[u].size();
    s.num_test_ += test.items[u].size();
  }
  s.train_ = std::move(train.items);
  s.test_ = std::move(test.items);
  return s;
}

bool InteractionStore::is_train_positive(UserId u, ItemId i) const {
  const auto& list = train_[u];
  return std::binary_search(list.begin(), list.end(), i);
}

std::vector<std::size_t> InteractionStore::item_train_counts() const {
  std::vector<std::size_t> counts(num_items_, 0);
  for (const auto& list : train_) {
    for (ItemId i : list) ++counts[i];
  }
  return counts;
}

std::vector<std::pair<UserId, ItemId>> InteractionStore::train_pairs() const {
  std::vector<std::pair<UserId, ItemId>> pairs;
  pairs.reserve(num_train_);
  for (std::size_t u = 0; u < train_.size(); ++u) {
    for (ItemId i : train_[u]) pairs.emplace_back(static_cast<UserId>(u), i);
  }
  return pairs;
}

std::vector<KgEdge> load_kg(const std::filesystem::path& path) {
  std::ifstream in = open_text(path);
  std::vector<KgEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto ids = parse_ids(line, path.string(), line_no);
    if (ids.empty()) continue;
    if (ids.size() != 3) {
      throw LoadError(path.string(), line_no,
                      "expected 'head relation tail', got " + std::to_string(ids.size()) + " tokens");
    }
    if (ids[0] == ids[2]) continue;
    edges.push_back({std::min(ids[0], ids[2]), std::max(ids[0], ids[2]), ids[1]});
  }
  // Stable so the first relation seen for a pair survives.
  std::stable_sort(edges.begin(), edges.end(), [](const KgEdge& a, const KgEdge& b) {
    return a.head != b.head ? a.head < b.head : a.tail < b.tail;
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const KgEdge& a, const KgEdge& b) {
                            return a.head == b.head && a.tail == b.tail;
                          }),
              edges.end());
  return edges;
}

GraphLayout infer_layout(const InteractionStore& data, std::span<const KgEdge> kg) {
  GraphLayout layout{data.num_users(), data.num_items(), 0};
  std::size_t max_raw = 0;
  bool any = false;
  for (const auto& e : kg) {
    max_raw = std::max<std::size_t>(max_raw, e.tail);
    any = true;
  }
  if (any && max_raw + 1 > layout.num_items) layout.num_entities = max_raw + 1 - layout.num_items;
  return layout;
}

UnifiedGraph UnifiedGraph::from_edges(const GraphLayout& layout,
                                      std::span<const std::pair<NodeId, NodeId>> edges) {
  const std::size_t n = layout.num_nodes();
  std::vector<std::vector<NodeId>> lists(n);
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) {
      throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") references a node outside [0, " + std::to_string(n) + ")");
    }
    if (a == b) continue;
    lists[a].push_back(b);
    lists[b].push_back(a);
  }
  UnifiedGraph g;
  g.layout_ = layout;
  g.offsets_.assign(n + 1, 0);
  for (std::size_t e = 0; e < n; ++e) {
    sort_unique(lists[e]);
    g.offsets_[e + 1] = g.offsets_[e] + lists[e].size();
  }
  g.adjacency_.reserve(g.offsets_.back());
  for (auto& list : lists) g.adjacency_.insert(g.adjacency_.end(), list.begin(), list.end());
  return g;
}

UnifiedGraph UnifiedGraph::build(const InteractionStore& data, std::span<const KgEdge> kg,
                                 const GraphLayout& layout) {
  if (layout.num_users < data.num_users() || layout.num_items < data.num_items()) {
    throw ValidationError("graph layout smaller than the interaction store");
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(data.num_train() + kg.size());
  for (const auto& [u, i] : data.train_pairs()) {
    edges.emplace_back(layout.user_node(u), layout.item_node(i));
  }
  const std::size_t kg_space = layout.num_items + layout.num_entities;
  for (const auto& e : kg) {
    if (e.head >= kg_space || e.tail >= kg_space) {
      throw ValidationError("KG edge (" + std::to_string(e.head) + ", " + std::to_string(e.tail) +
                            ") references an unknown entity");
    }
    edges.emplace_back(layout.kg_node(e.head), layout.kg_node(e.tail));
  }
  return from_edges(layout, edges);
}

void UnifiedGraph::check_node(NodeId e) const {
  if (e >= num_nodes()) {
    throw ValidationError("node " + std::to_string(e) + " out of range [0, " +
                          std::to_string(num_nodes()) + ")");
  }
}

std::span<const NodeId> UnifiedGraph::neighbors(NodeId e) const {
  check_node(e);
  return {adjacency_.data() + offsets_[e], adjacency_.data() + offsets_[e + 1]};
}

std::span<const NodeId> UnifiedGraph::item_neighbors(NodeId e) const {
  const auto all = neighbors(e);
  const NodeId lo = static_cast<NodeId>(layout_.num_users);
  const NodeId hi = static_cast<NodeId>(layout_.num_users + layout_.num_items);
  const auto first = std::lower_bound(all.begin(), all.end(), lo);
  const auto last = std::lower_bound(first, all.end(), hi);
  return {first, last};
}

bool UnifiedGraph::has_edge(NodeId a, NodeId b) const {
  const auto list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

void UnifiedGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write("KGP1", 4);
  io::write_pod<std::uint32_t>(out, kSnapshotVersion);
  io::write_pod<std::uint64_t>(out, layout_.num_users);
  io::write_pod<std::uint64_t>(out, layout_.num_items);
  io::write_pod<std::uint64_t>(out, layout_.num_entities);
  io::write_pod<std::uint64_t>(out, num_edges());
  for (std::size_t e = 0; e < num_nodes(); ++e) {
    const auto list = neighbors(static_cast<NodeId>(e));
    io::write_varint(out, list.size());
    NodeId prev = 0;
    for (NodeId n : list) {
      io::write_varint(out, n - prev);
      prev = n;
    }
  }
  if (!out) throw LoadError("write failed for " + path.string());
}

UnifiedGraph UnifiedGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  io::expect_magic(in, "KGP1");
  const auto version = io::read_pod<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw LoadError("unsupported graph snapshot version " + std::to_string(version));
  }
  GraphLayout layout;
  layout.num_users = io::read_pod<std::uint64_t>(in);
  layout.num_items = io::read_pod<std::uint64_t>(in);
  layout.num_entities = io::read_pod<std::uint64_t>(in);
  const auto num_edges = io::read_pod<std::uint64_t>(in);
  UnifiedGraph g;
  g.layout_ = layout;
  const std::size_t n = layout.num_nodes();
  g.offsets_.assign(n + 1, 0);
  g.adjacency_.reserve(2 * num_edges);
  for (std::size_t e = 0; e < n; ++e) {
    const auto deg = io::read_varint(in);
    NodeId prev = 0;
    for (std::uint64_t k = 0; k < deg; ++k) {
      prev += static_cast<NodeId>(io::read_varint(in));
      if (prev >= n) throw LoadError("snapshot neighbor id out of range");
      g.adjacency_.push_back(prev);
    }
    g.offsets_[e + 1] = g.adjacency_.size();
  }
  if (g.adjacency_.size() != 2 * num_edges) throw LoadError("snapshot edge count mismatch");
  return g;
}

Dataset Dataset::assemble(InteractionStore data, std::vector<KgEdge> kg) {
  Dataset d;
  d.layout = infer_layout(data, kg);
  d.graph = UnifiedGraph::build(data, kg, d.layout);
  d.data = std::move(data);
  d.kg = std::move(kg);
  return d;
}

Dataset Dataset::load(const std::filesystem::path& dir) {
  auto train = load_interactions(dir / "train.txt");
  auto test = load_interactions(dir / "test.txt");
  std::vector<KgEdge> kg;
  if (std::filesystem::exists(dir / "kg_final.txt")) kg = load_kg(dir / "kg_final.txt");
  return assemble(InteractionStore::build(std::move(train), std::move(test)), std::move(kg));
}

}  // namespace kgp
