#pragma once

// Interaction data, the merged knowledge graph, and the unified node space
//   users    [0, U)
//   items    [U, U + I)
//   entities [U + I, U + I + P)
// Raw KG ids follow the usual released-dataset convention where ids below I
// are items and the rest are pure KG entities, so raw id k maps to node U + k.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace kgp {

using NodeId = std::uint32_t;
using UserId = std::uint32_t;
using ItemId = std::uint32_t;  // item index in [0, I), not a node id

enum class NodeRole : std::uint8_t { user, item, entity };

// One side (train or test) of a user -> items file. Index is the user id;
// each list is sorted and duplicate-free.
struct UserItemLists {
  std::vector<std::vector<ItemId>> items;

  std::size_t max_item_plus_one() const;
};

UserItemLists load_interactions(const std::filesystem::path& path);

class InteractionStore {
 public:
  InteractionStore() = default;

  // Counts default to max id + 1 over both sides. Throws ValidationError when
  // an id exceeds a declared count or when a pair is in both sides.
  static InteractionStore build(UserItemLists train, UserItemLists test,
                                std::optional<std::size_t> num_users = {},
                                std::optional<std::size_t> num_items = {});

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_train() const noexcept { return num_train_; }
  std::size_t num_test() const noexcept { return num_test_; }

  std::span<const ItemId> train(UserId u) const { return train_.at(u); }
  std::span<const ItemId> test(UserId u) const { return test_.at(u); }
  bool is_train_positive(UserId u, ItemId i) const;

  // Interaction count per item over the train side.
  std::vector<std::size_t> item_train_counts() const;

  // Every (u, i) in the train side, grouped by user, items ascending.
  std::vector<std::pair<UserId, ItemId>> train_pairs() const;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t num_train_ = 0;
  std::size_t num_test_ = 0;
  std::vector<std::vector<ItemId>> train_;
  std::vector<std::vector<ItemId>> test_;
};

// Undirected conceptual edge between raw KG ids, head < tail. The relation is
// the first one seen for the pair and is kept only for readable path exports.
struct KgEdge {
  std::uint32_t head = 0;
  std::uint32_t tail = 0;
  std::uint32_t relation = 0;
};

std::vector<KgEdge> load_kg(const std::filesystem::path& path);

struct GraphLayout {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_entities = 0;

  std::size_t num_nodes() const noexcept { return num_users + num_items + num_entities; }
  NodeRole role(NodeId n) const noexcept {
    if (n < num_users) return NodeRole::user;
    if (n < num_users + num_items) return NodeRole::item;
    return NodeRole::entity;
  }
  bool is_user(NodeId n) const noexcept { return n < num_users; }
  bool is_item(NodeId n) const noexcept { return n >= num_users && n < num_users + num_items; }
  NodeId user_node(UserId u) const noexcept { return static_cast<NodeId>(u); }
  NodeId item_node(ItemId i) const noexcept { return static_cast<NodeId>(num_users + i); }
  ItemId item_of(NodeId n) const noexcept { return static_cast<ItemId>(n - num_users); }
  NodeId kg_node(std::uint32_t raw) const noexcept { return static_cast<NodeId>(num_users + raw); }
  std::uint32_t kg_id(NodeId n) const noexcept { return static_cast<std::uint32_t>(n - num_users); }

  bool operator==(const GraphLayout&) const = default;
};

// Entity count = max raw KG id + 1 - I (never negative).
GraphLayout infer_layout(const InteractionStore& data, std::span<const KgEdge> kg);

class UnifiedGraph {
 public:
  UnifiedGraph() = default;

  // Merges train-side interactions with the KG. Test pairs never enter.
  static UnifiedGraph build(const InteractionStore& data, std::span<const KgEdge> kg,
                            const GraphLayout& layout);

  // Direct construction from an undirected edge list over node ids; used by
  // tests and the synthetic worlds. Self-loops and duplicates are dropped.
  static UnifiedGraph from_edges(const GraphLayout& layout,
                                 std::span<const std::pair<NodeId, NodeId>> edges);

  const GraphLayout& layout() const noexcept { return layout_; }
  std::size_t num_nodes() const noexcept { return layout_.num_nodes(); }
  std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId e) const;
  // Item-role subset of neighbors(e), same order. Items are a contiguous id
  // range, so this is a subrange of the sorted list.
  std::span<const NodeId> item_neighbors(NodeId e) const;
  std::size_t degree(NodeId e) const { return neighbors(e).size(); }
  bool has_edge(NodeId a, NodeId b) const;

  // "KGP1" snapshot: header, counts, then per node a varint degree followed by
  // delta-encoded sorted neighbor ids.
  void save(const std::filesystem::path& path) const;
  static UnifiedGraph load(const std::filesystem::path& path);

  bool operator==(const UnifiedGraph&) const = default;

 private:
  void check_node(NodeId e) const;

  GraphLayout layout_;
  std::vector<std::uint64_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

// train.txt + test.txt + kg_final.txt from one directory.
struct Dataset {
  InteractionStore data;
  std::vector<KgEdge> kg;
  GraphLayout layout;
  UnifiedGraph graph;

  static Dataset load(const std::filesystem::path& dir);
  static Dataset assemble(InteractionStore data, std::vector<KgEdge> kg);
};

}  // namespace kgp
