#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causaldebias/data.hpp"

namespace cdb {

struct Edge {
  std::string src;
  std::string dst;
  bool directed = true;

  auto operator<=>(const Edge&) const = default;
};

/// Partially directed graph over named nodes. At most one edge per pair;
/// mutators that could close a directed cycle check first.
class Pdag {
 public:
  Pdag() = default;
  explicit Pdag(std::vector<std::string> nodes);

  const std::vector<std::string>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  std::size_t require(const std::string& name) const;

  bool adjacent(std::size_t a, std::size_t b) const { return state(a, b) != kNone; }
  bool has_directed(std::size_t a, std::size_t b) const { return state(a, b) == kOut; }
  bool has_undirected(std::size_t a, std::size_t b) const { return state(a, b) == kUndirected; }

  void add_undirected(std::size_t a, std::size_t b);
  /// Throws CycleError if a -> b would close a directed cycle.
  void add_directed(std::size_t a, std::size_t b);
  /// Turns a -- b (or b -> a) into a -> b; CycleError on cycle.
  void orient(std::size_t a, std::size_t b);
  void remove(std::size_t a, std::size_t b);

  std::vector<std::size_t> parents(std::size_t v) const;
  std::vector<std::size_t> children(std::size_t v) const;
  std::vector<std::size_t> undirected_neighbors(std::size_t v) const;
  std::vector<std::size_t> adjacents(std::size_t v) const;
  std::vector<std::string> parent_names(const std::string& v) const;

  /// True if a directed path from `from` reaches `to`.
  bool reaches(std::size_t from, std::size_t to) const;
  bool would_create_cycle(std::size_t a, std::size_t b) const { return a == b || reaches(b, a); }
  bool acyclic() const;
  /// Nodes reachable from v by directed edges, excluding v.
  std::set<std::size_t> descendants(std::size_t v) const;
  /// Kahn order over directed edges, ties broken by node name.
  std::vector<std::size_t> topological_order() const;

  /// Edges in node-index order; undirected edges listed once.
  std::vector<Edge> edges() const;
  std::size_t edge_count() const;

  // Separating sets recorded by discovery, keyed by ordered name pair.
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> sepsets;
  std::vector<std::string> notes;

  const std::vector<std::string>* sepset(const std::string& a, const std::string& b) const;

  bool same_structure(const Pdag& other) const;

 private:
  enum State : std::uint8_t { kNone = 0, kUndirected = 1, kOut = 2, kIn = 3 };
  State state(std::size_t a, std::size_t b) const { return cells_[a * nodes_.size() + b]; }
  void set(std::size_t a, std::size_t b, State s);

  std::vector<std::string> nodes_;
  std::vector<State> cells_;
};

struct PcOptions {
  double p_threshold = 0.01;
  int max_depth = 3;
  std::set<std::string> excluded;
  bool exclude_label = false;
};

/// Order-independent (stable) PC: each depth level tests against the
/// adjacency sets frozen at the start of that level; then v-structures and
/// Meek rules orient what the data supports.
Pdag pc_discover(const Dataset& data, const PcOptions& options = {});

/// Skeleton phase only (undirected graph + sepsets).
Pdag pc_skeleton(const Dataset& data, const PcOptions& options = {});

/// Orients unshielded colliders a -> c <- b where c is outside sepset(a, b).
/// Conflicting proposals leave the edge as it was and add a note.
void orient_v_structures(Pdag& g);

/// Meek rules 1-3 to closure. Never reverses a directed edge.
void apply_meek_rules(Pdag& g);

}  // namespace cdb
