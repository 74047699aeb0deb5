#include "causaldebias/causal.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "causaldebias/errors.hpp"
#include "causaldebias/regress.hpp"

namespace cdb {

Pdag::Pdag(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
  std::set<std::string> seen(nodes_.begin(), nodes_.end());
  if (seen.size() != nodes_.size()) throw SchemaError("duplicate node names in graph");
  cells_.assign(nodes_.size() * nodes_.size(), kNone);
}

std::optional<std::size_t> Pdag::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i] == name) return i;
  return std::nullopt;
}

std::size_t Pdag::require(const std::string& name) const {
  auto idx = index_of(name);
  if (!idx) throw EditError("unknown node '" + name + "'");
  return *idx;
}

void Pdag::set(std::size_t a, std::size_t b, State s) {
  const std::size_t n = nodes_.size();
  cells_[a * n + b] = s;
  State mirror = s;
  if (s == kOut) mirror = kIn;
  else if (s == kIn) mirror = kOut;
  cells_[b * n + a] = mirror;
}

void Pdag::add_undirected(std::size_t a, std::size_t b) {
  if (a == b) throw EditError("self loops are not allowed");
  if (adjacent(a, b)) throw EditError("edge " + nodes_[a] + " -- " + nodes_[b] + " already exists");
  set(a, b, kUndirected);
}

void Pdag::add_directed(std::size_t a, std::size_t b) {
  if (a == b) throw EditError("self loops are not allowed");
  if (adjacent(a, b)) throw EditError("edge " + nodes_[a] + " -> " + nodes_[b] + " already exists");
  if (would_create_cycle(a, b))
    throw CycleError("edge " + nodes_[a] + " -> " + nodes_[b] + " would create a cycle");
  set(a, b, kOut);
}

void Pdag::orient(std::size_t a, std::size_t b) {
  if (!adjacent(a, b)) throw EditError("no edge between " + nodes_[a] + " and " + nodes_[b]);
  if (has_directed(a, b)) return;
  const State before = state(a, b);
  set(a, b, kNone);
  if (reaches(b, a)) {
    set(a, b, before);
    throw CycleError("orienting " + nodes_[a] + " -> " + nodes_[b] + " would create a cycle");
  }
  set(a, b, kOut);
}

void Pdag::remove(std::size_t a, std::size_t b) {
  if (!adjacent(a, b)) throw EditError("no edge between " + nodes_[a] + " and " + nodes_[b]);
  set(a, b, kNone);
}

std::vector<std::size_t> Pdag::parents(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    if (state(u, v) == kOut) out.push_back(u);
  return out;
}

std::vector<std::size_t> Pdag::children(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    if (state(v, u) == kOut) out.push_back(u);
  return out;
}

std::vector<std::size_t> Pdag::undirected_neighbors(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    if (state(v, u) == kUndirected) out.push_back(u);
  return out;
}

std::vector<std::size_t> Pdag::adjacents(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    if (state(v, u) != kNone) out.push_back(u);
  return out;
}

std::vector<std::string> Pdag::parent_names(const std::string& v) const {
  std::vector<std::string> out;
  for (std::size_t p : parents(require(v))) out.push_back(nodes_[p]);
  return out;
}

bool Pdag::reaches(std::size_t from, std::size_t to) const {
  if (from == to) return true;
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u = 0; u < nodes_.size(); ++u) {
      if (state(v, u) != kOut || seen[u]) continue;
      if (u == to) return true;
      seen[u] = true;
      stack.push_back(u);
    }
  }
  return false;
}

bool Pdag::acyclic() const {
  return topological_order().size() == nodes_.size();
}

std::set<std::size_t> Pdag::descendants(std::size_t v) const {
  std::set<std::size_t> out;
  std::vector<std::size_t> stack{v};
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    for (std::size_t c : children(x))
      if (out.insert(c).second) stack.push_back(c);
  }
  out.erase(v);
  return out;
}

std::vector<std::size_t> Pdag::topological_order() const {
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v) indegree[v] = parents(v).size();
  auto by_name = [this](std::size_t a, std::size_t b) { return nodes_[a] < nodes_[b]; };
  std::set<std::size_t, decltype(by_name)> ready(by_name);
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.insert(v);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t c : children(v))
      if (--indegree[c] == 0) ready.insert(c);
  }
  return order;
}

std::vector<Edge> Pdag::edges() const {
  std::vector<Edge> out;
  for (std::size_t a = 0; a < nodes_.size(); ++a)
    for (std::size_t b = 0; b < nodes_.size(); ++b) {
      const State s = state(a, b);
      if (s == kOut) out.push_back({nodes_[a], nodes_[b], true});
      else if (s == kUndirected && a < b) out.push_back({nodes_[a], nodes_[b], false});
    }
  return out;
}

std::size_t Pdag::edge_count() const { return edges().size(); }

const std::vector<std::string>* Pdag::sepset(const std::string& a, const std::string& b) const {
  auto it = sepsets.find(std::minmax(a, b));
  return it == sepsets.end() ? nullptr : &it->second;
}

bool Pdag::same_structure(const Pdag& other) const {
  auto mine = edges();
  auto theirs = other.edges();
  auto canon = [](std::vector<Edge>& es) {
    for (auto& e : es)
      if (!e.directed && e.dst < e.src) std::swap(e.src, e.dst);
    std::sort(es.begin(), es.end());
  };
  canon(mine);
  canon(theirs);
  auto n1 = nodes_, n2 = other.nodes_;
  std::sort(n1.begin(), n1.end());
  std::sort(n2.begin(), n2.end());
  return n1 == n2 && mine == theirs;
}

// ---------------------------------------------------------------- discovery

namespace {

// Calls `visit` on each size-k subset of `pool`, lexicographically, until
// it returns true.
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k,
                     const std::function<bool(const std::vector<std::size_t>&)>& visit) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[idx[i]];
    if (visit(subset)) return true;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

Pdag pc_skeleton(const Dataset& data, const PcOptions& options) {
  if (!(options.p_threshold > 0.0 && options.p_threshold < 1.0))
    throw ParameterError("p_threshold must lie in (0, 1)");
  if (data.rows() < 3) throw ParameterError("discovery needs at least 3 rows");
  if (options.max_depth < 0) throw ParameterError("max_depth must be non-negative");
  for (const auto& e : options.excluded)
    if (!data.has_column(e)) throw SchemaError("unknown excluded column '" + e + "'");

  std::vector<std::string> names;
  for (const auto& name : data.column_names()) {
    if (options.excluded.count(name)) continue;
    if (options.exclude_label && name == data.label()) continue;
    names.push_back(name);
  }
  Pdag g(names);
  const std::size_t n = g.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) g.add_undirected(a, b);

  // Work in name order so the result does not depend on column order.
  std::vector<std::size_t> by_name(n);
  std::iota(by_name.begin(), by_name.end(), 0);
  std::sort(by_name.begin(), by_name.end(),
            [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[by_name[i]] = i;

  FitCache cache;
  for (int depth = 0; depth <= options.max_depth; ++depth) {
    std::vector<std::vector<std::size_t>> frozen(n);
    bool any = false;
    for (std::size_t v = 0; v < n; ++v) {
      frozen[v] = g.adjacents(v);
      std::sort(frozen[v].begin(), frozen[v].end(),
                [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
      if (frozen[v].size() > static_cast<std::size_t>(depth)) any = true;
    }
    if (!any) break;

    struct Removal {
      std::size_t a, b;
      std::vector<std::string> sepset;
    };
    std::vector<Removal> removals;
    for (std::size_t ia = 0; ia < n; ++ia) {
      for (std::size_t ib = ia + 1; ib < n; ++ib) {
        const std::size_t a = by_name[ia], b = by_name[ib];
        if (!g.adjacent(a, b)) continue;
        std::optional<std::vector<std::string>> found;
        bool failed = false;
        for (std::size_t side = 0; side < 2 && !found && !failed; ++side) {
          const std::size_t from = side == 0 ? a : b;
          const std::size_t other = side == 0 ? b : a;
          std::vector<std::size_t> pool;
          for (std::size_t v : frozen[from])
            if (v != other) pool.push_back(v);
          for_each_subset(pool, static_cast<std::size_t>(depth), [&](const auto& subset) {
            std::vector<std::string> given;
            for (std::size_t v : subset) given.push_back(names[v]);
            try {
              const CiResult r = ci_test(data, names[a], names[b], given, options.p_threshold, &cache);
              if (!r.warning.empty()) g.notes.push_back(r.warning);
              if (r.independent) {
                found = given;
                return true;
              }
            } catch (const std::exception& e) {
              g.notes.push_back("ci test " + names[a] + " vs " + names[b] +
                                " failed, edge kept: " + e.what());
              failed = true;
              return true;
            }
            return false;
          });
        }
        if (found) removals.push_back({a, b, *found});
      }
    }
    for (auto& r : removals) {
      g.remove(r.a, r.b);
      g.sepsets[std::minmax(names[r.a], names[r.b])] = std::move(r.sepset);
    }
  }
  return g;
}

void orient_v_structures(Pdag& g) {
  const std::size_t n = g.size();
  const auto& names = g.nodes();
  std::set<std::pair<std::size_t, std::size_t>> proposals;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (g.adjacent(a, b)) continue;
      const auto* sep = g.sepset(names[a], names[b]);
      if (!sep) continue;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == a || c == b || !g.adjacent(a, c) || !g.adjacent(b, c)) continue;
        if (std::find(sep->begin(), sep->end(), names[c]) != sep->end()) continue;
        proposals.insert({a, c});
        proposals.insert({b, c});
      }
    }
  }
  for (const auto& [from, to] : proposals) {
    if (proposals.count({to, from})) {
      if (from < to)
        g.notes.push_back("conflicting collider orientations for " + names[from] + " -- " +
                          names[to] + "; left unchanged");
      continue;
    }
    if (g.has_directed(from, to)) continue;
    if (g.has_directed(to, from)) {
      g.notes.push_back("collider wants " + names[from] + " -> " + names[to] +
                        " but edge is already directed the other way");
      continue;
    }
    if (g.would_create_cycle(from, to)) {
      g.notes.push_back("collider " + names[from] + " -> " + names[to] + " skipped (cycle)");
      continue;
    }
    g.orient(from, to);
  }
}

void apply_meek_rules(Pdag& g) {
  const std::size_t n = g.size();
  auto try_orient = [&](std::size_t from, std::size_t to) {
    if (g.would_create_cycle(from, to)) {
      g.notes.push_back("orientation rule for " + g.nodes()[from] + " -> " + g.nodes()[to] +
                        " skipped (cycle)");
      return false;
    }
    g.orient(from, to);
    return true;
  };
  std::set<std::pair<std::size_t, std::size_t>> blocked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        if (u == v || !g.has_undirected(u, v) || blocked.count({u, v})) continue;
        bool rule = false;
        // R1: w -> u -- v, w and v nonadjacent.
        for (std::size_t w : g.parents(u))
          if (w != v && !g.adjacent(w, v)) rule = true;
        // R2: u -> w -> v with u -- v.
        if (!rule)
          for (std::size_t w : g.children(u))
            if (g.has_directed(w, v)) rule = true;
        // R3: u -- c -> v, u -- d -> v, c and d nonadjacent.
        if (!rule) {
          std::vector<std::size_t> mids;
          for (std::size_t c : g.undirected_neighbors(u))
            if (c != v && g.has_directed(c, v)) mids.push_back(c);
          for (std::size_t i = 0; i < mids.size() && !rule; ++i)
            for (std::size_t j = i + 1; j < mids.size(); ++j)
              if (!g.adjacent(mids[i], mids[j])) {
                rule = true;
                break;
              }
        }
        if (!rule) continue;
        if (try_orient(u, v)) changed = true;
        else blocked.insert({u, v});
      }
    }
  }
}

Pdag pc_discover(const Dataset& data, const PcOptions& options) {
  Pdag g = pc_skeleton(data, options);
  orient_v_structures(g);
  apply_meek_rules(g);
  return g;
}

}  // namespace cdb
