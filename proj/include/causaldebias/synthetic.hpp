#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "causaldebias/data.hpp"

namespace cdb {

/// Contribution of one parent to a linear score. Numeric parents (and
/// categorical parents given a plain number) multiply the value or level
/// code; categorical parents may instead map each level to an additive term.
using ParentWeight = std::variant<double, std::map<std::string, double>>;

struct SyntheticNode {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;  // categorical
  bool latent = false;              // generated, not emitted

  // Exogenous nodes (no parents).
  std::optional<std::pair<double, double>> uniform;  // numeric: U(a, b)
  std::vector<double> probs;                          // categorical level probabilities
  std::map<std::string, double> sampling_bias;        // per-level multiplicative skew

  // Endogenous nodes.
  std::vector<std::pair<std::string, ParentWeight>> parents;
  double intercept = 0.0;
  double noise_std = 0.0;
  std::vector<double> cutpoints;  // categorical: level = #cutpoints below score
  std::optional<int> round_digits;

  bool exogenous() const { return parents.empty(); }
};

struct SyntheticSpec {
  std::size_t n_rows = 4000;
  std::string label;
  std::optional<std::string> favorable;
  std::vector<SyntheticNode> nodes;
};

/// Samples a dataset from `spec`. Pure function of (spec, seed).
/// Throws CycleError on cyclic parent relations.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Hiring scenario: 9 observable columns (3 numeric, 6 categorical) plus a
/// latent aptitude driving SAT score and GPA.
SyntheticSpec default_hiring_spec();

/// Nodes of `spec` in a dependency-respecting order.
std::vector<std::size_t> synthetic_generation_order(const SyntheticSpec& spec);

}  // namespace cdb
