#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "causaldebias/data.hpp"
#include "causaldebias/model.hpp"
#include "causaldebias/rng.hpp"

namespace cdb {

/// How the noise term r of the simulation equation is drawn.
/// PerTerm: an independent draw for every edited parent design column.
/// PerRow: one standard draw per row, shared by all edited terms of a node.
enum class NoiseMode { PerTerm, PerRow };

std::string_view to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(std::string_view text);

struct DebiasOptions {
  NoiseMode noise = NoiseMode::PerTerm;
  double learning_rate = 0.1;
  int max_iterations = 50;
};

struct SimulationPlan {
  std::vector<std::string> order;  // every dataset column, parents first
  std::vector<bool> simulate;      // parallel to `order`

  bool simulates(const std::string& node) const;
};

/// Topological order of the directed graph, then columns outside the graph.
SimulationPlan make_simulation_plan(const Pdag& graph, const Dataset& data,
                                    std::span<const std::string> simulated);

/// Simulates a numeric or ordinal node from its (possibly already simulated)
/// parents. Works in the fit's standardized units:
///   y = b0 + sum_j a_j b_j x_j + sum_j (1 - a_j) b_j z_j,  z_j ~ N(0, 1),
/// which is r ~ N(mu_y, sigma_y^2) of the original column re-expressed on the
/// scale the coefficients were estimated on. Returns raw target units.
/// Throws SimulationOrderError when a parent is not in `materialized`.
std::vector<double> simulate_numeric_node(const CausalModel& model, const Dataset& partial,
                                          const std::string& node, const CounterRng& rng,
                                          const std::set<std::string>* materialized = nullptr,
                                          NoiseMode noise = NoiseMode::PerTerm);

/// Per-class scores with alpha-scaled coefficients plus (1 - a_j) coef_cj r_c,
/// r_c ~ N(mu_c, sigma_c) of class c's linear predictor on `original`; softmax.
Eigen::MatrixXd simulate_categorical_node(const CausalModel& model, const Dataset& original,
                                          const Dataset& partial, const std::string& node,
                                          const CounterRng& rng,
                                          const std::set<std::string>* materialized = nullptr,
                                          NoiseMode noise = NoiseMode::PerTerm);

struct RescaleResult {
  std::vector<int> labels;
  int iterations = 0;              // accepted scaling steps
  std::vector<double> gaps;        // gap of every accepted state, first = initial
  Eigen::MatrixXd prob;            // final accepted matrix
};

/// Level shares of `codes` over `levels` classes.
std::vector<double> level_distribution(std::span<const int> codes, std::size_t levels);
/// Sum over classes of |ori - deb| / deb; an absent class uses deb = 1/(2n).
double relative_gap(std::span<const double> original, std::span<const double> debiased,
                    std::size_t n);
/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& prob);

/// Iterative multiplicative rescaling of a probability matrix toward the
/// original level distribution. Each step scales class c by
/// 1 + lr (ori_c - deb_c) / deb_c. A step that increases the gap is rejected
/// and the loop stops; it also stops when the gap reaches 0 or after
/// `max_iterations` + 1 accepted steps.
RescaleResult rescale_categorical(const Eigen::MatrixXd& prob, const Column& original,
                                  double learning_rate = 0.1, int max_iterations = 50);

/// Affine map onto the target mean and population standard deviation.
std::vector<double> rescale_numeric(std::span<const double> values, double target_mean,
                                    double target_std);

/// Assigns ordinal codes by rank so the level counts equal `original`'s.
/// Ties keep row order.
std::vector<int> assign_by_rank(std::span<const double> scores, const Column& original);

struct DebiasResult {
  Dataset data;
  SimulationPlan plan;
  std::vector<std::string> simulated;
  std::map<std::string, RescaleResult> rescale;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  std::string edit_log_hash;
  NoiseMode noise = NoiseMode::PerTerm;
};

/// Stable hex digest of the model's edit log.
std::string edit_log_hash(const CausalModel& model);

/// Generates the debiased dataset: refit heads of edges added while
/// debiasing, collect the affected nodes, simulate them in topological order
/// (copying the rest verbatim), then rescale each simulated column. A model
/// with no debias edits yields an exact copy of `data`.
DebiasResult generate_debiased(const CausalModel& model, const Dataset& data, std::uint64_t seed,
                               const DebiasOptions& options = {});

}  // namespace cdb
