#include "causaldebias/debias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "causaldebias/errors.hpp"

namespace cdb {

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::PerTerm ? "per-term" : "per-row";
}

NoiseMode noise_mode_from_string(std::string_view text) {
  if (text == "per-term") return NoiseMode::PerTerm;
  if (text == "per-row") return NoiseMode::PerRow;
  throw ParameterError("unknown noise mode '" + std::string(text) + "'");
}

bool SimulationPlan::simulates(const std::string& node) const {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == node) return simulate[i];
  return false;
}

SimulationPlan make_simulation_plan(const Pdag& graph, const Dataset& data,
                                    std::span<const std::string> simulated) {
  SimulationPlan plan;
  const std::set<std::string> sim(simulated.begin(), simulated.end());
  std::set<std::string> seen;
  for (std::size_t v : graph.topological_order()) {
    const std::string& name = graph.nodes()[v];
    if (!data.has_column(name)) continue;
    plan.order.push_back(name);
    plan.simulate.push_back(sim.count(name) > 0);
    seen.insert(name);
  }
  for (const auto& name : data.column_names()) {
    if (seen.count(name)) continue;
    if (sim.count(name)) throw SimulationOrderError("node '" + name + "' is not in the graph");
    plan.order.push_back(name);
    plan.simulate.push_back(false);
  }
  return plan;
}

namespace {

constexpr std::uint64_t kNumericTerm = 0;

void require_parents(const std::vector<std::string>& parents, const std::string& node,
                     const std::set<std::string>* materialized) {
  if (!materialized) return;
  for (const auto& p : parents)
    if (!materialized->count(p))
      throw SimulationOrderError("parent '" + p + "' of '" + node + "' is not materialized yet");
}

// Per design column alpha for the fit's parents (column 0 is the intercept).
std::vector<double> column_alphas(const CausalModel& model, const DesignSpec& design,
                                  const std::string& node) {
  std::vector<double> a(1 + design.width(), 1.0);
  for (std::size_t t = 0; t < design.terms().size(); ++t) {
    const double alpha = model.alpha(design.terms()[t].parent, node);
    const std::size_t off = design.offset(t);
    for (std::size_t j = 0; j < design.terms()[t].width(); ++j) a[off + j] = alpha;
  }
  return a;
}

}  // namespace

std::vector<double> simulate_numeric_node(const CausalModel& model, const Dataset& partial,
                                          const std::string& node, const CounterRng& rng,
                                          const std::set<std::string>* materialized,
                                          NoiseMode noise) {
  const NodeFit* f = model.fit(node);
  if (!f || !std::holds_alternative<LinearFit>(*f))
    throw SimulationOrderError("node '" + node + "' has no linear fit to simulate from");
  const auto& fit = std::get<LinearFit>(*f);
  require_parents(fit.parents, node, materialized);

  const Eigen::MatrixXd x = fit.design.matrix(partial);
  const auto alpha = column_alphas(model, fit.design, node);
  std::vector<double> beta(alpha.size(), 0.0);
  beta[0] = fit.intercept;
  for (std::size_t t = 0; t < fit.betas.size(); ++t)
    for (std::size_t j = 0; j < fit.betas[t].size(); ++j) beta[fit.design.offset(t) + j] = fit.betas[t][j];

  const std::uint64_t stream = CounterRng::stream_id(node);
  std::vector<double> y(partial.rows(), fit.intercept);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t c = 1; c < beta.size(); ++c) {
      y[i] += alpha[c] * beta[c] * x(row, static_cast<Eigen::Index>(c));
      if (alpha[c] != 1.0) {
        const std::uint64_t term = noise == NoiseMode::PerTerm ? c : kNumericTerm;
        y[i] += (1.0 - alpha[c]) * beta[c] * rng.normal(stream, i, term);
      }
    }
  }
  return y;
}

Eigen::MatrixXd simulate_categorical_node(const CausalModel& model, const Dataset& original,
                                          const Dataset& partial, const std::string& node,
                                          const CounterRng& rng,
                                          const std::set<std::string>* materialized,
                                          NoiseMode noise) {
  const NodeFit* f = model.fit(node);
  if (!f || !std::holds_alternative<LogitFit>(*f))
    throw SimulationOrderError("node '" + node + "' has no logit fit to simulate from");
  const auto& fit = std::get<LogitFit>(*f);
  require_parents(fit.parents, node, materialized);

  const auto alpha = column_alphas(model, fit.design, node);
  const bool edited =
      std::any_of(alpha.begin(), alpha.end(), [](double a) { return a != 1.0; });
  const Eigen::MatrixXd x = fit.design.matrix(partial);
  const auto classes = static_cast<Eigen::Index>(fit.classes);
  const auto p = static_cast<Eigen::Index>(alpha.size());

  Eigen::MatrixXd w = fit.coef;
  for (Eigen::Index c = 0; c < p; ++c) w.col(c) *= alpha[static_cast<std::size_t>(c)];
  Eigen::MatrixXd scores = x * w.transpose();
  if (!edited) return softmax_rows(scores);

  // Moments of each class's linear predictor on the original data.
  const Eigen::MatrixXd lp = fit.linear_predictor(original);
  std::vector<double> mu(fit.classes), sd(fit.classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const Eigen::VectorXd col = lp.col(c);
    mu[c] = col.mean();
    sd[c] = std::sqrt((col.array() - mu[c]).square().mean());
  }

  const std::uint64_t stream = CounterRng::stream_id(node);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const auto row = static_cast<std::uint64_t>(i);
    for (Eigen::Index c = 1; c < classes; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      for (Eigen::Index j = 1; j < p; ++j) {
        const double a = alpha[static_cast<std::size_t>(j)];
        if (a == 1.0) continue;
        const std::uint64_t term =
            noise == NoiseMode::PerTerm ? static_cast<std::uint64_t>(c * p + j) : 0;
        const double z = rng.normal(stream, row, term);
        scores(i, c) += (1.0 - a) * fit.coef(c, j) * (mu[cu] + sd[cu] * z);
      }
    }
  }
  return softmax_rows(scores);
}

// ---------------------------------------------------------------- rescaling

std::vector<double> level_distribution(std::span<const int> codes, std::size_t levels) {
  std::vector<double> dist(levels, 0.0);
  for (int c : codes) dist.at(static_cast<std::size_t>(c)) += 1.0;
  const double n = static_cast<double>(codes.size());
  if (n > 0)
    for (double& d : dist) d /= n;
  return dist;
}

double relative_gap(std::span<const double> original, std::span<const double> debiased,
                    std::size_t n) {
  const double floor = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(n, 1)));
  double gap = 0.0;
  for (std::size_t c = 0; c < original.size(); ++c) {
    const double d = debiased[c] > 0.0 ? debiased[c] : floor;
    gap += std::abs((original[c] - d) / d);
  }
  return gap;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& prob) {
  std::vector<int> out(static_cast<std::size_t>(prob.rows()), 0);
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < prob.cols(); ++c)
      if (prob(i, c) > prob(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

RescaleResult rescale_categorical(const Eigen::MatrixXd& prob, const Column& original,
                                  double learning_rate, int max_iterations) {
  const std::size_t levels = original.level_count();
  if (static_cast<std::size_t>(prob.cols()) != levels)
    throw SchemaError("probability matrix has " + std::to_string(prob.cols()) +
                      " classes but '" + original.name() + "' has " + std::to_string(levels));
  if (static_cast<std::size_t>(prob.rows()) != original.size())
    throw SchemaError("probability matrix row count differs from '" + original.name() + "'");
  const std::size_t n = original.size();
  std::vector<int> ori_codes(n);
  for (std::size_t i = 0; i < n; ++i) ori_codes[i] = original.code(i);
  const auto m1 = level_distribution(ori_codes, levels);
  const double floor = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(n, 1)));

  RescaleResult out;
  out.prob = prob;
  out.labels = argmax_rows(out.prob);
  auto m2 = level_distribution(out.labels, levels);
  double gap = relative_gap(m1, m2, n);
  out.gaps.push_back(gap);

  int iterations = 0;
  while (gap > 0.0) {
    Eigen::MatrixXd candidate = out.prob;
    for (std::size_t c = 0; c < levels; ++c) {
      const double d = m2[c] > 0.0 ? m2[c] : floor;
      candidate.col(static_cast<Eigen::Index>(c)) *= 1.0 + learning_rate * (m1[c] - d) / d;
    }
    auto labels = argmax_rows(candidate);
    auto next = level_distribution(labels, levels);
    const double new_gap = relative_gap(m1, next, n);
    if (new_gap > gap) break;
    out.prob = std::move(candidate);
    out.labels = std::move(labels);
    m2 = std::move(next);
    gap = new_gap;
    out.gaps.push_back(gap);
    if (iterations > max_iterations) break;
    ++iterations;
  }
  out.iterations = static_cast<int>(out.gaps.size()) - 1;
  return out;
}

std::vector<double> rescale_numeric(std::span<const double> values, double target_mean,
                                    double target_std) {
  const double mu = mean_of(values);
  const double sd = population_std(values);
  if (!(sd > 0.0)) throw DegenerateColumnError("cannot rescale a constant column");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = target_mean + (values[i] - mu) / sd * target_std;
  // One correction pass removes the rounding left by the affine map.
  const double mu2 = mean_of(out);
  const double sd2 = population_std(out);
  if (sd2 > 0.0)
    for (double& v : out) v = target_mean + (v - mu2) * (target_std / sd2);
  return out;
}

std::vector<int> assign_by_rank(std::span<const double> scores, const Column& original) {
  const std::size_t n = original.size();
  if (scores.size() != n) throw SchemaError("score count differs from column length");
  std::vector<std::size_t> counts(original.level_count(), 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(original.code(i))];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<int> codes(n, 0);
  std::size_t pos = 0;
  for (std::size_t level = 0; level < counts.size(); ++level)
    for (std::size_t k = 0; k < counts[level]; ++k) codes[order[pos++]] = static_cast<int>(level);
  return codes;
}

// ---------------------------------------------------------------- pipeline

std::string edit_log_hash(const CausalModel& model) {
  std::string canon;
  for (const Edit& e : model.log()) {
    canon += to_string(e.op);
    canon += '|' + e.src + '|' + e.dst + '|' + std::to_string(e.weight_percent) + '|';
    canon += to_string(e.stage);
    canon += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(CounterRng::stream_id(canon)));
  return buf;
}

namespace {

Column simulated_column(const Column& original, const std::vector<int>& codes) {
  return Column::categorical(original.name(), original.kind(), original.schema().levels, codes);
}

}  // namespace

DebiasResult generate_debiased(const CausalModel& input, const Dataset& data, std::uint64_t seed,
                               const DebiasOptions& options) {
  DebiasResult result;
  result.seed = seed;
  result.noise = options.noise;
  result.edit_log_hash = edit_log_hash(input);

  if (input.stage() != Stage::Debias) {
    result.notes.push_back("model is in the refine stage; nothing to simulate");
    result.plan = make_simulation_plan(input.graph(), data, {});
    result.data = data;
    return result;
  }

  // Phase 1: retrain the heads of edges added while debiasing.
  CausalModel model = input;
  try {
    std::set<std::string> heads;
    for (const auto& e : model.added_in_debias()) heads.insert(e.second);
    model.refit(data, heads);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("retraining added-edge heads: ") + e.what());
  }

  // Phase 2: nodes to simulate.
  result.simulated = affected_nodes(model);
  result.plan = make_simulation_plan(model.graph(), data, result.simulated);
  if (result.simulated.empty()) {
    result.data = data;
    return result;
  }

  // Phase 3: simulate in topological order, copying everything else.
  const CounterRng rng(seed);
  Dataset work = data;
  std::set<std::string> materialized;
  for (std::size_t i = 0; i < result.plan.order.size(); ++i)
    if (!result.plan.simulate[i]) materialized.insert(result.plan.order[i]);

  std::map<std::string, std::vector<double>> numeric_raw;
  std::map<std::string, Eigen::MatrixXd> prob;
  for (std::size_t i = 0; i < result.plan.order.size(); ++i) {
    if (!result.plan.simulate[i]) continue;
    const std::string& node = result.plan.order[i];
    const Column& ori = data.column(node);
    try {
      if (ori.schema().regressed_as_numeric()) {
        auto y = simulate_numeric_node(model, work, node, rng, &materialized, options.noise);
        if (ori.kind() == ColumnKind::Ordinal) {
          work = work.with_column(simulated_column(ori, assign_by_rank(y, ori)));
        } else {
          work = work.with_column(Column::numeric(node, y));
        }
        numeric_raw[node] = std::move(y);
      } else {
        Eigen::MatrixXd p =
            simulate_categorical_node(model, data, work, node, rng, &materialized, options.noise);
        work = work.with_column(simulated_column(ori, argmax_rows(p)));
        prob[node] = std::move(p);
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "simulating '" + node + "': " + e.what());
    }
    materialized.insert(node);
  }

  // Phase 4: rescale simulated columns toward the original distributions.
  for (const auto& node : result.simulated) {
    const Column& ori = data.column(node);
    try {
      if (ori.kind() == ColumnKind::Numeric) {
        const auto& y = numeric_raw.at(node);
        work = work.with_column(
            Column::numeric(node, rescale_numeric(y, mean_of(ori.values()),
                                                  population_std(ori.values()))));
      } else if (ori.kind() == ColumnKind::Nominal) {
        RescaleResult r = rescale_categorical(prob.at(node), ori, options.learning_rate,
                                              options.max_iterations);
        work = work.with_column(simulated_column(ori, r.labels));
        result.rescale.emplace(node, std::move(r));
      }
      // Ordinal columns already carry the original level counts.
    } catch (const Error& e) {
      throw Error(e.kind(), "rescaling '" + node + "': " + e.what());
    }
  }
  result.data = std::move(work);
  return result;
}

}  // namespace cdb
