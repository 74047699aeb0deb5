#include "causaldebias/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "causaldebias/errors.hpp"
#include "causaldebias/rng.hpp"

namespace cdb {

std::vector<std::size_t> synthetic_generation_order(const SyntheticSpec& spec) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!index.emplace(spec.nodes[i].name, i).second)
      throw SchemaError("duplicate synthetic node '" + spec.nodes[i].name + "'");
  }
  const std::size_t n = spec.nodes.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [parent, weight] : spec.nodes[i].parents) {
      auto it = index.find(parent);
      if (it == index.end())
        throw SchemaError("node '" + spec.nodes[i].name + "' has unknown parent '" + parent + "'");
      children[it->second].push_back(i);
      ++indegree[i];
    }
  }
  // Kahn's algorithm, lowest declaration index first.
  std::vector<std::size_t> order;
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && indegree[i] == 0) {
        next = i;
        break;
      }
    if (next == n) throw CycleError("synthetic spec has a dependency cycle");
    done[next] = true;
    order.push_back(next);
    for (std::size_t c : children[next]) --indegree[c];
  }
  return order;
}

namespace {

double round_to(double v, std::optional<int> digits) {
  if (!digits) return v;
  const double scale = std::pow(10.0, *digits);
  return std::round(v * scale) / scale;
}

std::vector<double> normalized_probs(const SyntheticNode& node) {
  const std::size_t levels = node.levels.size();
  std::vector<double> p = node.probs;
  if (p.empty()) p.assign(levels, 1.0);
  if (p.size() != levels)
    throw SchemaError("node '" + node.name + "': probs size does not match levels");
  for (std::size_t i = 0; i < levels; ++i) {
    auto it = node.sampling_bias.find(node.levels[i]);
    if (it != node.sampling_bias.end()) p[i] *= it->second;
  }
  for (const auto& [level, skew] : node.sampling_bias)
    if (std::find(node.levels.begin(), node.levels.end(), level) == node.levels.end())
      throw SchemaError("node '" + node.name + "': sampling bias for unknown level '" + level + "'");
  double total = 0.0;
  for (double v : p) {
    if (v < 0) throw SchemaError("node '" + node.name + "': negative probability");
    total += v;
  }
  if (!(total > 0)) throw SchemaError("node '" + node.name + "': probabilities sum to zero");
  for (double& v : p) v /= total;
  return p;
}

void validate_node(const SyntheticNode& node) {
  if (node.kind != ColumnKind::Numeric && node.levels.size() < 2)
    throw SchemaError("categorical node '" + node.name + "' needs at least 2 levels");
  if (node.exogenous() && node.kind == ColumnKind::Numeric && !node.uniform)
    throw SchemaError("exogenous numeric node '" + node.name + "' needs a uniform range");
  if (!node.exogenous() && node.kind != ColumnKind::Numeric &&
      node.cutpoints.size() + 1 != node.levels.size())
    throw SchemaError("endogenous categorical node '" + node.name +
                      "' needs levels-1 cutpoints");
  if (!std::is_sorted(node.cutpoints.begin(), node.cutpoints.end()))
    throw SchemaError("node '" + node.name + "': cutpoints must be ascending");
  if (node.noise_std < 0) throw SchemaError("node '" + node.name + "': negative noise_std");
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_rows == 0) throw ParameterError("synthetic spec needs n_rows > 0");
  const auto order = synthetic_generation_order(spec);
  const std::size_t n = spec.n_rows;
  const CounterRng rng(seed);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) index[spec.nodes[i].name] = i;
  std::vector<std::vector<double>> values(spec.nodes.size());

  for (std::size_t id : order) {
    const SyntheticNode& node = spec.nodes[id];
    validate_node(node);
    const std::uint64_t stream = CounterRng::stream_id(node.name);
    std::vector<double>& out = values[id];
    out.resize(n);

    if (node.exogenous()) {
      if (node.kind == ColumnKind::Numeric) {
        const auto [a, b] = *node.uniform;
        for (std::size_t r = 0; r < n; ++r)
          out[r] = round_to(a + (b - a) * rng.uniform(stream, r, 0), node.round_digits);
      } else {
        const auto p = normalized_probs(node);
        for (std::size_t r = 0; r < n; ++r) {
          const double u = rng.uniform(stream, r, 0);
          double acc = 0.0;
          std::size_t level = p.size() - 1;
          for (std::size_t l = 0; l < p.size(); ++l) {
            acc += p[l];
            if (u < acc) {
              level = l;
              break;
            }
          }
          out[r] = static_cast<double>(level);
        }
      }
      continue;
    }

    for (std::size_t r = 0; r < n; ++r) {
      double score = node.intercept;
      for (const auto& [parent, weight] : node.parents) {
        const std::size_t pid = index.at(parent);
        const double x = values[pid][r];
        if (const double* w = std::get_if<double>(&weight)) {
          score += *w * x;
        } else {
          const auto& table = std::get<std::map<std::string, double>>(weight);
          const SyntheticNode& pnode = spec.nodes[pid];
          if (pnode.kind == ColumnKind::Numeric)
            throw SchemaError("per-level weights given for numeric parent '" + parent + "'");
          auto it = table.find(pnode.levels[static_cast<std::size_t>(x)]);
          if (it != table.end()) score += it->second;
        }
      }
      if (node.noise_std > 0) score += rng.normal(stream, r, 1, 0.0, node.noise_std);
      if (node.kind == ColumnKind::Numeric) {
        out[r] = round_to(score, node.round_digits);
      } else {
        const auto level = std::count_if(node.cutpoints.begin(), node.cutpoints.end(),
                                         [score](double c) { return c < score; });
        out[r] = static_cast<double>(level);
      }
    }
  }

  std::vector<Column> columns;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const SyntheticNode& node = spec.nodes[i];
    if (node.latent) continue;
    if (node.kind == ColumnKind::Numeric) {
      columns.push_back(Column::numeric(node.name, std::move(values[i])));
    } else {
      ColumnSchema schema;
      schema.name = node.name;
      schema.kind = node.kind;
      schema.levels = node.levels;
      columns.emplace_back(std::move(schema), std::move(values[i]));
    }
  }
  return Dataset(std::move(columns), spec.label, spec.favorable, seed);
}

SyntheticSpec default_hiring_spec() {
  using Levels = std::map<std::string, double>;
  SyntheticSpec spec;
  spec.n_rows = 4000;
  spec.label = "job";
  spec.favorable = "Y";

  SyntheticNode gender;
  gender.name = "gender";
  gender.kind = ColumnKind::Nominal;
  gender.levels = {"Male", "Female"};
  gender.probs = {0.5, 0.5};
  gender.sampling_bias = {{"Male", 1.5}};

  SyntheticNode race;
  race.name = "race";
  race.kind = ColumnKind::Nominal;
  race.levels = {"White", "Non-white"};
  race.probs = {0.6, 0.4};

  SyntheticNode age;
  age.name = "age";
  age.uniform = {{22.0, 60.0}};
  age.round_digits = 0;

  SyntheticNode aptitude;
  aptitude.name = "aptitude";
  aptitude.uniform = {{0.0, 1.0}};
  aptitude.latent = true;

  SyntheticNode major;
  major.name = "major";
  major.kind = ColumnKind::Nominal;
  major.levels = {"Other", "CS"};
  major.parents = {{"gender", Levels{{"Female", -0.93}}}};
  major.intercept = -0.44;
  major.noise_std = 1.0;
  major.cutpoints = {0.0};

  SyntheticNode sat;
  sat.name = "sat_score";
  sat.parents = {{"aptitude", 500.0}};
  sat.intercept = 900.0;
  sat.noise_std = 80.0;
  sat.round_digits = 0;

  SyntheticNode rank;
  rank.name = "college_rank";
  rank.kind = ColumnKind::Nominal;
  rank.levels = {"Tier3", "Tier2", "Tier1"};
  rank.parents = {{"sat_score", 0.01}};
  rank.intercept = -11.5;
  rank.noise_std = 0.6;
  rank.cutpoints = {-0.8, 0.8};

  SyntheticNode gpa;
  gpa.name = "gpa";
  gpa.kind = ColumnKind::Nominal;
  gpa.levels = {"Low", "Medium", "High"};
  gpa.parents = {{"aptitude", 4.0}};
  gpa.intercept = -2.0;
  gpa.noise_std = 0.8;
  gpa.cutpoints = {-0.8, 0.8};

  SyntheticNode experience;
  experience.name = "work_experience";
  experience.parents = {{"age", 0.45}};
  experience.intercept = -9.0;
  experience.noise_std = 2.0;
  experience.round_digits = 1;

  SyntheticNode job;
  job.name = "job";
  job.kind = ColumnKind::Nominal;
  job.levels = {"N", "Y"};
  job.parents = {{"gender", Levels{{"Female", -0.29}}},
                 {"major", Levels{{"CS", 0.68}}},
                 {"college_rank", Levels{{"Tier2", 0.6}, {"Tier1", 1.2}}},
                 {"gpa", Levels{{"Medium", 0.6}, {"High", 1.2}}},
                 {"work_experience", 0.06}};
  job.intercept = -2.85;
  job.noise_std = 0.8;
  job.cutpoints = {0.0};

  spec.nodes = {gender, race, age, aptitude, major, sat, rank, gpa, experience, job};
  return spec;
}

}  // namespace cdb
