#include "causaldebias/summary.hpp"

#include <algorithm>
#include <cmath>

#include "causaldebias/errors.hpp"

namespace cdb {
namespace {

const Column& column_or_throw(const Dataset& data, const std::string& name) {
  if (!data.has_column(name)) throw SchemaError("unknown column '" + name + "'");
  return data.column(name);
}

Json moments(std::span<const double> v) {
  return {{"count", v.size()}, {"mean", mean_of(v)}, {"std", population_std(v)}};
}

Json histogram(const Column& col, const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  const double lo = edges.front();
  const double hi = edges.back();
  for (double x : col.values()) {
    std::size_t b = 0;
    if (hi > lo) {
      const double t = (x - lo) / (hi - lo) * static_cast<double>(bins);
      b = t <= 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(t));
    }
    ++counts[b];
  }
  Json j = moments(col.values());
  j["counts"] = counts;
  return j;
}

Json level_counts(const Column& col) {
  std::vector<std::size_t> counts(col.level_count(), 0);
  for (std::size_t i = 0; i < col.size(); ++i) ++counts[static_cast<std::size_t>(col.code(i))];
  return {{"count", col.size()}, {"counts", counts}};
}

Json grouped_counts(const Column& x, const Column& g) {
  std::vector<std::vector<std::size_t>> counts(x.level_count(),
                                               std::vector<std::size_t>(g.level_count(), 0));
  for (std::size_t i = 0; i < x.size(); ++i)
    ++counts[static_cast<std::size_t>(x.code(i))][static_cast<std::size_t>(g.code(i))];
  return {{"counts", counts}};
}

Json per_level_moments(const Column& cat, const Column& num) {
  std::vector<std::vector<double>> groups(cat.level_count());
  for (std::size_t i = 0; i < cat.size(); ++i)
    groups[static_cast<std::size_t>(cat.code(i))].push_back(num[i]);
  Json levels = Json::array();
  for (const auto& g : groups) {
    if (g.empty()) {
      levels.push_back({{"count", 0}, {"mean", nullptr}, {"std", nullptr}});
    } else {
      levels.push_back(moments(g));
    }
  }
  return {{"levels", levels}};
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Json scatter(const Column& x, const Column& y, std::size_t max_points) {
  const std::size_t n = x.size();
  const std::size_t take = std::min(n, max_points);
  Json points = Json::array();
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t i = k * n / take;
    points.push_back({x[i], y[i]});
  }
  return {{"points", points}, {"correlation", pearson(x.values(), y.values())}};
}

}  // namespace

Json node_distribution(const Dataset& original, const Dataset* debiased, const std::string& node,
                       std::size_t bins) {
  if (bins == 0) throw ParameterError("bins must be positive");
  const Column& ori = column_or_throw(original, node);
  const Column* deb = debiased ? &column_or_throw(*debiased, node) : nullptr;
  Json j;
  j["node"] = node;
  j["kind"] = to_string(ori.kind());
  if (ori.kind() == ColumnKind::Numeric) {
    auto [lo, hi] = std::minmax_element(ori.values().begin(), ori.values().end());
    std::vector<double> edges(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
      edges[b] = *lo + (*hi - *lo) * static_cast<double>(b) / static_cast<double>(bins);
    j["chart"] = "histogram";
    j["bin_edges"] = edges;
    j["original"] = histogram(ori, edges);
    j["debiased"] = deb ? histogram(*deb, edges) : Json(nullptr);
  } else {
    j["chart"] = "bar";
    j["levels"] = ori.schema().levels;
    j["original"] = level_counts(ori);
    j["debiased"] = deb ? level_counts(*deb) : Json(nullptr);
  }
  return j;
}

Json edge_distribution(const Dataset& original, const Dataset* debiased, const std::string& a,
                       const std::string& b, std::size_t max_points) {
  const Column& oa = column_or_throw(original, a);
  const Column& ob = column_or_throw(original, b);
  const Column* da = debiased ? &column_or_throw(*debiased, a) : nullptr;
  const Column* db = debiased ? &column_or_throw(*debiased, b) : nullptr;
  const bool ca = oa.schema().categorical();
  const bool cb = ob.schema().categorical();

  Json j;
  j["source"] = a;
  j["target"] = b;
  if (ca && cb) {
    j["chart"] = "grouped_bar";
    j["x_levels"] = oa.schema().levels;
    j["group_levels"] = ob.schema().levels;
    j["original"] = grouped_counts(oa, ob);
    j["debiased"] = da ? grouped_counts(*da, *db) : Json(nullptr);
  } else if (ca || cb) {
    const Column& cat_o = ca ? oa : ob;
    const Column& num_o = ca ? ob : oa;
    j["chart"] = "grouped_summary";
    j["categorical"] = cat_o.name();
    j["numeric"] = num_o.name();
    j["levels"] = cat_o.schema().levels;
    j["original"] = per_level_moments(cat_o, num_o);
    if (da) {
      const Column& cat_d = ca ? *da : *db;
      const Column& num_d = ca ? *db : *da;
      j["debiased"] = per_level_moments(cat_d, num_d);
    } else {
      j["debiased"] = nullptr;
    }
  } else {
    j["chart"] = "scatter";
    j["original"] = scatter(oa, ob, max_points);
    j["debiased"] = da ? scatter(*da, *db, max_points) : Json(nullptr);
  }
  return j;
}

}  // namespace cdb
