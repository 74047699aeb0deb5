#include "causaldebias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "causaldebias/errors.hpp"
#include "causaldebias/rng.hpp"

namespace cdb {

std::size_t GroupMasks::size_a() const { return static_cast<std::size_t>(std::count(a.begin(), a.end(), true)); }
std::size_t GroupMasks::size_b() const { return static_cast<std::size_t>(std::count(b.begin(), b.end(), true)); }

GroupSpec GroupSpec::simple(std::string column, std::string privileged) {
  GroupSpec g;
  g.simple_ = true;
  g.column_ = std::move(column);
  g.privileged_ = std::move(privileged);
  return g;
}

GroupSpec GroupSpec::custom(GroupDef a, GroupDef b) {
  GroupSpec g;
  g.simple_ = false;
  g.a_ = std::move(a);
  g.b_ = std::move(b);
  return g;
}

GroupSpec GroupSpec::swapped() const {
  GroupSpec g = *this;
  g.swapped_ = !swapped_;
  return g;
}

std::vector<std::string> GroupSpec::sensitive_columns() const {
  std::set<std::string> cols;
  if (simple_) {
    cols.insert(column_);
  } else {
    for (const auto* def : {&a_, &b_})
      for (const auto& s : def->all_of) cols.insert(s.column);
  }
  return {cols.begin(), cols.end()};
}

namespace {

std::vector<bool> select_rows(const Dataset& data, const GroupDef& def) {
  std::vector<bool> mask(data.rows(), true);
  for (const Selection& s : def.all_of) {
    const Column& col = data.column(s.column);
    if (col.schema().categorical()) {
      std::vector<bool> allowed(col.level_count(), false);
      for (const auto& level : s.levels) {
        const auto code = col.schema().level_code(level);
        if (!code) throw SchemaError("column '" + s.column + "' has no level '" + level + "'");
        allowed[static_cast<std::size_t>(*code)] = true;
      }
      for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = mask[i] && allowed[static_cast<std::size_t>(col.code(i))];
    } else {
      if (!s.levels.empty())
        throw SchemaError("numeric column '" + s.column + "' takes a [min, max) bin, not levels");
      for (std::size_t i = 0; i < mask.size(); ++i) {
        const double v = col[i];
        const bool in = (!s.min || v >= *s.min) && (!s.max || v < *s.max);
        mask[i] = mask[i] && in;
      }
    }
  }
  return mask;
}

}  // namespace

GroupMasks GroupSpec::masks(const Dataset& data) const {
  GroupMasks m = ordered_masks(data);
  if (swapped_) std::swap(m.a, m.b);
  return m;
}

GroupMasks GroupSpec::ordered_masks(const Dataset& data) const {
  GroupMasks m;
  if (simple_) {
    const Column& col = data.column(column_);
    if (!col.schema().categorical() || col.level_count() != 2)
      throw SchemaError("group column '" + column_ + "' must be categorical with exactly 2 levels");
    const auto code = col.schema().level_code(privileged_);
    if (!code) throw SchemaError("column '" + column_ + "' has no level '" + privileged_ + "'");
    m.a.resize(data.rows());
    m.b.resize(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
      m.a[i] = col.code(i) == *code;
      m.b[i] = !m.a[i];
    }
    return m;
  }
  if (a_.all_of.empty() || b_.all_of.empty())
    throw SchemaError("custom groups need at least one selection each");
  m.a = select_rows(data, a_);
  m.b = select_rows(data, b_);
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) overlap += m.a[i] && m.b[i];
  if (overlap)
    m.warnings.push_back("groups overlap in " + std::to_string(overlap) + " rows");
  return m;
}

// ---------------------------------------------------------------- dataset metrics

double Fourfold::a_rate() const {
  const auto n = a_pos + a_neg;
  return n ? static_cast<double>(a_pos) / static_cast<double>(n) : 0.0;
}

double Fourfold::b_rate() const {
  const auto n = b_pos + b_neg;
  return n ? static_cast<double>(b_pos) / static_cast<double>(n) : 0.0;
}

Fourfold fourfold(const Dataset& data, const GroupMasks& masks) {
  if (masks.a.size() != data.rows() || masks.b.size() != data.rows())
    throw SchemaError("group masks do not match the dataset");
  const Column& label = data.label_column();
  const int fav = data.favorable_code();
  Fourfold f;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const bool pos = label.code(i) == fav;
    if (masks.a[i]) (pos ? f.a_pos : f.a_neg) += 1;
    if (masks.b[i]) (pos ? f.b_pos : f.b_neg) += 1;
  }
  return f;
}

Fourfold fourfold(const Dataset& data, const GroupSpec& groups) {
  return fourfold(data, groups.masks(data));
}

double statistical_parity_diff(const Dataset& data, const GroupMasks& masks) {
  const Fourfold f = fourfold(data, masks);
  if (f.a_pos + f.a_neg == 0 || f.b_pos + f.b_neg == 0)
    throw EmptyGroupError("both groups must contain at least one row");
  return std::abs(f.a_rate() - f.b_rate()) * 100.0;
}

double statistical_parity_diff(const Dataset& data, const GroupSpec& groups) {
  return statistical_parity_diff(data, groups.masks(data));
}

namespace {

double numeric_range(const Column& col) {
  if (col.size() == 0) return 0.0;
  const auto [lo, hi] = std::minmax_element(col.values().begin(), col.values().end());
  return *hi - *lo;
}

double gower_term(const Column& cx, std::size_t i, const Column& cy, std::size_t j, double range) {
  if (cx.schema().categorical()) return cx.code(i) == cy.code(j) ? 0.0 : 1.0;
  const double d = std::abs(cx[i] - cy[j]);
  if (range <= 0.0) return d == 0.0 ? 0.0 : 1.0;
  return std::min(1.0, d / range);
}

}  // namespace

double gower_row_distance(const Dataset& x, std::size_t i, const Dataset& y, std::size_t j,
                          std::span<const std::size_t> columns, std::span<const double> ranges) {
  if (columns.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t c = 0; c < columns.size(); ++c)
    s += gower_term(x.column(columns[c]), i, y.column(columns[c]), j, ranges[c]);
  return s / static_cast<double>(columns.size());
}

double individual_bias(const Dataset& data, std::size_t k) {
  const std::size_t n = data.rows();
  if (k == 0) throw ParameterError("k must be positive");
  if (n <= k)
    throw ParameterError("individual bias needs more than k=" + std::to_string(k) + " rows");
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < data.cols(); ++c)
    if (data.column(c).name() != data.label()) cols.push_back(c);
  const std::size_t d = cols.size();

  // Column-major copies: categorical codes or range-normalized numbers.
  std::vector<std::vector<double>> feat(d);
  std::vector<bool> categorical(d);
  std::vector<double> ranges(d);
  for (std::size_t c = 0; c < d; ++c) {
    const Column& col = data.column(cols[c]);
    categorical[c] = col.schema().categorical();
    ranges[c] = categorical[c] ? 0.0 : numeric_range(col);
    feat[c].assign(col.values().begin(), col.values().end());
  }
  const Column& label = data.label_column();

  double total = 0.0;
  std::vector<double> dist(n);
  std::vector<std::size_t> idx;
  idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      const auto& f = feat[c];
      const double xi = f[i];
      if (categorical[c]) {
        for (std::size_t j = 0; j < n; ++j) dist[j] += f[j] == xi ? 0.0 : 1.0;
      } else if (ranges[c] <= 0.0) {
        for (std::size_t j = 0; j < n; ++j) dist[j] += f[j] == xi ? 0.0 : 1.0;
      } else {
        const double r = ranges[c];
        for (std::size_t j = 0; j < n; ++j) dist[j] += std::min(1.0, std::abs(xi - f[j]) / r);
      }
    }
    if (d > 0)
      for (double& v : dist) v /= static_cast<double>(d);
    idx.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) idx.push_back(j);
    auto closer = [&](std::size_t a, std::size_t b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), closer);
    std::size_t differing = 0;
    for (std::size_t t = 0; t < k; ++t) differing += label.code(idx[t]) != label.code(i);
    total += static_cast<double>(differing) / static_cast<double>(k);
  }
  return total / static_cast<double>(n) * 100.0;
}

double gower_distortion(const Dataset& original, const Dataset& debiased) {
  if (original.rows() != debiased.rows() || original.cols() != debiased.cols())
    throw SchemaError("distortion needs datasets of the same shape");
  for (std::size_t c = 0; c < original.cols(); ++c) {
    const auto& a = original.column(c).schema();
    const auto& b = debiased.column(c).schema();
    if (a.name != b.name || a.kind != b.kind || a.levels != b.levels)
      throw SchemaError("column '" + a.name + "' differs in schema between datasets");
  }
  if (original.rows() == 0 || original.cols() == 0) return 0.0;
  std::vector<std::size_t> cols(original.cols());
  std::iota(cols.begin(), cols.end(), 0);
  std::vector<double> ranges(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    ranges[c] = original.column(c).schema().categorical() ? 0.0 : numeric_range(original.column(c));
  double total = 0.0;
  for (std::size_t i = 0; i < original.rows(); ++i)
    total += gower_row_distance(original, i, debiased, i, cols, ranges);
  return total / static_cast<double>(original.rows());
}

// ---------------------------------------------------------------- classifier metrics

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::size_t n,
                                                                           std::uint64_t seed,
                                                                           int fold) {
  const CounterRng rng(seed);
  const std::uint64_t stream = CounterRng::stream_id("holdout");
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i)
    keys[i] = {rng.bits(stream, i, static_cast<std::uint64_t>(fold)), i};
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < n; ++i) (i < n / 2 ? train : test).push_back(keys[i].second);
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

namespace {

struct Rates {
  double accuracy = 0.0;
  double fnr = 0.0;
  double fpr = 0.0;
  bool has_pos = false;
  bool has_neg = false;
};

Rates group_rates(std::span<const std::size_t> test, std::span<const int> pred,
                  std::span<const int> truth, const std::vector<bool>& mask) {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < test.size(); ++t) {
    if (!mask[test[t]]) continue;
    const bool p = pred[t] == 1;
    const bool y = truth[t] == 1;
    if (p && y) ++tp;
    else if (!p && !y) ++tn;
    else if (p) ++fp;
    else ++fn;
  }
  Rates r;
  const std::size_t n = tp + tn + fp + fn;
  r.accuracy = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  r.has_pos = tp + fn > 0;
  r.has_neg = fp + tn > 0;
  r.fnr = r.has_pos ? static_cast<double>(fn) / static_cast<double>(tp + fn) : 0.0;
  r.fpr = r.has_neg ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
  return r;
}

}  // namespace

ClassifierMetrics classifier_fairness(const Dataset& source, const Dataset& truth,
                                      const GroupMasks& masks,
                                      std::span<const std::string> drop,
                                      std::string_view classifier, std::uint64_t seed) {
  if (source.rows() != truth.rows()) throw SchemaError("source and truth row counts differ");
  if (masks.a.size() != source.rows() || masks.b.size() != source.rows())
    throw SchemaError("group masks do not match the dataset");
  std::vector<std::string> features;
  for (const auto& name : source.column_names()) {
    if (name == source.label()) continue;
    if (std::find(drop.begin(), drop.end(), name) != drop.end()) continue;
    features.push_back(name);
  }

  const Column& truth_label = truth.label_column();
  const int truth_fav = truth.favorable_code();

  ClassifierMetrics out;
  constexpr int kFolds = 3;
  for (int fold = 0; fold < kFolds; ++fold) {
    const auto [train, test] = holdout_split(source.rows(), seed, fold);
    std::size_t na = 0, nb = 0;
    for (std::size_t r : test) {
      na += masks.a[r];
      nb += masks.b[r];
    }
    if (na == 0 || nb == 0) {
      out.warnings.push_back("holdout " + std::to_string(fold) + " skipped: a group has no test rows");
      continue;
    }
    auto model = make_classifier(classifier);
    model->fit(source, train, features);
    const auto pred = model->predict(source, test);
    std::vector<int> y(test.size());
    for (std::size_t t = 0; t < test.size(); ++t) y[t] = truth_label.code(test[t]) == truth_fav;

    const Rates ra = group_rates(test, pred, y, masks.a);
    const Rates rb = group_rates(test, pred, y, masks.b);
    if (!ra.has_pos || !rb.has_pos || !ra.has_neg || !rb.has_neg)
      out.warnings.push_back("holdout " + std::to_string(fold) +
                             ": a group lacks positive or negative rows; its FNR/FPR count as 0");
    out.accuracy_diff += std::abs(ra.accuracy - rb.accuracy) * 100.0;
    out.fnr_diff += std::abs(ra.fnr - rb.fnr) * 100.0;
    out.fpr_diff += std::abs(ra.fpr - rb.fpr) * 100.0;

    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t t = 0; t < test.size(); ++t) {
      correct += pred[t] == y[t];
      tp += pred[t] == 1 && y[t] == 1;
      fp += pred[t] == 1 && y[t] == 0;
      fn += pred[t] == 0 && y[t] == 1;
    }
    out.accuracy += static_cast<double>(correct) / static_cast<double>(test.size());
    const double denom = static_cast<double>(2 * tp + fp + fn);
    out.f1 += denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    ++out.folds;
  }
  if (out.folds == 0) throw EmptyGroupError("every holdout had an empty group");
  const double f = out.folds;
  out.accuracy_diff /= f;
  out.fnr_diff /= f;
  out.fpr_diff /= f;
  out.accuracy /= f;
  out.f1 /= f;
  return out;
}

// ---------------------------------------------------------------- evaluate

namespace {

MetricsReport report_for(const Dataset& data, const Dataset& original, const GroupSpec& groups,
                         const EvaluateOptions& options, std::vector<std::string>& warnings,
                         const char* which) {
  MetricsReport r;
  const GroupMasks masks = groups.masks(data);
  for (const auto& w : masks.warnings) warnings.push_back(std::string(which) + ": " + w);
  try {
    r.fourfold = fourfold(data, masks);
    r.parity_diff = statistical_parity_diff(data, masks);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(which) + " parity: " + e.what());
  }
  try {
    r.individual_bias = individual_bias(data, options.k);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(which) + " individual bias: " + e.what());
  }
  const auto drop = groups.sensitive_columns();
  try {
    const ClassifierMetrics c =
        classifier_fairness(data, original, masks, drop, options.classifier, options.seed);
    for (const auto& w : c.warnings) warnings.push_back(std::string(which) + ": " + w);
    r.accuracy_diff = c.accuracy_diff;
    r.fnr_diff = c.fnr_diff;
    r.fpr_diff = c.fpr_diff;
    r.accuracy = c.accuracy;
    r.f1 = c.f1;
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(which) + " classifier metrics: " + e.what());
  }
  return r;
}

}  // namespace

Evaluation evaluate(const Dataset& original, const Dataset& debiased, const GroupSpec& groups,
                    const EvaluateOptions& options) {
  Evaluation ev;
  ev.original = report_for(original, original, groups, options, ev.warnings, "original");
  ev.debiased = report_for(debiased, original, groups, options, ev.warnings, "debiased");
  try {
    ev.debiased.distortion = gower_distortion(original, debiased);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("distortion: ") + e.what());
  }
  return ev;
}

}  // namespace cdb
