#include "causaldebias/regress.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>
#include <set>

#include "causaldebias/errors.hpp"

namespace cdb {

// ---------------------------------------------------------------- design

DesignSpec DesignSpec::from_data(const Dataset& data, std::span<const std::string> parents,
                                 std::span<const std::size_t> rows) {
  DesignSpec spec;
  for (const auto& name : parents) {
    const Column& col = data.column(name);
    DesignTerm term;
    term.parent = name;
    term.kind = col.kind();
    if (col.kind() == ColumnKind::Nominal) {
      term.levels = col.level_count();
    } else {
      double sum = 0.0, sq = 0.0;
      const std::size_t n = rows.empty() ? col.size() : rows.size();
      for (std::size_t i = 0; i < n; ++i) sum += col[rows.empty() ? i : rows[i]];
      term.center = n ? sum / static_cast<double>(n) : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = col[rows.empty() ? i : rows[i]] - term.center;
        sq += d * d;
      }
      const double sd = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
      term.scale = sd > 0.0 ? sd : 1.0;
    }
    spec.terms_.push_back(std::move(term));
  }
  return spec;
}

std::size_t DesignSpec::width() const {
  std::size_t w = 0;
  for (const auto& t : terms_) w += t.width();
  return w;
}

std::size_t DesignSpec::offset(std::size_t t) const {
  std::size_t off = 1;
  for (std::size_t i = 0; i < t; ++i) off += terms_[i].width();
  return off;
}

Eigen::MatrixXd DesignSpec::matrix(const Dataset& data, std::span<const std::size_t> rows) const {
  const std::size_t n = rows.empty() ? data.rows() : rows.size();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(1 + width()));
  x.col(0).setOnes();
  std::size_t off = 1;
  for (const auto& term : terms_) {
    const Column& col = data.column(term.parent);
    if (term.kind == ColumnKind::Nominal && col.level_count() != term.levels)
      throw SchemaError("parent '" + term.parent + "' level count changed since fitting");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = rows.empty() ? i : rows[i];
      const auto row = static_cast<Eigen::Index>(i);
      if (term.kind == ColumnKind::Nominal) {
        const int code = col.code(r);
        if (code > 0) x(row, static_cast<Eigen::Index>(off + code - 1)) = 1.0;
      } else {
        x(row, static_cast<Eigen::Index>(off)) = (col[r] - term.center) / term.scale;
      }
    }
    off += term.width();
  }
  return x;
}

// ---------------------------------------------------------------- solvers

LeastSquares solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  LeastSquares out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() == x.cols()) {
    out.coef = qr.solve(y);
  } else {
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::MatrixXd a =
        xtx + kLinearRidge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    out.coef = a.ldlt().solve(x.transpose() * y);
    out.ridge_fallback = true;
  }
  out.rss = (y - x * out.coef).squaredNorm();
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      p(i, c) = std::exp(scores(i, c) - m);
      total += p(i, c);
    }
    p.row(i) /= total;
  }
  return p;
}

namespace {

struct LogitState {
  double penalized = 0.0;
  double log_likelihood = 0.0;
};

// Scores for all classes given the free (classes-1) x p parameter block.
Eigen::MatrixXd class_scores(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  Eigen::MatrixXd s(x.rows(), w.rows() + 1);
  s.col(0).setZero();
  s.rightCols(w.rows()) = x * w.transpose();
  return s;
}

LogitState evaluate(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& w,
                    double ridge) {
  const Eigen::MatrixXd s = class_scores(x, w);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    const double lse = m + std::log((s.row(i).array() - m).exp().sum());
    ll += s(i, y[static_cast<std::size_t>(i)]) - lse;
  }
  return {ll - 0.5 * ridge * w.squaredNorm(), ll};
}

}  // namespace

MultinomialSolution solve_multinomial(const Eigen::MatrixXd& x, std::span<const int> y,
                                      std::size_t classes, const LogitOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto free = static_cast<Eigen::Index>(classes) - 1;
  MultinomialSolution out;
  out.coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), p);
  if (free <= 0) {
    out.converged = true;
    return out;
  }
  const Eigen::Index dim = free * p;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(free, p);
  LogitState state = evaluate(x, y, w, options.ridge);

  for (int iter = 0;; ++iter) {
    const Eigen::MatrixXd prob = softmax_rows(class_scores(x, w));
    // Gradient of the penalized log-likelihood, laid out class-major.
    Eigen::VectorXd grad(dim);
    for (Eigen::Index a = 0; a < free; ++a) {
      Eigen::VectorXd resid = -prob.col(a + 1);
      for (Eigen::Index i = 0; i < n; ++i)
        if (y[static_cast<std::size_t>(i)] == a + 1) resid(i) += 1.0;
      grad.segment(a * p, p) = x.transpose() * resid - options.ridge * w.row(a).transpose();
    }
    const double gnorm = grad.cwiseAbs().maxCoeff() / static_cast<double>(std::max<Eigen::Index>(n, 1));
    out.iterations = iter;
    if (gnorm < options.tol) {
      out.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;

    // Negative Hessian: sum_i (diag(p) - p p^T) (x) x_i x_i^T + ridge I.
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index a = 0; a < free; ++a) {
      for (Eigen::Index b = a; b < free; ++b) {
        Eigen::VectorXd weight = -prob.col(a + 1).cwiseProduct(prob.col(b + 1));
        if (a == b) weight += prob.col(a + 1);
        const Eigen::MatrixXd block =
            x.transpose() * (x.array().colwise() * weight.array()).matrix();
        info.block(a * p, b * p, p, p) = block;
        if (a != b) info.block(b * p, a * p, p, p) = block.transpose();
      }
    }
    info.diagonal().array() += options.ridge;
    const Eigen::VectorXd step = info.ldlt().solve(grad);

    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 60; ++half) {
      Eigen::MatrixXd trial = w;
      for (Eigen::Index a = 0; a < free; ++a)
        trial.row(a) += t * step.segment(a * p, p).transpose();
      const LogitState next = evaluate(x, y, trial, options.ridge);
      if (next.penalized >= state.penalized) {
        w = std::move(trial);
        state = next;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // No ascent direction left at machine precision.
      out.converged = true;
      break;
    }
  }

  out.coef.bottomRows(free) = w;
  out.log_likelihood = state.log_likelihood;
  const Eigen::MatrixXd s = class_scores(x, w);
  bool separated = n > 0;
  for (Eigen::Index i = 0; i < n && separated; ++i) {
    Eigen::Index best = 0;
    s.row(i).maxCoeff(&best);
    if (best != y[static_cast<std::size_t>(i)]) separated = false;
  }
  // A perfect training fit only counts as separation when the solution is
  // held in check by the ridge term.
  out.separated = separated && w.cwiseAbs().maxCoeff() > 5.0;
  return out;
}

// ---------------------------------------------------------------- fits

namespace {

void check_parents(const Dataset& data, const std::string& target,
                   std::span<const std::string> parents) {
  data.column(target);
  std::set<std::string> seen;
  for (const auto& p : parents) {
    data.column(p);
    if (p == target) throw ParameterError("'" + target + "' cannot be its own parent");
    if (!seen.insert(p).second) throw ParameterError("duplicate parent '" + p + "'");
  }
}

double gaussian_log_likelihood(double rss, std::size_t n, double target_var) {
  const double floor = std::max(target_var * 1e-12, 1e-300);
  const double var = std::max(rss / static_cast<double>(n), floor);
  return -0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * var) + 1.0);
}

std::vector<int> codes_of(const Column& col) {
  std::vector<int> y(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) y[i] = col.code(i);
  return y;
}

}  // namespace

LinearFit fit_linear(const Dataset& data, const std::string& target,
                     std::span<const std::string> parents) {
  check_parents(data, target, parents);
  const Column& y_col = data.column(target);
  if (!y_col.schema().regressed_as_numeric())
    throw SchemaError("linear fit needs a numeric or ordinal target, '" + target + "' is nominal");
  LinearFit fit;
  fit.target = target;
  fit.parents.assign(parents.begin(), parents.end());
  fit.design = DesignSpec::from_data(data, parents);
  fit.n = data.rows();
  fit.k = fit.design.width() + 2;  // coefficients + intercept + variance
  if (fit.n <= fit.k)
    throw InsufficientDataError("fit of '" + target + "' needs more than " +
                                std::to_string(fit.k) + " rows");
  const Eigen::MatrixXd x = fit.design.matrix(data);
  Eigen::VectorXd y(static_cast<Eigen::Index>(fit.n));
  for (std::size_t i = 0; i < fit.n; ++i) y(static_cast<Eigen::Index>(i)) = y_col[i];
  fit.target_mean = mean_of(y_col.values());
  fit.target_std = population_std(y_col.values());

  const LeastSquares ls = solve_least_squares(x, y);
  fit.ridge_fallback = ls.ridge_fallback;
  fit.intercept = ls.coef(0);
  for (std::size_t t = 0; t < fit.design.terms().size(); ++t) {
    const std::size_t off = fit.design.offset(t);
    std::vector<double> b;
    for (std::size_t j = 0; j < fit.design.terms()[t].width(); ++j)
      b.push_back(ls.coef(static_cast<Eigen::Index>(off + j)));
    fit.betas.push_back(std::move(b));
  }
  fit.residual_std = std::sqrt(ls.rss / static_cast<double>(fit.n));
  fit.log_likelihood =
      gaussian_log_likelihood(ls.rss, fit.n, fit.target_std * fit.target_std);
  return fit;
}

double LinearFit::standardized_beta(std::size_t parent) const {
  const auto& b = betas.at(parent);
  const double denom = target_std > 0 ? target_std : 1.0;
  if (b.size() == 1) return b[0] / denom;
  double s = 0.0;
  for (double v : b) s += std::abs(v);
  return b.empty() ? 0.0 : s / static_cast<double>(b.size()) / denom;
}

double LinearFit::raw_slope(std::size_t parent) const {
  const DesignTerm& term = design.terms().at(parent);
  if (term.kind == ColumnKind::Nominal)
    throw ParameterError("raw slope is undefined for nominal parent '" + term.parent + "'");
  return betas[parent][0] / term.scale;
}

double LinearFit::raw_intercept() const {
  double c = intercept;
  for (std::size_t t = 0; t < design.terms().size(); ++t) {
    const DesignTerm& term = design.terms()[t];
    if (term.kind != ColumnKind::Nominal) c -= betas[t][0] * term.center / term.scale;
  }
  return c;
}

std::vector<double> LinearFit::predict(const Dataset& data) const {
  const Eigen::MatrixXd x = design.matrix(data);
  std::vector<double> out(data.rows(), intercept);
  for (std::size_t t = 0; t < betas.size(); ++t) {
    const std::size_t off = design.offset(t);
    for (std::size_t j = 0; j < betas[t].size(); ++j)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += betas[t][j] * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(off + j));
  }
  return out;
}

LogitFit fit_logit(const Dataset& data, const std::string& target,
                   std::span<const std::string> parents, const LogitOptions& options) {
  check_parents(data, target, parents);
  const Column& y_col = data.column(target);
  if (!y_col.schema().categorical())
    throw SchemaError("logit fit needs a categorical target, '" + target + "' is numeric");
  LogitFit fit;
  fit.target = target;
  fit.parents.assign(parents.begin(), parents.end());
  fit.design = DesignSpec::from_data(data, parents);
  fit.classes = y_col.level_count();
  fit.n = data.rows();
  fit.k = (fit.classes - 1) * (fit.design.width() + 1);
  if (fit.n <= fit.k)
    throw InsufficientDataError("fit of '" + target + "' needs more than " +
                                std::to_string(fit.k) + " rows");
  const auto y = codes_of(y_col);
  const auto sol = solve_multinomial(fit.design.matrix(data), y, fit.classes, options);
  fit.coef = sol.coef;
  fit.log_likelihood = sol.log_likelihood;
  fit.iterations = sol.iterations;
  fit.converged = sol.converged;
  fit.separated = sol.separated;
  return fit;
}

Eigen::MatrixXd LogitFit::linear_predictor(const Dataset& data) const {
  return design.matrix(data) * coef.transpose();
}

Eigen::MatrixXd LogitFit::predict_proba(const Dataset& data) const {
  return softmax_rows(linear_predictor(data));
}

double LogitFit::display_weight(std::size_t parent) const {
  const DesignTerm& term = design.terms().at(parent);
  const auto off = static_cast<Eigen::Index>(design.offset(parent));
  double s = 0.0;
  std::size_t count = 0;
  for (Eigen::Index c = 1; c < coef.rows(); ++c)
    for (std::size_t j = 0; j < term.width(); ++j, ++count)
      s += std::abs(coef(c, off + static_cast<Eigen::Index>(j)));
  if (count == 1) {
    // A single coefficient keeps its sign.
    return coef(1, off);
  }
  return count ? s / static_cast<double>(count) : 0.0;
}

NodeFit fit_node(const Dataset& data, const std::string& target,
                 std::span<const std::string> parents) {
  if (data.column(target).schema().regressed_as_numeric())
    return fit_linear(data, target, parents);
  return fit_logit(data, target, parents);
}

double bic(std::size_t k, std::size_t n, double log_likelihood) {
  return static_cast<double>(k) * std::log(static_cast<double>(n)) - 2.0 * log_likelihood;
}
double bic(const LinearFit& fit) { return bic(fit.k, fit.n, fit.log_likelihood); }
double bic(const LogitFit& fit) { return bic(fit.k, fit.n, fit.log_likelihood); }
double bic(const NodeFit& fit) {
  return std::visit([](const auto& f) { return bic(f); }, fit);
}

const std::vector<std::string>& fit_parents(const NodeFit& fit) {
  return std::visit([](const auto& f) -> const std::vector<std::string>& { return f.parents; },
                    fit);
}

// ---------------------------------------------------------------- CI test

const FitCache::Entry* FitCache::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void FitCache::store(const std::string& key, Entry entry) { entries_[key] = entry; }

double chi2_survival(double statistic, double df) {
  if (df <= 0.0) return 1.0;
  if (!(statistic > 0.0)) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  const boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

namespace {

bool is_constant(const Column& col) {
  const auto v = col.values();
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Maximized log-likelihood of `target` on `parents`; categorical targets
// use only their observed classes.
FitCache::Entry target_fit(const Dataset& data, const std::string& target,
                           std::vector<std::string> parents, FitCache* cache) {
  std::sort(parents.begin(), parents.end());
  std::string key = target + "|";
  for (const auto& p : parents) key += p + ",";
  if (cache)
    if (const auto* hit = cache->find(key)) return *hit;

  const Column& col = data.column(target);
  const DesignSpec design = DesignSpec::from_data(data, parents);
  const Eigen::MatrixXd x = design.matrix(data);
  FitCache::Entry entry{};
  if (col.schema().regressed_as_numeric()) {
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = col[static_cast<std::size_t>(i)];
    const double sd = population_std(col.values());
    const LeastSquares ls = solve_least_squares(x, y);
    entry.log_likelihood = gaussian_log_likelihood(ls.rss, data.rows(), sd * sd);
    entry.k = design.width() + 2;
  } else {
    std::vector<int> remap(col.level_count(), -1);
    int observed = 0;
    std::vector<int> y(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) {
      int& slot = remap[static_cast<std::size_t>(col.code(i))];
      if (slot < 0) slot = observed++;
      y[i] = slot;
    }
    const auto sol = solve_multinomial(x, y, static_cast<std::size_t>(observed), LogitOptions{});
    entry.log_likelihood = sol.log_likelihood;
    entry.k = static_cast<std::size_t>(observed - 1) * (design.width() + 1);
  }
  if (cache) cache->store(key, entry);
  return entry;
}

double directional_p(const Dataset& data, const std::string& target, const std::string& added,
                     std::span<const std::string> given, FitCache* cache) {
  std::vector<std::string> null_parents(given.begin(), given.end());
  std::vector<std::string> alt_parents = null_parents;
  alt_parents.push_back(added);
  const auto null_fit = target_fit(data, target, null_parents, cache);
  const auto alt_fit = target_fit(data, target, alt_parents, cache);
  const double stat = std::max(0.0, 2.0 * (alt_fit.log_likelihood - null_fit.log_likelihood));
  const double df = static_cast<double>(alt_fit.k) - static_cast<double>(null_fit.k);
  return chi2_survival(stat, df);
}

}  // namespace

CiResult ci_test(const Dataset& data, const std::string& x, const std::string& y,
                 std::span<const std::string> given, double p_threshold, FitCache* cache) {
  if (x == y) throw ParameterError("ci_test needs two distinct variables");
  for (const auto& g : given)
    if (g == x || g == y) throw ParameterError("conditioning set contains a tested variable");
  const std::string& a = std::min(x, y);
  const std::string& b = std::max(x, y);
  CiResult result;
  if (is_constant(data.column(a)) || is_constant(data.column(b))) {
    result.degenerate = true;
    result.warning = "degenerate column in test of '" + a + "' and '" + b + "'";
    return result;
  }
  std::vector<std::string> z(given.begin(), given.end());
  std::sort(z.begin(), z.end());
  const double p_ab = directional_p(data, a, b, z, cache);
  const double p_ba = directional_p(data, b, a, z, cache);
  result.p_value = std::clamp(std::max(p_ab, p_ba), 0.0, 1.0);
  result.independent = result.p_value > p_threshold;
  return result;
}

// ---------------------------------------------------------------- classifier

std::vector<int> Classifier::predict(const Dataset& data, std::span<const std::size_t> rows) const {
  const auto prob = predict_proba(data, rows);
  std::vector<int> out(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] > 0.5 ? 1 : 0;
  return out;
}

void LogisticClassifier::fit(const Dataset& data, std::span<const std::size_t> rows,
                             std::span<const std::string> features) {
  for (const auto& f : features)
    if (f == data.label()) throw ParameterError("label cannot be a classifier feature");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  favorable_ = data.favorable_code();
  const Column& label = data.label_column();
  std::vector<int> y(rows.size());
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[i] = label.code(rows[i]) == favorable_ ? 1 : 0;
    seen[y[i]] = true;
  }
  if (!seen[0] || !seen[1])
    throw ConstantLabelError("training label has a single class");
  design_ = DesignSpec::from_data(data, features, rows);
  const auto sol = solve_multinomial(design_.matrix(data, rows), y, 2, LogitOptions{});
  coef_ = sol.coef.row(1).transpose();
}

std::vector<double> LogisticClassifier::predict_proba(const Dataset& data,
                                                      std::span<const std::size_t> rows) const {
  const Eigen::VectorXd eta = design_.matrix(data, rows) * coef_;
  std::vector<double> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-eta(i)));
  return out;
}

std::unique_ptr<Classifier> make_classifier(std::string_view name) {
  if (name == "logistic" || name == "logistic_regression")
    return std::make_unique<LogisticClassifier>();
  throw ParameterError("unsupported classifier '" + std::string(name) + "'");
}

}  // namespace cdb
