#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "causaldebias/data.hpp"

namespace cdb {

/// How one parent column enters a regression. Numeric and ordinal parents
/// are standardized with statistics frozen at fit time; nominal parents are
/// one-hot coded without their first (reference) level.
struct DesignTerm {
  std::string parent;
  ColumnKind kind = ColumnKind::Numeric;
  double center = 0.0;
  double scale = 1.0;
  std::size_t levels = 0;

  std::size_t width() const { return kind == ColumnKind::Nominal ? levels - 1 : 1; }
};

class DesignSpec {
 public:
  DesignSpec() = default;
  /// Statistics come from `rows` (all rows when empty).
  static DesignSpec from_data(const Dataset& data, std::span<const std::string> parents,
                              std::span<const std::size_t> rows = {});

  const std::vector<DesignTerm>& terms() const { return terms_; }
  /// Number of input columns, excluding the intercept.
  std::size_t width() const;
  /// First matrix column of term `t` (column 0 is the intercept).
  std::size_t offset(std::size_t t) const;
  /// Rows of `data` (all when empty) as an n x (1 + width) matrix.
  Eigen::MatrixXd matrix(const Dataset& data, std::span<const std::size_t> rows = {}) const;

 private:
  std::vector<DesignTerm> terms_;
};

struct LinearFit {
  std::string target;
  std::vector<std::string> parents;
  DesignSpec design;
  std::vector<std::vector<double>> betas;  // per parent, one entry per design column
  double intercept = 0.0;
  double residual_std = 0.0;
  double log_likelihood = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  double target_mean = 0.0;
  double target_std = 0.0;
  bool ridge_fallback = false;

  /// Coefficient scaled to a standardized target (numeric parents only
  /// have one entry; nominal parents report the mean absolute dummy value).
  double standardized_beta(std::size_t parent) const;
  /// Slope per raw unit of a numeric parent.
  double raw_slope(std::size_t parent) const;
  /// Intercept on the raw parent scale.
  double raw_intercept() const;
  std::vector<double> predict(const Dataset& data) const;
};

struct LogitFit {
  std::string target;
  std::vector<std::string> parents;
  DesignSpec design;
  std::size_t classes = 0;
  Eigen::MatrixXd coef;  // classes x (1 + width); row 0 is the reference class
  double log_likelihood = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  int iterations = 0;
  bool converged = false;
  bool separated = false;

  /// n x classes class scores (column 0 identically zero).
  Eigen::MatrixXd linear_predictor(const Dataset& data) const;
  Eigen::MatrixXd predict_proba(const Dataset& data) const;
  /// Display weight of a parent: mean |coefficient| over its design columns
  /// and the non-reference classes.
  double display_weight(std::size_t parent) const;
};

using NodeFit = std::variant<LinearFit, LogitFit>;

struct LogitOptions {
  int max_iter = 200;
  double tol = 1e-8;
  double ridge = 1e-6;
};

constexpr double kLinearRidge = 1e-8;

LinearFit fit_linear(const Dataset& data, const std::string& target,
                     std::span<const std::string> parents);
LogitFit fit_logit(const Dataset& data, const std::string& target,
                   std::span<const std::string> parents, const LogitOptions& options = {});
/// Linear fit for numeric/ordinal targets, multinomial logit for nominal.
NodeFit fit_node(const Dataset& data, const std::string& target,
                 std::span<const std::string> parents);

double bic(std::size_t k, std::size_t n, double log_likelihood);
double bic(const LinearFit& fit);
double bic(const LogitFit& fit);
double bic(const NodeFit& fit);
const std::vector<std::string>& fit_parents(const NodeFit& fit);

// ---------------------------------------------------------------- solvers

struct LeastSquares {
  Eigen::VectorXd coef;
  double rss = 0.0;
  bool ridge_fallback = false;
};
LeastSquares solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct MultinomialSolution {
  Eigen::MatrixXd coef;  // classes x p, row 0 zero
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separated = false;
};
/// Ridge-penalized multinomial logit by damped Newton from a zero start.
MultinomialSolution solve_multinomial(const Eigen::MatrixXd& x, std::span<const int> y,
                                      std::size_t classes, const LogitOptions& options);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

// ---------------------------------------------------------------- CI test

/// Memo of maximized log-likelihoods keyed by (target, parent set).
class FitCache {
 public:
  struct Entry {
    double log_likelihood;
    std::size_t k;
  };
  const Entry* find(const std::string& key) const;
  void store(const std::string& key, Entry entry);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Entry> entries_;
};

struct CiResult {
  bool independent = true;
  double p_value = 1.0;
  bool degenerate = false;
  std::string warning;
};

/// Symmetric mixed-type test of x _||_ y | given: two directional
/// likelihood-ratio tests (x on given vs given+y, and y on given vs given+x),
/// combined by the larger p-value.
CiResult ci_test(const Dataset& data, const std::string& x, const std::string& y,
                 std::span<const std::string> given, double p_threshold,
                 FitCache* cache = nullptr);

/// Upper tail of the chi-squared distribution.
double chi2_survival(double statistic, double df);

// ---------------------------------------------------------------- classifier

/// Binary classifier over dataset rows. Implementations encode features
/// themselves and must be deterministic for fixed inputs.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  virtual void fit(const Dataset& data, std::span<const std::size_t> rows,
                   std::span<const std::string> features) = 0;
  /// Probability of the favorable label for each requested row.
  virtual std::vector<double> predict_proba(const Dataset& data,
                                            std::span<const std::size_t> rows) const = 0;
  /// 1 where the favorable label is predicted, else 0.
  std::vector<int> predict(const Dataset& data, std::span<const std::size_t> rows) const;
};

class LogisticClassifier final : public Classifier {
 public:
  std::string name() const override { return "logistic"; }
  void fit(const Dataset& data, std::span<const std::size_t> rows,
           std::span<const std::string> features) override;
  std::vector<double> predict_proba(const Dataset& data,
                                    std::span<const std::size_t> rows) const override;

  const DesignSpec& design() const { return design_; }
  const Eigen::VectorXd& coef() const { return coef_; }

 private:
  DesignSpec design_;
  Eigen::VectorXd coef_;  // log-odds of the favorable label
  int favorable_ = 1;
};

std::unique_ptr<Classifier> make_classifier(std::string_view name);

}  // namespace cdb
