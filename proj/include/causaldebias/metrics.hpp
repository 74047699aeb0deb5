#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causaldebias/data.hpp"
#include "causaldebias/regress.hpp"

namespace cdb {

/// One condition of a custom group: a categorical column restricted to some
/// levels, or a numeric column restricted to the bin [min, max).
struct Selection {
  std::string column;
  std::vector<std::string> levels;
  std::optional<double> min;
  std::optional<double> max;

  bool operator==(const Selection&) const = default;
};

struct GroupDef {
  std::string name;
  std::vector<Selection> all_of;

  bool operator==(const GroupDef&) const = default;
};

struct GroupMasks {
  std::vector<bool> a;
  std::vector<bool> b;
  std::vector<std::string> warnings;

  std::size_t size_a() const;
  std::size_t size_b() const;
};

/// Two groups to compare. Simple specs split a binary categorical column into
/// its privileged level (A) and the other level (B).
class GroupSpec {
 public:
  static GroupSpec simple(std::string column, std::string privileged);
  static GroupSpec custom(GroupDef a, GroupDef b);

  bool is_simple() const { return simple_; }
  const std::string& column() const { return column_; }
  const std::string& privileged() const { return privileged_; }
  const GroupDef& group_a() const { return a_; }
  const GroupDef& group_b() const { return b_; }

  /// Columns the groups are defined on; classifiers never see them.
  std::vector<std::string> sensitive_columns() const;
  /// Overlapping custom groups produce a warning. Throws SchemaError for
  /// unknown columns or levels.
  GroupMasks masks(const Dataset& data) const;

  /// Same groups with A and B exchanged.
  GroupSpec swapped() const;

 private:
  GroupMasks ordered_masks(const Dataset& data) const;

  bool simple_ = true;
  bool swapped_ = false;
  std::string column_;
  std::string privileged_;
  GroupDef a_;
  GroupDef b_;
};

struct Fourfold {
  std::size_t a_pos = 0;
  std::size_t a_neg = 0;
  std::size_t b_pos = 0;
  std::size_t b_neg = 0;

  double a_rate() const;
  double b_rate() const;
  bool operator==(const Fourfold&) const = default;
};

/// |P(favorable | A) - P(favorable | B)| x 100. EmptyGroupError if a group is empty.
double statistical_parity_diff(const Dataset& data, const GroupSpec& groups);
double statistical_parity_diff(const Dataset& data, const GroupMasks& masks);

Fourfold fourfold(const Dataset& data, const GroupSpec& groups);
Fourfold fourfold(const Dataset& data, const GroupMasks& masks);

/// Gower distance between two rows over `columns`, with numeric ranges taken
/// from `ranges` (one per column; ignored for categorical columns).
double gower_row_distance(const Dataset& x, std::size_t i, const Dataset& y, std::size_t j,
                          std::span<const std::size_t> columns, std::span<const double> ranges);

/// Mean share (x 100) of each row's k nearest neighbours, by Gower distance
/// over all non-label columns, whose label differs. Ties go to the lower row
/// index. ParameterError unless rows > k.
double individual_bias(const Dataset& data, std::size_t k = 10);

/// Mean per-row Gower distance between aligned rows; numeric ranges come from
/// `original` and each numeric term is capped at 1.
double gower_distortion(const Dataset& original, const Dataset& debiased);

struct ClassifierMetrics {
  double accuracy_diff = 0.0;  // percentage points
  double fnr_diff = 0.0;
  double fpr_diff = 0.0;
  double accuracy = 0.0;       // fraction
  double f1 = 0.0;
  int folds = 0;
  std::vector<std::string> warnings;
};

/// Three seeded 50:50 holdouts. The classifier trains on `source` (without
/// the label and `drop` columns) and is scored against `truth`'s labels;
/// group rates use `masks` on the held-out half.
ClassifierMetrics classifier_fairness(const Dataset& source, const Dataset& truth,
                                      const GroupMasks& masks,
                                      std::span<const std::string> drop,
                                      std::string_view classifier, std::uint64_t seed);

/// Deterministic 50:50 split of `n` rows for holdout `fold`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::size_t n,
                                                                           std::uint64_t seed,
                                                                           int fold);

struct MetricsReport {
  double parity_diff = 0.0;
  double individual_bias = 0.0;
  double accuracy_diff = 0.0;
  double fnr_diff = 0.0;
  double fpr_diff = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double distortion = 0.0;
  Fourfold fourfold;
};

struct EvaluateOptions {
  std::string classifier = "logistic";
  std::size_t k = 10;
  std::uint64_t seed = 0;
};

struct Evaluation {
  MetricsReport original;   // baseline: sensitive columns removed from features
  MetricsReport debiased;
  std::vector<std::string> warnings;
};

/// Both reports. Debiased classifier metrics use the original labels as
/// ground truth.
Evaluation evaluate(const Dataset& original, const Dataset& debiased, const GroupSpec& groups,
                    const EvaluateOptions& options = {});

}  // namespace cdb
