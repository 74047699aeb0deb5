#pragma once

#include <cstddef>
#include <string>

#include "causaldebias/data.hpp"
#include "causaldebias/serialize.hpp"

namespace cdb {

/// One column for the comparison view. Numeric columns become a histogram
/// whose bin edges come from the original range (out-of-range debiased values
/// land in the end bins); categorical columns become level counts.
/// `debiased` may be null, giving `"debiased": null`.
Json node_distribution(const Dataset& original, const Dataset* debiased, const std::string& node,
                       std::size_t bins = 20);

/// Two columns together: grouped bar counts when both are categorical,
/// per-level moments of the numeric column when mixed, and a strided scatter
/// sample plus Pearson correlation when both are numeric.
Json edge_distribution(const Dataset& original, const Dataset* debiased, const std::string& a,
                       const std::string& b, std::size_t max_points = 500);

}  // namespace cdb
