#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "causaldebias/causal.hpp"
#include "causaldebias/data.hpp"
#include "causaldebias/debias.hpp"
#include "causaldebias/metrics.hpp"
#include "causaldebias/model.hpp"
#include "causaldebias/serialize.hpp"

// Steps shared by the command-line tool and the HTTP service. Both front-ends
// go through these functions so equal requests give equal bytes.
namespace cdb {

/// A parsed table together with the bytes and options it came from.
struct Table {
  Dataset data;
  CsvOptions options;
  std::string bytes;
};

Table load_table(std::string bytes, const CsvOptions& options);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

/// Seed from CAUSALDEBIAS_SEED, else `fallback`. ParameterError if the
/// variable is set but not an unsigned integer.
std::uint64_t default_seed(std::uint64_t fallback = 0);

/// Stable PC followed by a fit of every endogenous node.
CausalModel discover_model(const Dataset& data, const PcOptions& options);

struct ScriptStep {
  Edit edit;
  EditOutcome outcome;
  double total_bic = 0.0;
};

/// Applies a script in order. An edit tagged with a stage other than the
/// model's current one switches stage first, as a replayed log would. On
/// failure the model keeps every step before the failing one and the error
/// message names the step.
std::vector<ScriptStep> apply_script(CausalModel& model, const Dataset& data,
                                     const std::vector<Edit>& script);

/// CSV bytes of a debias run. A run that simulated nothing returns `source`
/// untouched.
std::string debiased_csv(const DebiasResult& result, std::string_view source);

/// Metrics comparison of `original` against debiased CSV bytes parsed with
/// the original's schema.
Evaluation evaluate_csv(const Dataset& original, std::string_view debiased_bytes,
                        const GroupSpec& groups, const EvaluateOptions& options);

}  // namespace cdb
