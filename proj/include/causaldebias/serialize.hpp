#pragma once

#include <string>
#include <vector>

#include "causaldebias/causal.hpp"
#include "causaldebias/data.hpp"
#include "causaldebias/debias.hpp"
#include "causaldebias/metrics.hpp"
#include "causaldebias/model.hpp"
#include "causaldebias/synthetic.hpp"
#include "json.hpp"

namespace cdb {

using Json = nlohmann::ordered_json;

Json to_json(const Pdag& graph);
Pdag pdag_from_json(const Json& j);

Json to_json(const Edit& edit);
/// Accepts {op, src, dst, weight_percent?, stage?}; `default_stage` fills a
/// missing stage. Throws EditError on malformed entries.
Edit edit_from_json(const Json& j, Stage default_stage);
/// A script is a JSON array of edits or an object with an "edits" array.
std::vector<Edit> edit_script_from_json(const Json& j);

Json to_json(const CsvOptions& options);
CsvOptions csv_options_from_json(const Json& j);

Json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const Json& j);

Json to_json(const GroupSpec& groups);
GroupSpec group_spec_from_json(const Json& j);

Json to_json(const Fourfold& f);
Json to_json(const MetricsReport& report);
Json to_json(const Evaluation& evaluation);

Json to_json(const EditLogView& view);
/// Graph view for clients: nodes with fit summaries, edges with weights.
Json model_view_json(const CausalModel& model, const Dataset& data);
Json fit_summary_json(const NodeFit& fit);

/// Persistent model: data options, discovered graph and edit log. The current
/// graph is included for readers; loading replays the log from the base.
Json model_file_json(const CausalModel& model, const CsvOptions& data_options);
struct ModelFile {
  CsvOptions data_options;
  Pdag base;
  std::vector<Edit> log;
  Stage stage = Stage::Refine;
};
ModelFile model_file_from_json(const Json& j);
CausalModel replay_model_file(const ModelFile& file, const Dataset& data);

/// Sidecar written next to a debiased CSV.
Json debias_metadata_json(const DebiasResult& result);

/// Canonical text form: two-space indent plus trailing newline.
std::string dump(const Json& j);

}  // namespace cdb
