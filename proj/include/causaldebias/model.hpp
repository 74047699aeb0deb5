#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causaldebias/causal.hpp"
#include "causaldebias/data.hpp"
#include "causaldebias/regress.hpp"

namespace cdb {

enum class Stage { Refine, Debias };

// `SetStage` entries only appear in logs and edit scripts; they record stage
// switches so replaying a log reproduces the alpha resets.
enum class EditOp { Add, Delete, Reverse, Direct, Reweight, SetStage };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);
std::string_view to_string(EditOp op);
EditOp edit_op_from_string(std::string_view text);

struct Edit {
  EditOp op = EditOp::Add;
  std::string src;
  std::string dst;
  int weight_percent = 0;  // reweight only, in [-100, 100]
  Stage stage = Stage::Refine;

  bool operator==(const Edit&) const = default;
};

using EdgeKey = std::pair<std::string, std::string>;

struct EditOutcome {
  double bic_delta = 0.0;
  std::vector<std::string> refit;
  std::vector<std::string> warnings;
};

/// Structural causal model under interactive editing: graph, one fit per
/// endogenous node, per-edge alpha scale factors and the edit history.
class CausalModel {
 public:
  CausalModel() = default;

  /// Fits every node with at least one directed parent. Stage starts at refine.
  static CausalModel build(const Dataset& data, Pdag graph);
  /// Rebuilds from `base` and re-applies `log`, ending in `final_stage`.
  static CausalModel replay(const Dataset& data, const Pdag& base, const std::vector<Edit>& log,
                            Stage final_stage);

  const Pdag& graph() const { return graph_; }
  const Pdag& base_graph() const { return base_; }
  Stage stage() const { return stage_; }
  const std::map<std::string, NodeFit>& fits() const { return fits_; }
  const NodeFit* fit(const std::string& node) const;
  double node_bic(const std::string& node) const;
  double total_bic() const;

  double alpha(const std::string& src, const std::string& dst) const;
  const std::map<EdgeKey, double>& alphas() const { return alphas_; }
  const std::set<EdgeKey>& added_in_debias() const { return added_; }
  const std::set<EdgeKey>& modified_in_debias() const { return modified_; }
  const std::vector<Edit>& log() const { return log_; }

  /// Applies one edit in the current stage. On any exception the model is
  /// left unchanged. Refine edits refit every node whose parent set changed;
  /// debias deletes and reweights only set alpha; debias adds refit the head.
  EditOutcome apply(const Dataset& data, const Edit& edit);

  /// Switching back to refine resets all alphas and forgets debias edits.
  /// Returns warnings (e.g. undirected edges that stay inert in debias).
  std::vector<std::string> set_stage(Stage stage);

  /// Refits the given nodes against their current directed parents.
  void refit(const Dataset& data, const std::set<std::string>& nodes);

 private:
  void fit_node_into(const Dataset& data, const std::string& node);

  Pdag base_;
  Pdag graph_;
  Stage stage_ = Stage::Refine;
  std::map<std::string, NodeFit> fits_;
  std::map<std::string, double> bics_;
  std::map<EdgeKey, double> alphas_;  // only entries != 1
  std::set<EdgeKey> added_;
  std::set<EdgeKey> modified_;
  std::vector<Edit> log_;
};

inline CausalModel build_model(const Dataset& data, Pdag graph) {
  return CausalModel::build(data, std::move(graph));
}

/// Value-semantics wrapper: returns the edited copy and its BIC delta.
std::pair<CausalModel, double> apply_edit(CausalModel model, const Dataset& data, const Edit& edit);

/// All simple directed paths, lexicographic by node-name sequence.
std::vector<std::vector<std::string>> find_paths(const Pdag& graph, const std::string& source,
                                                 const std::string& target);
inline std::vector<std::vector<std::string>> find_paths(const CausalModel& model,
                                                        const std::string& source,
                                                        const std::string& target) {
  return find_paths(model.graph(), source, target);
}

/// Nodes to re-simulate: heads of debias-stage added/modified edges and all
/// their descendants, in topological order.
std::vector<std::string> affected_nodes(const CausalModel& model);

struct ReweightEntry {
  EdgeKey edge;
  double alpha = 1.0;
};

struct EditLogView {
  std::vector<EdgeKey> added;
  std::vector<EdgeKey> deleted;
  std::vector<ReweightEntry> reweighted;
  std::vector<std::string> affected;
  std::vector<Edit> edits;
};

EditLogView edit_log_view(const CausalModel& model);

struct EdgeDisplay {
  Edge edge;
  std::optional<double> beta;  // standardized; absent for undirected edges
  double alpha = 1.0;
  double effective_beta = 0.0;
  bool multi_coefficient = false;  // no single beta (multi-level categorical)
};

std::vector<EdgeDisplay> edge_display(const CausalModel& model);
/// Edges whose |standardized beta| reaches `min_abs_beta`; undirected edges
/// are always kept.
std::vector<EdgeDisplay> visible_edges(const CausalModel& model, double min_abs_beta);

}  // namespace cdb
