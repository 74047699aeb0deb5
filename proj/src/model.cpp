#include "causaldebias/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "causaldebias/errors.hpp"

namespace cdb {

std::string_view to_string(Stage stage) {
  return stage == Stage::Refine ? "refine" : "debias";
}

Stage stage_from_string(std::string_view text) {
  if (text == "refine") return Stage::Refine;
  if (text == "debias") return Stage::Debias;
  throw EditError("unknown stage '" + std::string(text) + "'");
}

std::string_view to_string(EditOp op) {
  switch (op) {
    case EditOp::Add: return "add";
    case EditOp::Delete: return "delete";
    case EditOp::Reverse: return "reverse";
    case EditOp::Direct: return "direct";
    case EditOp::Reweight: return "reweight";
    case EditOp::SetStage: return "stage";
  }
  return "add";
}

EditOp edit_op_from_string(std::string_view text) {
  if (text == "add") return EditOp::Add;
  if (text == "delete") return EditOp::Delete;
  if (text == "reverse") return EditOp::Reverse;
  if (text == "direct") return EditOp::Direct;
  if (text == "reweight") return EditOp::Reweight;
  if (text == "stage") return EditOp::SetStage;
  throw EditError("unknown edit op '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- model

CausalModel CausalModel::build(const Dataset& data, Pdag graph) {
  for (const auto& node : graph.nodes())
    if (!data.has_column(node)) throw SchemaError("graph node '" + node + "' is not a column");
  if (!graph.acyclic()) throw CycleError("graph has a directed cycle");
  CausalModel m;
  m.base_ = graph;
  m.graph_ = std::move(graph);
  for (const auto& node : m.graph_.nodes()) {
    if (m.graph_.parents(m.graph_.require(node)).empty()) continue;
    try {
      m.fit_node_into(data, node);
    } catch (const Error& e) {
      throw Error(e.kind(), "fitting node '" + node + "': " + e.what());
    }
  }
  return m;
}

CausalModel CausalModel::replay(const Dataset& data, const Pdag& base,
                                const std::vector<Edit>& log, Stage final_stage) {
  CausalModel m = build(data, base);
  for (const Edit& e : log) {
    if (e.op == EditOp::SetStage) {
      m.set_stage(e.stage);
      continue;
    }
    if (e.stage != m.stage_) m.set_stage(e.stage);
    m.apply(data, e);
  }
  if (m.stage_ != final_stage) m.set_stage(final_stage);
  return m;
}

const NodeFit* CausalModel::fit(const std::string& node) const {
  auto it = fits_.find(node);
  return it == fits_.end() ? nullptr : &it->second;
}

double CausalModel::node_bic(const std::string& node) const {
  auto it = bics_.find(node);
  return it == bics_.end() ? 0.0 : it->second;
}

double CausalModel::total_bic() const {
  double total = 0.0;
  for (const auto& [node, b] : bics_) total += b;
  return total;
}

double CausalModel::alpha(const std::string& src, const std::string& dst) const {
  auto it = alphas_.find({src, dst});
  return it == alphas_.end() ? 1.0 : it->second;
}

void CausalModel::fit_node_into(const Dataset& data, const std::string& node) {
  const auto parents = graph_.parent_names(node);
  if (parents.empty()) {
    fits_.erase(node);
    bics_.erase(node);
    return;
  }
  NodeFit f = fit_node(data, node, parents);
  bics_[node] = bic(f);
  fits_.insert_or_assign(node, std::move(f));
}

void CausalModel::refit(const Dataset& data, const std::set<std::string>& nodes) {
  for (const auto& node : nodes) fit_node_into(data, node);
}

std::vector<std::string> CausalModel::set_stage(Stage stage) {
  std::vector<std::string> warnings;
  if (stage == stage_) return warnings;
  if (stage == Stage::Refine) {
    alphas_.clear();
    added_.clear();
    modified_.clear();
  } else {
    for (const auto& e : graph_.edges())
      if (!e.directed)
        warnings.push_back("undirected edge " + e.src + " -- " + e.dst +
                           " is ignored by fitting and simulation");
  }
  stage_ = stage;
  log_.push_back(Edit{EditOp::SetStage, "", "", 0, stage});
  return warnings;
}

EditOutcome CausalModel::apply(const Dataset& data, const Edit& edit) {
  if (edit.op == EditOp::SetStage) {
    CausalModel next = *this;
    EditOutcome out;
    out.warnings = next.set_stage(edit.stage);
    *this = std::move(next);
    return out;
  }
  const std::size_t s = graph_.require(edit.src);
  const std::size_t d = graph_.require(edit.dst);
  if (s == d) throw EditError("edit needs two distinct nodes");
  const std::string edge_text = edit.src + " -> " + edit.dst;

  CausalModel next = *this;
  Pdag& g = next.graph_;
  std::set<std::string> refit_nodes;
  Edit recorded = edit;
  recorded.stage = stage_;

  if (stage_ == Stage::Refine) {
    switch (edit.op) {
      case EditOp::Add:
        if (g.adjacent(s, d)) throw EditError("edge between " + edit.src + " and " + edit.dst + " already exists");
        g.add_directed(s, d);
        refit_nodes.insert(edit.dst);
        break;
      case EditOp::Delete:
        if (g.has_directed(s, d)) {
          refit_nodes.insert(edit.dst);
        } else if (!g.has_undirected(s, d)) {
          throw EditError("no edge " + edge_text + " to delete");
        }
        g.remove(s, d);
        break;
      case EditOp::Reverse:
        if (!g.has_directed(s, d)) throw EditError("reverse needs a directed edge " + edge_text);
        g.remove(s, d);
        g.add_directed(d, s);
        refit_nodes.insert(edit.src);
        refit_nodes.insert(edit.dst);
        break;
      case EditOp::Direct:
        if (!g.has_undirected(s, d)) throw EditError("direct needs an undirected edge " + edit.src + " -- " + edit.dst);
        g.orient(s, d);
        refit_nodes.insert(edit.dst);
        break;
      case EditOp::Reweight:
        throw EditError("reweighting is only available in the debias stage");
      case EditOp::SetStage: break;
    }
  } else {
    switch (edit.op) {
      case EditOp::Add:
        if (g.adjacent(s, d)) throw EditError("edge between " + edit.src + " and " + edit.dst + " already exists");
        g.add_directed(s, d);
        refit_nodes.insert(edit.dst);
        next.added_.insert({edit.src, edit.dst});
        break;
      case EditOp::Delete:
      case EditOp::Reweight: {
        if (!g.has_directed(s, d)) throw EditError("no directed edge " + edge_text);
        int percent = edit.op == EditOp::Delete ? -100 : edit.weight_percent;
        if (percent < -100 || percent > 100)
          throw EditError("weight_percent must lie in [-100, 100]");
        if (percent == -100) {
          recorded.op = EditOp::Delete;
          recorded.weight_percent = -100;
        }
        const double a = 1.0 + percent / 100.0;
        const EdgeKey key{edit.src, edit.dst};
        if (a == 1.0) {
          next.alphas_.erase(key);
          next.modified_.erase(key);
        } else {
          next.alphas_[key] = a;
          next.modified_.insert(key);
        }
        break;
      }
      case EditOp::Reverse:
      case EditOp::Direct:
        throw EditError(std::string(to_string(edit.op)) + " is only available in the refine stage");
      case EditOp::SetStage: break;
    }
  }

  const double before = total_bic();
  try {
    next.refit(data, refit_nodes);
  } catch (const Error& e) {
    throw Error(e.kind(), "refitting after " + std::string(to_string(edit.op)) + " " + edge_text +
                              ": " + e.what());
  }
  next.log_.push_back(recorded);
  EditOutcome out;
  out.bic_delta = next.total_bic() - before;
  out.refit.assign(refit_nodes.begin(), refit_nodes.end());
  *this = std::move(next);
  return out;
}

std::pair<CausalModel, double> apply_edit(CausalModel model, const Dataset& data,
                                          const Edit& edit) {
  const double delta = model.apply(data, edit).bic_delta;
  return {std::move(model), delta};
}

// ---------------------------------------------------------------- queries

std::vector<std::vector<std::string>> find_paths(const Pdag& graph, const std::string& source,
                                                 const std::string& target) {
  const std::size_t s = graph.require(source);
  const std::size_t t = graph.require(target);
  if (s == t) throw EditError("path source and target must differ");
  const auto& names = graph.nodes();
  std::vector<std::vector<std::string>> paths;
  std::vector<std::size_t> current{s};
  std::vector<bool> on_path(graph.size(), false);
  on_path[s] = true;

  std::function<void(std::size_t)> dfs = [&](std::size_t v) {
    auto next = graph.children(v);
    std::sort(next.begin(), next.end(),
              [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
    for (std::size_t c : next) {
      if (on_path[c]) continue;
      current.push_back(c);
      if (c == t) {
        std::vector<std::string> p;
        for (std::size_t x : current) p.push_back(names[x]);
        paths.push_back(std::move(p));
      } else {
        on_path[c] = true;
        dfs(c);
        on_path[c] = false;
      }
      current.pop_back();
    }
  };
  dfs(s);
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::vector<std::string> affected_nodes(const CausalModel& model) {
  if (model.stage() != Stage::Debias) return {};
  const Pdag& g = model.graph();
  std::set<std::size_t> sim;
  auto mark = [&](const EdgeKey& e) {
    const std::size_t head = g.require(e.second);
    sim.insert(head);
    for (std::size_t d : g.descendants(head)) sim.insert(d);
  };
  for (const auto& e : model.added_in_debias()) mark(e);
  for (const auto& e : model.modified_in_debias()) mark(e);
  std::vector<std::string> out;
  for (std::size_t v : g.topological_order())
    if (sim.count(v)) out.push_back(g.nodes()[v]);
  return out;
}

EditLogView edit_log_view(const CausalModel& model) {
  EditLogView view;
  view.added.assign(model.added_in_debias().begin(), model.added_in_debias().end());
  for (const auto& key : model.modified_in_debias()) {
    const double a = model.alpha(key.first, key.second);
    if (a == 0.0) view.deleted.push_back(key);
    else view.reweighted.push_back({key, a});
  }
  view.affected = affected_nodes(model);
  for (const auto& e : model.log())
    if (e.op != EditOp::SetStage) view.edits.push_back(e);
  return view;
}

std::vector<EdgeDisplay> edge_display(const CausalModel& model) {
  std::vector<EdgeDisplay> out;
  for (const Edge& e : model.graph().edges()) {
    EdgeDisplay d;
    d.edge = e;
    if (e.directed) {
      d.alpha = model.alpha(e.src, e.dst);
      if (const NodeFit* f = model.fit(e.dst)) {
        const auto& parents = fit_parents(*f);
        const auto it = std::find(parents.begin(), parents.end(), e.src);
        const std::size_t idx = static_cast<std::size_t>(it - parents.begin());
        if (const auto* lin = std::get_if<LinearFit>(f)) {
          d.beta = lin->standardized_beta(idx);
          d.multi_coefficient = lin->betas[idx].size() > 1;
        } else {
          const auto& logit = std::get<LogitFit>(*f);
          d.beta = logit.display_weight(idx);
          d.multi_coefficient = logit.classes > 2 || logit.design.terms()[idx].width() > 1;
        }
        d.effective_beta = d.alpha * *d.beta;
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<EdgeDisplay> visible_edges(const CausalModel& model, double min_abs_beta) {
  std::vector<EdgeDisplay> out;
  for (auto& d : edge_display(model))
    if (!d.beta || std::abs(*d.beta) >= min_abs_beta) out.push_back(std::move(d));
  return out;
}

}  // namespace cdb
