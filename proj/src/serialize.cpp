#include "causaldebias/serialize.hpp"

#include "causaldebias/errors.hpp"

namespace cdb {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

const Json& require(const Json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string(what) + " is missing '" + key + "'");
  return *it;
}

}  // namespace

// ---------------------------------------------------------------- graph

Json to_json(const Pdag& graph) {
  Json j;
  j["nodes"] = graph.nodes();
  Json edges = Json::array();
  for (const Edge& e : graph.edges())
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"directed", e.directed}});
  j["edges"] = std::move(edges);
  Json seps = Json::array();
  for (const auto& [pair, set] : graph.sepsets)
    seps.push_back({{"a", pair.first}, {"b", pair.second}, {"given", set}});
  j["sepsets"] = std::move(seps);
  j["notes"] = graph.notes;
  return j;
}

Pdag pdag_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("graph must be a JSON object");
  Pdag g(require(j, "nodes", "graph").get<std::vector<std::string>>());
  for (const auto& e : require(j, "edges", "graph")) {
    const std::size_t a = g.require(e.at("src").get<std::string>());
    const std::size_t b = g.require(e.at("dst").get<std::string>());
    if (get_or<bool>(e, "directed", true)) g.add_directed(a, b);
    else g.add_undirected(a, b);
  }
  if (auto it = j.find("sepsets"); it != j.end())
    for (const auto& s : *it)
      g.sepsets[std::minmax(s.at("a").get<std::string>(), s.at("b").get<std::string>())] =
          s.at("given").get<std::vector<std::string>>();
  if (auto it = j.find("notes"); it != j.end()) g.notes = it->get<std::vector<std::string>>();
  return g;
}

// ---------------------------------------------------------------- edits

Json to_json(const Edit& edit) {
  Json j;
  j["op"] = to_string(edit.op);
  if (edit.op != EditOp::SetStage) {
    j["src"] = edit.src;
    j["dst"] = edit.dst;
  }
  if (edit.op == EditOp::Reweight || (edit.op == EditOp::Delete && edit.weight_percent != 0))
    j["weight_percent"] = edit.weight_percent;
  j["stage"] = to_string(edit.stage);
  return j;
}

Edit edit_from_json(const Json& j, Stage default_stage) {
  try {
    if (!j.is_object()) throw EditError("edit must be a JSON object");
    Edit e;
    e.op = edit_op_from_string(require(j, "op", "edit").get<std::string>());
    e.stage = default_stage;
    if (auto it = j.find("stage"); it != j.end() && !it->is_null())
      e.stage = stage_from_string(it->get<std::string>());
    if (e.op == EditOp::SetStage) return e;
    e.src = require(j, "src", "edit").get<std::string>();
    e.dst = require(j, "dst", "edit").get<std::string>();
    if (auto it = j.find("weight_percent"); it != j.end() && !it->is_null()) {
      const double w = it->get<double>();
      if (w != static_cast<int>(w)) throw EditError("weight_percent must be an integer");
      e.weight_percent = static_cast<int>(w);
    } else if (e.op == EditOp::Reweight) {
      throw EditError("reweight needs weight_percent");
    }
    if (e.op == EditOp::Delete && e.stage == Stage::Debias) e.weight_percent = -100;
    return e;
  } catch (const Json::exception& ex) {
    throw EditError(std::string("malformed edit: ") + ex.what());
  } catch (const SchemaError& ex) {
    throw EditError(ex.what());
  }
}

std::vector<Edit> edit_script_from_json(const Json& j) {
  const Json* list = &j;
  if (j.is_object()) {
    auto it = j.find("edits");
    if (it == j.end()) throw EditError("edit script object needs an 'edits' array");
    list = &*it;
  }
  if (!list->is_array()) throw EditError("edit script must be an array");
  std::vector<Edit> out;
  Stage stage = Stage::Refine;
  for (const auto& e : *list) {
    out.push_back(edit_from_json(e, stage));
    stage = out.back().stage;
  }
  return out;
}

// ---------------------------------------------------------------- options and specs

Json to_json(const CsvOptions& o) {
  Json j;
  j["label"] = o.label;
  j["nominal"] = o.nominal;
  j["ordinal"] = o.ordinal;
  j["favorable"] = o.favorable ? Json(*o.favorable) : Json(nullptr);
  j["seed"] = o.seed;
  return j;
}

CsvOptions csv_options_from_json(const Json& j) {
  try {
    CsvOptions o;
    o.label = require(j, "label", "data options").get<std::string>();
    o.nominal = get_or<std::vector<std::string>>(j, "nominal", {});
    o.ordinal = get_or<std::vector<std::string>>(j, "ordinal", {});
    if (auto it = j.find("favorable"); it != j.end() && !it->is_null())
      o.favorable = it->get<std::string>();
    o.seed = get_or<std::uint64_t>(j, "seed", 0);
    return o;
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed data options: ") + ex.what());
  }
}

Json to_json(const SyntheticSpec& spec) {
  Json j;
  j["n_rows"] = spec.n_rows;
  j["label"] = spec.label;
  if (spec.favorable) j["favorable"] = *spec.favorable;
  Json nodes = Json::array();
  for (const auto& n : spec.nodes) {
    Json node;
    node["name"] = n.name;
    node["kind"] = to_string(n.kind);
    if (!n.levels.empty()) node["levels"] = n.levels;
    if (n.latent) node["latent"] = true;
    if (n.uniform) node["uniform"] = {n.uniform->first, n.uniform->second};
    if (!n.probs.empty()) node["probs"] = n.probs;
    if (!n.sampling_bias.empty()) node["sampling_bias"] = n.sampling_bias;
    if (!n.parents.empty()) {
      Json parents = Json::array();
      for (const auto& [name, w] : n.parents) {
        Json p;
        p["parent"] = name;
        if (const double* d = std::get_if<double>(&w)) p["weight"] = *d;
        else p["weight"] = std::get<std::map<std::string, double>>(w);
        parents.push_back(std::move(p));
      }
      node["parents"] = std::move(parents);
      node["intercept"] = n.intercept;
      node["noise_std"] = n.noise_std;
    }
    if (!n.cutpoints.empty()) node["cutpoints"] = n.cutpoints;
    if (n.round_digits) node["round_digits"] = *n.round_digits;
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  try {
    SyntheticSpec spec;
    spec.n_rows = get_or<std::size_t>(j, "n_rows", 4000);
    spec.label = require(j, "label", "synthetic spec").get<std::string>();
    if (auto it = j.find("favorable"); it != j.end() && !it->is_null())
      spec.favorable = it->get<std::string>();
    for (const auto& node : require(j, "nodes", "synthetic spec")) {
      SyntheticNode n;
      n.name = node.at("name").get<std::string>();
      n.kind = column_kind_from_string(get_or<std::string>(node, "kind", "numeric"));
      n.levels = get_or<std::vector<std::string>>(node, "levels", {});
      n.latent = get_or<bool>(node, "latent", false);
      if (auto it = node.find("uniform"); it != node.end())
        n.uniform = std::make_pair(it->at(0).get<double>(), it->at(1).get<double>());
      n.probs = get_or<std::vector<double>>(node, "probs", {});
      n.sampling_bias = get_or<std::map<std::string, double>>(node, "sampling_bias", {});
      if (auto it = node.find("parents"); it != node.end()) {
        for (const auto& p : *it) {
          const auto& w = p.at("weight");
          ParentWeight pw = w.is_object() ? ParentWeight(w.get<std::map<std::string, double>>())
                                          : ParentWeight(w.get<double>());
          n.parents.emplace_back(p.at("parent").get<std::string>(), std::move(pw));
        }
      }
      n.intercept = get_or<double>(node, "intercept", 0.0);
      n.noise_std = get_or<double>(node, "noise_std", 0.0);
      n.cutpoints = get_or<std::vector<double>>(node, "cutpoints", {});
      if (auto it = node.find("round_digits"); it != node.end()) n.round_digits = it->get<int>();
      spec.nodes.push_back(std::move(n));
    }
    return spec;
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed synthetic spec: ") + ex.what());
  }
}

// ---------------------------------------------------------------- groups and metrics

namespace {

Json to_json(const GroupDef& g) {
  Json sel = Json::array();
  for (const auto& s : g.all_of) {
    Json x;
    x["column"] = s.column;
    if (!s.levels.empty()) x["levels"] = s.levels;
    if (s.min) x["min"] = *s.min;
    if (s.max) x["max"] = *s.max;
    sel.push_back(std::move(x));
  }
  return {{"name", g.name}, {"all_of", std::move(sel)}};
}

GroupDef group_def_from_json(const Json& j) {
  GroupDef g;
  g.name = get_or<std::string>(j, "name", "");
  for (const auto& s : require(j, "all_of", "group")) {
    Selection sel;
    sel.column = s.at("column").get<std::string>();
    sel.levels = get_or<std::vector<std::string>>(s, "levels", {});
    if (auto it = s.find("min"); it != s.end() && !it->is_null()) sel.min = it->get<double>();
    if (auto it = s.find("max"); it != s.end() && !it->is_null()) sel.max = it->get<double>();
    g.all_of.push_back(std::move(sel));
  }
  return g;
}

}  // namespace

Json to_json(const GroupSpec& groups) {
  if (groups.is_simple())
    return {{"column", groups.column()}, {"privileged", groups.privileged()}};
  return {{"a", to_json(groups.group_a())}, {"b", to_json(groups.group_b())}};
}

GroupSpec group_spec_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw SchemaError("groups must be a JSON object");
    if (j.contains("column"))
      return GroupSpec::simple(j.at("column").get<std::string>(),
                               require(j, "privileged", "groups").get<std::string>());
    return GroupSpec::custom(group_def_from_json(require(j, "a", "groups")),
                             group_def_from_json(require(j, "b", "groups")));
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed groups: ") + ex.what());
  }
}

Json to_json(const Fourfold& f) {
  Json j;
  j["a_pos"] = f.a_pos;
  j["a_neg"] = f.a_neg;
  j["b_pos"] = f.b_pos;
  j["b_neg"] = f.b_neg;
  j["a_rate"] = f.a_rate() * 100.0;
  j["b_rate"] = f.b_rate() * 100.0;
  return j;
}

Json to_json(const MetricsReport& r) {
  Json j;
  j["parity_diff"] = r.parity_diff;
  j["individual_bias"] = r.individual_bias;
  j["accuracy_diff"] = r.accuracy_diff;
  j["fnr_diff"] = r.fnr_diff;
  j["fpr_diff"] = r.fpr_diff;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  j["distortion"] = r.distortion;
  j["fourfold"] = to_json(r.fourfold);
  return j;
}

Json to_json(const Evaluation& ev) {
  Json j;
  j["original"] = to_json(ev.original);
  j["debiased"] = to_json(ev.debiased);
  j["warnings"] = ev.warnings;
  return j;
}

// ---------------------------------------------------------------- model views

Json to_json(const EditLogView& view) {
  auto edges = [](const std::vector<EdgeKey>& keys) {
    Json a = Json::array();
    for (const auto& k : keys) a.push_back({{"src", k.first}, {"dst", k.second}});
    return a;
  };
  Json j;
  j["added"] = edges(view.added);
  j["deleted"] = edges(view.deleted);
  Json rw = Json::array();
  for (const auto& r : view.reweighted)
    rw.push_back({{"src", r.edge.first}, {"dst", r.edge.second}, {"alpha", r.alpha}});
  j["reweighted"] = std::move(rw);
  j["affected"] = view.affected;
  Json edits = Json::array();
  for (const auto& e : view.edits) edits.push_back(to_json(e));
  j["edits"] = std::move(edits);
  return j;
}

Json fit_summary_json(const NodeFit& fit) {
  Json j;
  if (const auto* lin = std::get_if<LinearFit>(&fit)) {
    j["type"] = "linear";
    j["parents"] = lin->parents;
    j["intercept"] = lin->intercept;
    j["betas"] = lin->betas;
    j["residual_std"] = lin->residual_std;
    j["n"] = lin->n;
    j["k"] = lin->k;
    j["log_likelihood"] = lin->log_likelihood;
    j["ridge_fallback"] = lin->ridge_fallback;
  } else {
    const auto& lg = std::get<LogitFit>(fit);
    j["type"] = "logit";
    j["parents"] = lg.parents;
    j["classes"] = lg.classes;
    Json coef = Json::array();
    for (Eigen::Index c = 0; c < lg.coef.rows(); ++c) {
      std::vector<double> row(static_cast<std::size_t>(lg.coef.cols()));
      for (Eigen::Index k = 0; k < lg.coef.cols(); ++k) row[static_cast<std::size_t>(k)] = lg.coef(c, k);
      coef.push_back(row);
    }
    j["coef"] = std::move(coef);
    j["n"] = lg.n;
    j["k"] = lg.k;
    j["log_likelihood"] = lg.log_likelihood;
    j["iterations"] = lg.iterations;
    j["converged"] = lg.converged;
    j["separated"] = lg.separated;
  }
  j["bic"] = bic(fit);
  return j;
}

Json model_view_json(const CausalModel& model, const Dataset& data) {
  Json j;
  j["stage"] = to_string(model.stage());
  j["total_bic"] = model.total_bic();
  Json nodes = Json::array();
  for (const auto& name : model.graph().nodes()) {
    Json n;
    n["name"] = name;
    n["kind"] = to_string(data.column(name).kind());
    if (const NodeFit* f = model.fit(name)) n["fit"] = fit_summary_json(*f);
    else n["fit"] = nullptr;
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  Json edges = Json::array();
  for (const auto& d : edge_display(model)) {
    Json e;
    e["src"] = d.edge.src;
    e["dst"] = d.edge.dst;
    e["directed"] = d.edge.directed;
    e["beta"] = d.beta ? Json(*d.beta) : Json(nullptr);
    e["alpha"] = d.alpha;
    e["effective_beta"] = d.effective_beta;
    e["display_weight"] = d.beta ? std::abs(d.effective_beta) : 0.0;
    e["multi_coefficient"] = d.multi_coefficient;
    edges.push_back(std::move(e));
  }
  j["edges"] = std::move(edges);
  j["notes"] = model.graph().notes;
  return j;
}

Json model_file_json(const CausalModel& model, const CsvOptions& data_options) {
  Json j;
  j["format"] = "causaldebias-model";
  j["version"] = 1;
  j["data_options"] = to_json(data_options);
  j["base_graph"] = to_json(model.base_graph());
  Json log = Json::array();
  for (const auto& e : model.log()) log.push_back(to_json(e));
  j["edit_log"] = std::move(log);
  j["stage"] = to_string(model.stage());
  j["graph"] = to_json(model.graph());
  j["total_bic"] = model.total_bic();
  return j;
}

ModelFile model_file_from_json(const Json& j) {
  try {
    ModelFile f;
    f.data_options = csv_options_from_json(require(j, "data_options", "model file"));
    f.base = pdag_from_json(require(j, "base_graph", "model file"));
    Stage stage = Stage::Refine;
    for (const auto& e : require(j, "edit_log", "model file")) {
      f.log.push_back(edit_from_json(e, stage));
      stage = f.log.back().stage;
    }
    f.stage = stage_from_string(get_or<std::string>(j, "stage", "refine"));
    return f;
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("malformed model file: ") + ex.what());
  }
}

CausalModel replay_model_file(const ModelFile& file, const Dataset& data) {
  return CausalModel::replay(data, file.base, file.log, file.stage);
}

Json debias_metadata_json(const DebiasResult& r) {
  Json j;
  j["seed"] = r.seed;
  j["edit_log_hash"] = r.edit_log_hash;
  j["noise"] = to_string(r.noise);
  j["simulated"] = r.simulated;
  Json rescale = Json::object();
  for (const auto& [node, res] : r.rescale)
    rescale[node] = {{"iterations", res.iterations}, {"gaps", res.gaps}};
  j["rescale"] = std::move(rescale);
  j["notes"] = r.notes;
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace cdb
