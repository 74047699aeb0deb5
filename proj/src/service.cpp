#include "causaldebias/service.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <sstream>

#include "causaldebias/errors.hpp"
#include "causaldebias/summary.hpp"
#include "httplib.h"

namespace cdb {
namespace {

namespace fs = std::filesystem;

enum class Context { General, Edits, Metrics };

int status_for(const std::string& kind, Context ctx) {
  if (kind == "NotFound") return 404;
  if (kind == "MethodNotAllowed") return 405;
  if (kind == "Conflict" || kind == "EditError" || kind == "CycleError") return 409;
  if (kind == "SchemaError") return ctx == Context::Edits ? 409 : 400;
  if (kind == "BadRequest" || kind == "IngestError") return 400;
  if (kind == "ParameterError") return ctx == Context::Metrics ? 422 : 400;
  if (kind == "EmptyGroupError" || kind == "ConstantLabelError" ||
      kind == "InsufficientDataError" || kind == "DegenerateColumnError" ||
      kind == "LabelArityError")
    return 422;
  return 500;
}

HttpResponse json_response(const Json& j, int status = 200) {
  HttpResponse r;
  r.status = status;
  r.body = dump(j);
  return r;
}

HttpResponse error_response(const std::string& kind, const std::string& message, Context ctx) {
  return json_response({{"error", {{"kind", kind}, {"message", message}}}}, status_for(kind, ctx));
}

[[noreturn]] void not_found(const std::string& what) { throw Error("NotFound", what); }
[[noreturn]] void bad_request(const std::string& what) { throw Error("BadRequest", what); }

Json body_json(const HttpRequest& req) {
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object() && !j.is_array()) bad_request("body must be a JSON object");
    return j;
  } catch (const Json::parse_error& ex) {
    bad_request(std::string("malformed JSON body: ") + ex.what());
  }
}

template <class T>
T field_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object()) return fallback;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '/'))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json dataset_summary(const std::string& id, const Table& t) {
  Json cols = Json::array();
  for (const auto& c : t.data.columns()) {
    Json col{{"name", c.name()}, {"kind", to_string(c.kind())}};
    if (c.schema().categorical()) {
      col["levels"] = c.schema().levels;
    } else {
      col["min"] = c.schema().min;
      col["max"] = c.schema().max;
    }
    cols.push_back(std::move(col));
  }
  return {{"dataset_id", id},
          {"rows", t.data.rows()},
          {"dropped_rows", t.data.dropped_rows()},
          {"label", t.data.label()},
          {"favorable", t.data.favorable_level()},
          {"columns", std::move(cols)}};
}

void require_method(const HttpRequest& req, const char* method) {
  if (req.method != method)
    throw Error("MethodNotAllowed", req.method + " not allowed on " + req.path);
}

}  // namespace

struct Service::DebiasRun {
  std::string run_id;
  std::uint64_t seed = 0;
  NoiseMode noise = NoiseMode::PerTerm;
  std::string csv;
  Dataset data;
  Json meta;
};

struct Service::Session {
  std::string id;
  std::string dataset_id;
  std::string created_at;
  std::shared_ptr<const Table> table;
  PcOptions pc;
  CausalModel model;
  std::optional<DebiasRun> debiased;
  std::map<std::string, std::string> eval_cache;
  std::size_t runs = 0;
  std::mutex mu;

  void invalidate() {
    debiased.reset();
    eval_cache.clear();
  }
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {}
Service::~Service() = default;

HttpResponse Service::handle(const HttpRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  HttpResponse res;
  const Context ctx = request.path.ends_with("/evaluate") ? Context::Metrics
                      : request.path.ends_with("/edits")  ? Context::Edits
                                                          : Context::General;
  try {
    res = route(request);
  } catch (const Error& ex) {
    res = error_response(ex.kind(), ex.what(), ctx);
  } catch (const Json::exception& ex) {
    res = error_response("BadRequest", ex.what(), ctx);
  } catch (const std::exception& ex) {
    res = error_response("InternalError", ex.what(), ctx);
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  res.headers["Access-Control-Allow-Origin"] = options_.cors_origin;
  res.headers["Access-Control-Allow-Methods"] = "GET, POST, DELETE, OPTIONS";
  res.headers["Access-Control-Allow-Headers"] = "Content-Type";
  std::ostringstream elapsed;
  elapsed.precision(3);
  elapsed << std::fixed << ms;
  res.headers["X-Elapsed-Ms"] = elapsed.str();
  if (ms > options_.request_budget_ms) res.headers["X-Budget-Exceeded"] = "true";
  return res;
}

HttpResponse Service::route(const HttpRequest& req) {
  if (req.method == "OPTIONS") {
    HttpResponse r;
    r.status = 204;
    r.content_type = "text/plain";
    return r;
  }
  const auto parts = split_path(req.path);
  if (parts.empty()) not_found("no route for " + req.path);

  if (parts[0] == "health" && parts.size() == 1) {
    require_method(req, "GET");
    return json_response({{"status", "ok"}});
  }
  if (parts[0] == "datasets") {
    if (parts.size() == 1) {
      require_method(req, "POST");
      return post_dataset(req);
    }
    if (parts.size() == 2) {
      require_method(req, "GET");
      return get_dataset(parts[1]);
    }
  }
  if (parts[0] == "sessions") {
    if (parts.size() == 1) {
      require_method(req, "POST");
      return post_session(req);
    }
    auto session = find_session(parts[1]);
    if (parts.size() == 2 && req.method == "DELETE") {
      std::lock_guard lock(mu_);
      sessions_.erase(parts[1]);
      if (!options_.snapshot_dir.empty())
        fs::remove(fs::path(options_.snapshot_dir) / (parts[1] + ".json"));
      return json_response({{"session_id", parts[1]}, {"deleted", true}});
    }
    if (parts.size() <= 3) {
      std::lock_guard lock(session->mu);
      return session_request(*session, parts.size() == 3 ? parts[2] : "", req);
    }
  }
  not_found("no route for " + req.path);
}

HttpResponse Service::post_dataset(const HttpRequest& req) {
  CsvOptions options;
  std::string csv;
  if (req.content_type.find("json") != std::string::npos) {
    const Json j = body_json(req);
    if (!j.is_object() || !j.contains("csv")) bad_request("JSON upload needs a 'csv' field");
    csv = field_or<std::string>(j, "csv", "");
    options = csv_options_from_json(j);
  } else {
    auto q = [&](const char* key) {
      auto it = req.query.find(key);
      return it == req.query.end() ? std::string() : it->second;
    };
    options.label = q("label");
    options.nominal = split_list(q("nominal"));
    options.ordinal = split_list(q("ordinal"));
    if (!q("favorable").empty()) options.favorable = q("favorable");
    csv = req.body;
  }
  if (options.label.empty()) bad_request("dataset upload needs a label");
  auto table = std::make_shared<const Table>(load_table(std::move(csv), options));
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = "d" + std::to_string(next_dataset_++);
    datasets_[id] = table;
  }
  return json_response(dataset_summary(id, *table), 201);
}

HttpResponse Service::get_dataset(const std::string& id) {
  return json_response(dataset_summary(id, *find_dataset(id)));
}

HttpResponse Service::post_session(const HttpRequest& req) {
  const Json j = body_json(req);
  std::shared_ptr<Session> s;
  if (j.is_object() && j.contains("snapshot")) {
    s = restore(j.at("snapshot"), std::nullopt);
  } else {
    const std::string dataset_id = field_or<std::string>(j, "dataset_id", "");
    if (dataset_id.empty()) bad_request("session needs a dataset_id");
    auto table = find_dataset(dataset_id);
    s = std::make_shared<Session>();
    s->dataset_id = dataset_id;
    s->table = table;
    s->pc.p_threshold = field_or<double>(j, "p_threshold", 0.01);
    s->pc.exclude_label = field_or<bool>(j, "exclude_label", false);
    s->pc.max_depth = field_or<int>(j, "max_depth", s->pc.max_depth);
    if (!(s->pc.p_threshold > 0.0 && s->pc.p_threshold < 1.0))
      throw ParameterError("p_threshold must lie in (0, 1)");
    s->model = discover_model(table->data, s->pc);
    s->created_at = utc_now();
    std::lock_guard lock(mu_);
    s->id = "s" + std::to_string(next_session_++);
    sessions_[s->id] = s;
  }
  std::lock_guard lock(s->mu);
  persist(*s);
  Json out{{"session_id", s->id},
           {"dataset_id", s->dataset_id},
           {"stage", to_string(s->model.stage())},
           {"graph", to_json(s->model.graph())},
           {"model", model_view_json(s->model, s->table->data)}};
  return json_response(out, 201);
}

HttpResponse Service::session_request(Session& s, const std::string& action,
                                      const HttpRequest& req) {
  const Dataset& data = s.table->data;

  if (action.empty()) {
    require_method(req, "GET");
    return json_response({{"session_id", s.id},
                          {"dataset_id", s.dataset_id},
                          {"created_at", s.created_at},
                          {"stage", to_string(s.model.stage())},
                          {"p_threshold", s.pc.p_threshold},
                          {"exclude_label", s.pc.exclude_label},
                          {"debias_run", s.debiased ? Json(s.debiased->run_id) : Json(nullptr)},
                          {"edit_log_hash", edit_log_hash(s.model)}});
  }

  if (action == "model") {
    require_method(req, "GET");
    return json_response(model_view_json(s.model, data));
  }

  if (action == "stage") {
    require_method(req, "POST");
    const Json j = body_json(req);
    const std::string text = field_or<std::string>(j, "stage", "");
    if (text.empty()) bad_request("body needs a 'stage'");
    Stage target;
    try {
      target = stage_from_string(text);
    } catch (const Error& ex) {
      bad_request(ex.what());
    }
    std::vector<std::string> warnings;
    if (target != s.model.stage()) {
      warnings = s.model.apply(data, Edit{EditOp::SetStage, "", "", 0, target}).warnings;
      s.invalidate();
      persist(s);
    }
    return json_response({{"stage", to_string(s.model.stage())}, {"warnings", warnings}});
  }

  if (action == "edits") {
    require_method(req, "POST");
    const Json j = body_json(req);
    std::vector<Edit> script;
    const bool single = j.is_object() && !j.contains("edits");
    if (single) {
      Edit e = edit_from_json(j, s.model.stage());
      if (e.op != EditOp::SetStage && e.stage != s.model.stage())
        throw EditError("edit is tagged '" + std::string(to_string(e.stage)) +
                        "' but the session is in the " + std::string(to_string(s.model.stage())) +
                        " stage");
      script.push_back(std::move(e));
    } else {
      script = edit_script_from_json(j);
    }
    CausalModel next = s.model;
    const double before = next.total_bic();
    const auto steps = apply_script(next, data, script);
    s.model = std::move(next);
    s.invalidate();
    persist(s);
    Json jsteps = Json::array();
    std::vector<std::string> warnings;
    for (const auto& st : steps) {
      jsteps.push_back({{"edit", to_json(st.edit)},
                        {"bic_delta", st.outcome.bic_delta},
                        {"refit", st.outcome.refit},
                        {"warnings", st.outcome.warnings},
                        {"total_bic", st.total_bic}});
      warnings.insert(warnings.end(), st.outcome.warnings.begin(), st.outcome.warnings.end());
    }
    const double bic_delta = single && !steps.empty() ? steps.back().outcome.bic_delta
                                                      : s.model.total_bic() - before;
    return json_response({{"bic_delta", bic_delta},
                          {"total_bic", s.model.total_bic()},
                          {"stage", to_string(s.model.stage())},
                          {"warnings", warnings},
                          {"steps", jsteps},
                          {"graph", model_view_json(s.model, data)}});
  }

  if (action == "paths") {
    require_method(req, "GET");
    auto src = req.query.find("source");
    auto dst = req.query.find("target");
    if (src == req.query.end() || dst == req.query.end())
      bad_request("paths needs 'source' and 'target'");
    if (!s.model.graph().index_of(src->second)) bad_request("unknown node '" + src->second + "'");
    if (!s.model.graph().index_of(dst->second)) bad_request("unknown node '" + dst->second + "'");
    return json_response({{"source", src->second},
                          {"target", dst->second},
                          {"paths", find_paths(s.model, src->second, dst->second)}});
  }

  if (action == "distributions") {
    require_method(req, "GET");
    const Dataset* deb = s.debiased ? &s.debiased->data : nullptr;
    Json out;
    if (auto it = req.query.find("node"); it != req.query.end()) {
      std::size_t bins = 20;
      if (auto b = req.query.find("bins"); b != req.query.end()) {
        try {
          bins = std::stoul(b->second);
        } catch (const std::exception&) {
          bad_request("bins must be a positive integer");
        }
      }
      out = node_distribution(data, deb, it->second, bins);
    } else if (auto e = req.query.find("edge"); e != req.query.end()) {
      const auto ends = split_list(e->second);
      if (ends.size() != 2) bad_request("edge must be 'A,B'");
      out = edge_distribution(data, deb, ends[0], ends[1]);
    } else {
      bad_request("distributions needs 'node' or 'edge'");
    }
    out["debias_run"] = s.debiased ? Json(s.debiased->run_id) : Json(nullptr);
    return json_response(out);
  }

  if (action == "debias") {
    require_method(req, "POST");
    const Json j = body_json(req);
    DebiasOptions opts;
    const std::uint64_t seed = field_or<std::uint64_t>(j, "seed", default_seed());
    try {
      opts.noise = noise_mode_from_string(field_or<std::string>(j, "noise", "per-term"));
    } catch (const Error& ex) {
      bad_request(ex.what());
    }
    if (!(s.debiased && s.debiased->seed == seed && s.debiased->noise == opts.noise)) {
      DebiasResult result = generate_debiased(s.model, data, seed, opts);
      DebiasRun run;
      run.run_id = "r" + std::to_string(++s.runs);
      run.seed = seed;
      run.noise = opts.noise;
      run.csv = debiased_csv(result, s.table->bytes);
      run.data = load_csv_like(run.csv, data);
      run.meta = debias_metadata_json(result);
      s.invalidate();
      s.debiased = std::move(run);
      persist(s);
    }
    Json out{{"run_id", s.debiased->run_id}, {"rows", s.debiased->data.rows()}};
    for (const auto& [k, v] : s.debiased->meta.items()) out[k] = v;
    return json_response(out);
  }

  if (action == "evaluate") {
    require_method(req, "POST");
    const Json j = body_json(req);
    if (!j.is_object() || !j.contains("groups")) bad_request("evaluate needs 'groups'");
    GroupSpec groups = [&] {
      try {
        return group_spec_from_json(j.at("groups"));
      } catch (const Error& ex) {
        bad_request(ex.what());
      }
    }();
    if (!s.debiased) throw Error("Conflict", "no debiased dataset yet; POST /debias first");
    EvaluateOptions opts;
    opts.classifier = field_or<std::string>(j, "classifier", "logistic");
    opts.k = field_or<std::size_t>(j, "k", 10);
    opts.seed = field_or<std::uint64_t>(j, "seed", default_seed());
    const std::string key = dump(Json{{"log", edit_log_hash(s.model)},
                                      {"run", s.debiased->run_id},
                                      {"groups", to_json(groups)},
                                      {"classifier", opts.classifier},
                                      {"k", opts.k},
                                      {"seed", opts.seed}});
    auto hit = s.eval_cache.find(key);
    if (hit == s.eval_cache.end()) {
      const Evaluation ev = evaluate(data, s.debiased->data, groups, opts);
      hit = s.eval_cache.emplace(key, dump(to_json(ev))).first;
    }
    HttpResponse r;
    r.body = hit->second;
    return r;
  }

  if (action == "debiased.csv") {
    require_method(req, "GET");
    if (!s.debiased) throw Error("Conflict", "no debiased dataset yet; POST /debias first");
    HttpResponse r;
    r.content_type = "text/csv";
    r.body = s.debiased->csv;
    r.headers["Content-Disposition"] = "attachment; filename=\"debiased.csv\"";
    return r;
  }

  if (action == "logs") {
    require_method(req, "GET");
    return json_response(to_json(edit_log_view(s.model)));
  }

  if (action == "script") {
    require_method(req, "GET");
    Json edits = Json::array();
    for (const auto& e : s.model.log()) edits.push_back(to_json(e));
    return json_response({{"version", 1}, {"edits", edits}});
  }

  if (action == "snapshot") {
    require_method(req, "GET");
    return json_response(snapshot(s));
  }

  not_found("no route for " + req.path);
}

std::shared_ptr<const Table> Service::find_dataset(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = datasets_.find(id);
  if (it == datasets_.end()) not_found("unknown dataset '" + id + "'");
  return it->second;
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) not_found("unknown session '" + id + "'");
  return it->second;
}

Json Service::snapshot(const Session& s) const {
  Json j;
  j["format"] = "causaldebias-session";
  j["version"] = 1;
  j["session_id"] = s.id;
  j["dataset_id"] = s.dataset_id;
  j["created_at"] = s.created_at;
  j["dataset"] = {{"csv", s.table->bytes}, {"options", to_json(s.table->options)}};
  j["pc"] = {{"p_threshold", s.pc.p_threshold},
             {"exclude_label", s.pc.exclude_label},
             {"max_depth", s.pc.max_depth}};
  j["model"] = model_file_json(s.model, s.table->options);
  j["debias"] = s.debiased ? Json{{"seed", s.debiased->seed}, {"noise", to_string(s.debiased->noise)}}
                           : Json(nullptr);
  return j;
}

void Service::persist(const Session& s) const {
  if (options_.snapshot_dir.empty()) return;
  fs::create_directories(options_.snapshot_dir);
  const fs::path final_path = fs::path(options_.snapshot_dir) / (s.id + ".json");
  const fs::path tmp = final_path.string() + ".tmp";
  write_file(tmp.string(), dump(snapshot(s)));
  fs::rename(tmp, final_path);
}

std::shared_ptr<Service::Session> Service::restore(const Json& snap, std::optional<std::string> id) {
  if (!snap.is_object() || snap.value("format", "") != "causaldebias-session")
    bad_request("not a session snapshot");
  const Json& ds = snap.at("dataset");
  const CsvOptions options = csv_options_from_json(ds.at("options"));
  auto table = std::make_shared<const Table>(load_table(ds.at("csv").get<std::string>(), options));

  auto s = std::make_shared<Session>();
  s->table = table;
  const Json& pc = snap.at("pc");
  s->pc.p_threshold = pc.value("p_threshold", 0.01);
  s->pc.exclude_label = pc.value("exclude_label", false);
  s->pc.max_depth = pc.value("max_depth", s->pc.max_depth);
  s->model = replay_model_file(model_file_from_json(snap.at("model")), table->data);
  s->created_at = snap.value("created_at", utc_now());
  if (const Json& d = snap.at("debias"); !d.is_null()) {
    DebiasOptions opts;
    opts.noise = noise_mode_from_string(d.value("noise", "per-term"));
    const std::uint64_t seed = d.at("seed").get<std::uint64_t>();
    DebiasResult result = generate_debiased(s->model, table->data, seed, opts);
    DebiasRun run;
    run.run_id = "r" + std::to_string(++s->runs);
    run.seed = seed;
    run.noise = opts.noise;
    run.csv = debiased_csv(result, table->bytes);
    run.data = load_csv_like(run.csv, table->data);
    run.meta = debias_metadata_json(result);
    s->debiased = std::move(run);
  }

  std::lock_guard lock(mu_);
  const std::string dataset_id = snap.value("dataset_id", "");
  if (!dataset_id.empty() && !datasets_.count(dataset_id)) {
    s->dataset_id = dataset_id;
    datasets_[dataset_id] = table;
  } else {
    s->dataset_id = "d" + std::to_string(next_dataset_++);
    datasets_[s->dataset_id] = table;
  }
  if (id && !sessions_.count(*id)) {
    s->id = *id;
    if (id->size() > 1 && (*id)[0] == 's') {
      try {
        next_session_ = std::max(next_session_, std::stoul(id->substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  } else {
    s->id = "s" + std::to_string(next_session_++);
  }
  sessions_[s->id] = s;
  return s;
}

std::size_t Service::load_snapshots() {
  if (options_.snapshot_dir.empty() || !fs::exists(options_.snapshot_dir)) return 0;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(options_.snapshot_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::size_t n = 0;
  for (const auto& f : files) {
    const Json snap = Json::parse(read_file(f.string()));
    restore(snap, snap.value("session_id", f.stem().string()));
    ++n;
  }
  return n;
}

// ---------------------------------------------------------------- HTTP binding

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    r.body = req.body;
    r.content_type = req.get_header_value("Content-Type");
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const HttpResponse out = impl_->service.handle(r);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Delete(".*", handler);
  impl_->server.Options(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace cdb
