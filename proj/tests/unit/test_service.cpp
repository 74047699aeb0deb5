#include <filesystem>
#include <thread>

#include "causaldebias/errors.hpp"
#include "causaldebias/service.hpp"
#include "causaldebias/synthetic.hpp"
#include "doctest.h"
#include "httplib.h"
#include "test_support.hpp"

using namespace cdb;

namespace {

HttpRequest req(std::string method, std::string path, std::string body = "",
                std::map<std::string, std::string> query = {}) {
  HttpRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.body = std::move(body);
  r.query = std::move(query);
  r.content_type = "application/json";
  return r;
}

const std::string& hiring_csv() {
  static const std::string csv = write_csv(generate_synthetic(default_hiring_spec(), 1));
  return csv;
}

std::string upload(Service& svc) {
  HttpRequest r = req("POST", "/datasets", hiring_csv(), {{"label", "job"}, {"favorable", "Y"}});
  r.content_type = "text/csv";
  const auto res = svc.handle(r);
  REQUIRE(res.status == 201);
  return res.json()["dataset_id"];
}

std::string open_session(Service& svc, const std::string& dataset) {
  const auto res = svc.handle(req("POST", "/sessions", Json{{"dataset_id", dataset}}.dump()));
  REQUIRE(res.status == 201);
  return res.json()["session_id"];
}

std::string script_text(const char* rel) { return read_file(cdbtest::source_path(rel)); }

const std::string kGroups = R"({"groups":{"column":"gender","privileged":"Male"}})";

std::string kind_of(const HttpResponse& r) { return r.json()["error"]["kind"]; }

}  // namespace

TEST_CASE("health, cors and unknown routes") {
  Service svc;
  const auto h = svc.handle(req("GET", "/health"));
  CHECK(h.status == 200);
  CHECK(h.json()["status"] == "ok");
  CHECK(h.headers.at("Access-Control-Allow-Origin") == "*");
  CHECK(h.headers.count("X-Elapsed-Ms") == 1);
  const auto opt = svc.handle(req("OPTIONS", "/sessions/s9/edits"));
  CHECK(opt.status == 204);
  CHECK(opt.headers.at("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  CHECK(svc.handle(req("GET", "/nowhere")).status == 404);
  CHECK(svc.handle(req("GET", "/")).status == 404);
  CHECK(svc.handle(req("GET", "/sessions/s1")).status == 404);
  CHECK(svc.handle(req("POST", "/health")).status == 405);

  ServiceOptions o;
  o.cors_origin = "http://localhost:5173";
  o.request_budget_ms = -1;
  Service strict(o);
  const auto s = strict.handle(req("GET", "/health"));
  CHECK(s.headers.at("Access-Control-Allow-Origin") == "http://localhost:5173");
  CHECK(s.headers.at("X-Budget-Exceeded") == "true");
}

TEST_CASE("dataset upload") {
  Service svc;
  const std::string id = upload(svc);
  const auto got = svc.handle(req("GET", "/datasets/" + id));
  CHECK(got.status == 200);
  const Json j = got.json();
  CHECK(j["rows"] == 4000);
  CHECK(j["label"] == "job");
  CHECK(j["favorable"] == "Y");
  CHECK(j["columns"].size() == 9);

  const Json body{{"csv", "x,y\n1,a\n2,b\n3,a\n"}, {"label", "y"}};
  const auto as_json = svc.handle(req("POST", "/datasets", body.dump()));
  CHECK(as_json.status == 201);
  CHECK(as_json.json()["dataset_id"] != id);

  CHECK(svc.handle(req("POST", "/datasets", Json{{"csv", "x,y\n1,a\n"}}.dump())).status == 400);
  CHECK(svc.handle(req("POST", "/datasets", "{not json")).status == 400);
  CHECK(svc.handle(req("POST", "/datasets", Json{{"csv", "x,y\n1,a\n"}, {"label", "z"}}.dump())).status == 400);
  const auto one_level = svc.handle(req("POST", "/datasets", Json{{"csv", "x,y\n1,a\n2,a\n"}, {"label", "y"}}.dump()));
  CHECK(one_level.status == 422);
  CHECK(kind_of(one_level) == "LabelArityError");
  CHECK(svc.handle(req("GET", "/datasets/d999")).status == 404);
}

TEST_CASE("session workflow") {
  Service svc;
  const std::string sid = open_session(svc, upload(svc));
  const std::string base = "/sessions/" + sid;

  SUBCASE("session and model views") {
    const Json info = svc.handle(req("GET", base)).json();
    CHECK(info["stage"] == "refine");
    CHECK(info["debias_run"].is_null());
    const Json model = svc.handle(req("GET", base + "/model")).json();
    CHECK(model["nodes"].size() == 9);
    CHECK_FALSE(model["edges"].empty());
    CHECK(svc.handle(req("GET", base + "/bogus")).status == 404);
    CHECK(svc.handle(req("POST", "/sessions", "{}")).status == 400);
    CHECK(svc.handle(req("POST", "/sessions", R"({"dataset_id":"d77"})")).status == 404);
    CHECK(svc.handle(req("POST", "/sessions", Json{{"dataset_id", "d1"}, {"p_threshold", 2}}.dump())).status ==
          400);
  }

  SUBCASE("edits, conflicts and read-your-writes") {
    const auto refine = svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_refine.json")));
    REQUIRE(refine.status == 200);
    const Json r = refine.json();
    CHECK(r["steps"].size() == 4);
    CHECK(r["total_bic"].get<double>() ==
          doctest::Approx(svc.handle(req("GET", base + "/model")).json()["total_bic"].get<double>()));

    const std::string before = svc.handle(req("GET", base + "/model")).body;
    const auto cycle = svc.handle(req("POST", base + "/edits", R"({"op":"add","src":"job","dst":"age"})"));
    CHECK(cycle.status == 409);
    CHECK(kind_of(cycle) == "CycleError");
    CHECK(svc.handle(req("GET", base + "/model")).body == before);
    const auto unknown = svc.handle(req("POST", base + "/edits", R"({"op":"add","src":"nope","dst":"age"})"));
    CHECK(unknown.status == 409);
    const auto wrong_stage =
        svc.handle(req("POST", base + "/edits", R"({"op":"delete","src":"gender","dst":"job","stage":"debias"})"));
    CHECK(wrong_stage.status == 409);
    CHECK(svc.handle(req("POST", base + "/edits", R"({"op":"fly"})")).status == 409);
    CHECK(svc.handle(req("POST", base + "/edits", "[1,")).status == 400);
    CHECK(svc.handle(req("GET", base + "/model")).body == before);

    // a script that fails midway leaves the session untouched
    const auto partial = svc.handle(req("POST", base + "/edits",
                                        R"([{"op":"delete","src":"gender","dst":"major"},
                                            {"op":"add","src":"job","dst":"age"}])"));
    CHECK(partial.status == 409);
    CHECK(svc.handle(req("GET", base + "/model")).body == before);

    const Json logs = svc.handle(req("GET", base + "/logs")).json();
    CHECK(logs["edits"].size() == 4);
    const Json script = svc.handle(req("GET", base + "/script")).json();
    CHECK(script["edits"].size() == 4);
    CHECK(edit_script_from_json(script).size() == 4);
  }

  SUBCASE("stage switch") {
    CHECK(svc.handle(req("POST", base + "/stage", R"({"stage":"debias"})")).json()["stage"] == "debias");
    CHECK(svc.handle(req("POST", base + "/stage", R"({"stage":"nowhere"})")).status == 400);
    CHECK(svc.handle(req("POST", base + "/stage", "{}")).status == 400);
    CHECK(svc.handle(req("GET", base)).json()["stage"] == "debias");
  }

  SUBCASE("paths and distributions") {
    svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_refine.json")));
    const Json p = svc.handle(req("GET", base + "/paths", "", {{"source", "gender"}, {"target", "job"}})).json();
    CHECK_FALSE(p["paths"].empty());
    for (const auto& path : p["paths"]) {
      CHECK(path.front() == "gender");
      CHECK(path.back() == "job");
    }
    CHECK(svc.handle(req("GET", base + "/paths", "", {{"source", "gender"}})).status == 400);
    CHECK(svc.handle(req("GET", base + "/paths", "", {{"source", "x"}, {"target", "job"}})).status == 400);

    const Json node = svc.handle(req("GET", base + "/distributions", "", {{"node", "age"}, {"bins", "5"}})).json();
    CHECK(node["chart"] == "histogram");
    CHECK(node["bin_edges"].size() == 6);
    CHECK(node["debiased"].is_null());
    const Json edge = svc.handle(req("GET", base + "/distributions", "", {{"edge", "gender,job"}})).json();
    CHECK(edge["chart"] == "grouped_bar");
    CHECK(svc.handle(req("GET", base + "/distributions", "", {{"edge", "gender"}})).status == 400);
    CHECK(svc.handle(req("GET", base + "/distributions", "", {{"node", "age"}, {"bins", "x"}})).status == 400);
    CHECK(svc.handle(req("GET", base + "/distributions", "", {{"node", "nope"}})).status == 400);
    CHECK(svc.handle(req("GET", base + "/distributions")).status == 400);
  }

  SUBCASE("debias, evaluate and export") {
    CHECK(svc.handle(req("POST", base + "/evaluate", kGroups)).status == 409);
    CHECK(svc.handle(req("GET", base + "/debiased.csv")).status == 409);

    const auto identity = svc.handle(req("POST", base + "/debias", R"({"seed":1})"));
    REQUIRE(identity.status == 200);
    CHECK(identity.json()["simulated"].empty());
    CHECK(svc.handle(req("GET", base + "/debiased.csv")).body == hiring_csv());

    svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_refine.json")));
    CHECK(svc.handle(req("GET", base)).json()["debias_run"].is_null());
    svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_debias.json")));
    const auto run = svc.handle(req("POST", base + "/debias", R"({"seed":1})"));
    REQUIRE(run.status == 200);
    const Json meta = run.json();
    CHECK(meta["simulated"].size() >= 2);
    CHECK(svc.handle(req("POST", base + "/debias", R"({"seed":1})")).json()["run_id"] == meta["run_id"]);
    CHECK(svc.handle(req("POST", base + "/debias", R"({"noise":"sideways"})")).status == 400);

    const auto csv = svc.handle(req("GET", base + "/debiased.csv"));
    CHECK(csv.content_type == "text/csv");
    CHECK(csv.body != hiring_csv());
    const Json dist = svc.handle(req("GET", base + "/distributions", "", {{"node", "job"}})).json();
    CHECK(dist["debiased"].is_object());

    const auto ev = svc.handle(req("POST", base + "/evaluate", kGroups));
    REQUIRE(ev.status == 200);
    CHECK(svc.handle(req("POST", base + "/evaluate", kGroups)).body == ev.body);
    const Json e = ev.json();
    CHECK(e["original"]["parity_diff"].get<double>() > e["debiased"]["parity_diff"].get<double>());
    CHECK(svc.handle(req("POST", base + "/evaluate", "{}")).status == 400);
    CHECK(svc.handle(req("POST", base + "/evaluate", R"({"groups":{"column":"gender"}})")).status == 400);
    const auto bad_clf = svc.handle(req("POST", base + "/evaluate",
                                        R"({"groups":{"column":"gender","privileged":"Male"},"classifier":"svm"})"));
    CHECK(bad_clf.status == 422);
    const auto empty = svc.handle(req("POST", base + "/evaluate", R"({"groups":{"column":"gender","privileged":"Robot"}})"));
    CHECK(empty.status == 400);
    CHECK(kind_of(empty) == "SchemaError");
    const auto none = svc.handle(req("POST", base + "/evaluate", R"({"groups":{
        "a":{"name":"old","all_of":[{"column":"age","min":1000}]},
        "b":{"name":"rest","all_of":[{"column":"age","max":999}]}}})"));
    CHECK(none.status == 422);
    CHECK(kind_of(none) == "EmptyGroupError");
  }

  SUBCASE("delete") {
    CHECK(svc.handle(req("DELETE", base)).json()["deleted"] == true);
    CHECK(svc.handle(req("GET", base)).status == 404);
  }
}

TEST_CASE("hiring scenario through the service") {
  Service svc;
  const std::string base = "/sessions/" + open_session(svc, upload(svc));
  auto parity = [&](const Json& j, const char* which) { return j[which]["parity_diff"].get<double>(); };

  REQUIRE(svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_refine.json"))).status == 200);
  svc.handle(req("POST", base + "/stage", R"({"stage":"debias"})"));
  svc.handle(req("POST", base + "/edits", R"({"op":"delete","src":"gender","dst":"job"})"));
  svc.handle(req("POST", base + "/debias", R"({"seed":1})"));
  const Json one = svc.handle(req("POST", base + "/evaluate", kGroups)).json();
  CHECK(std::abs(parity(one, "original") - 11) <= 2);
  CHECK(std::abs(parity(one, "debiased") - 6) <= 3);

  svc.handle(req("POST", base + "/edits", R"({"op":"delete","src":"gender","dst":"major"})"));
  svc.handle(req("POST", base + "/debias", R"({"seed":1})"));
  const Json two = svc.handle(req("POST", base + "/evaluate", kGroups)).json();
  CHECK(parity(two, "debiased") <= 3);
  CHECK(std::abs(two["debiased"]["distortion"].get<double>() - 0.06) <= 0.03);
}

TEST_CASE("snapshots restore sessions") {
  const auto dir = std::filesystem::temp_directory_path() / "cdb_service_snapshots";
  std::filesystem::remove_all(dir);
  ServiceOptions o;
  o.snapshot_dir = dir.string();
  std::string base, model, csv, snap;
  {
    Service svc(o);
    base = "/sessions/" + open_session(svc, upload(svc));
    svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_refine.json")));
    svc.handle(req("POST", base + "/edits", script_text("data/edits/hiring_debias.json")));
    svc.handle(req("POST", base + "/debias", R"({"seed":5})"));
    model = svc.handle(req("GET", base + "/model")).body;
    csv = svc.handle(req("GET", base + "/debiased.csv")).body;
    snap = svc.handle(req("GET", base + "/snapshot")).body;
  }
  {
    Service svc(o);
    CHECK(svc.load_snapshots() == 1);
    CHECK(svc.handle(req("GET", base + "/model")).body == model);
    CHECK(svc.handle(req("GET", base + "/debiased.csv")).body == csv);
  }
  {
    Service svc;
    const auto restored = svc.handle(req("POST", "/sessions", Json{{"snapshot", Json::parse(snap)}}.dump()));
    REQUIRE(restored.status == 201);
    const std::string b2 = "/sessions/" + restored.json()["session_id"].get<std::string>();
    CHECK(svc.handle(req("GET", b2 + "/model")).body == model);
    CHECK(svc.handle(req("GET", b2 + "/debiased.csv")).body == csv);
    CHECK(svc.handle(req("POST", "/sessions", R"({"snapshot":{"format":"other"}})")).status == 400);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent edits on one session are serialized") {
  Service svc;
  const std::string base = "/sessions/" + open_session(svc, upload(svc));
  svc.handle(req("POST", base + "/stage", R"({"stage":"debias"})"));
  const auto model = svc.handle(req("GET", base + "/model")).json();
  std::vector<std::pair<std::string, std::string>> directed;
  for (const auto& e : model["edges"])
    if (e["directed"].get<bool>()) directed.emplace_back(e["src"], e["dst"]);
  REQUIRE_FALSE(directed.empty());

  const int per_thread = 10;
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < per_thread; ++i) {
        const auto& [a, b] = directed[static_cast<std::size_t>(t + i) % directed.size()];
        const Json edit{{"op", "reweight"}, {"src", a}, {"dst", b}, {"weight_percent", (t + 1) * 5}};
        ok += svc.handle(req("POST", base + "/edits", edit.dump())).status == 200;
        svc.handle(req("GET", base + "/model"));
      }
    });
  for (auto& th : threads) th.join();
  CHECK(ok == 4 * per_thread);
  CHECK(svc.handle(req("GET", base + "/logs")).json()["edits"].size() == 4 * per_thread);
}

TEST_CASE("http server") {
  Service svc;
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto up = client.Post("/datasets?label=job&favorable=Y", hiring_csv(), "text/csv");
  REQUIRE(up);
  CHECK(up->status == 201);
  const std::string id = Json::parse(up->body)["dataset_id"];
  auto direct = svc.handle(req("GET", "/datasets/" + id));
  auto via_http = client.Get("/datasets/" + id);
  REQUIRE(via_http);
  CHECK(via_http->body == direct.body);
  auto missing = client.Get("/sessions/s404/model");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  th.join();
}
