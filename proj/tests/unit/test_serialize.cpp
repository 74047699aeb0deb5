#include <fstream>
#include <sstream>

#include "causaldebias/errors.hpp"
#include "causaldebias/serialize.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdb;

namespace {

Json read_json(const std::string& rel) {
  std::ifstream in(cdbtest::source_path(rel));
  std::stringstream buf;
  buf << in.rdbuf();
  return Json::parse(buf.str());
}

const Dataset& hiring() {
  static const Dataset d = generate_synthetic(default_hiring_spec(), 1);
  return d;
}

}  // namespace

TEST_CASE("graph json round trip keeps edges and sepsets") {
  cdbtest::Gen gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    Pdag g = cdbtest::random_dag(gen, static_cast<std::size_t>(gen.integer(2, 8)), 0.4);
    if (g.size() >= 3) {
      if (!g.adjacent(0, 2)) g.add_undirected(0, 2);
      g.sepsets[{"n0", "n1"}] = {"n2"};
    }
    g.notes.push_back("note");
    const Json j = to_json(g);
    const Pdag back = pdag_from_json(j);
    CHECK(back.same_structure(g));
    CHECK(dump(to_json(back)) == dump(j));
  }
  CHECK_THROWS_AS(pdag_from_json(Json::array()), SchemaError);
  CHECK_THROWS_AS(pdag_from_json(Json::parse(R"({"nodes":["a","b"],"edges":[{"src":"a","dst":"c"}]})")), EditError);
  CHECK_THROWS_AS(
      pdag_from_json(Json::parse(
          R"({"nodes":["a","b"],"edges":[{"src":"a","dst":"b"},{"src":"b","dst":"a"}]})")),
      Error);
}

TEST_CASE("edit json") {
  const Edit e = edit_from_json(Json::parse(R"({"op":"add","src":"a","dst":"b"})"), Stage::Refine);
  CHECK(e == Edit{EditOp::Add, "a", "b", 0, Stage::Refine});
  const Edit del = edit_from_json(Json::parse(R"({"op":"delete","src":"a","dst":"b"})"), Stage::Debias);
  CHECK(del.stage == Stage::Debias);
  CHECK(del.weight_percent == -100);
  const Edit rw = edit_from_json(Json::parse(R"({"op":"reweight","src":"a","dst":"b","weight_percent":-40,"stage":"debias"})"),
                                 Stage::Refine);
  CHECK(rw.weight_percent == -40);
  CHECK(edit_from_json(to_json(rw), Stage::Refine) == rw);
  CHECK_THROWS_AS(edit_from_json(Json::parse(R"({"op":"reweight","src":"a","dst":"b"})"), Stage::Debias), EditError);
  CHECK_THROWS_AS(edit_from_json(Json::parse(R"({"op":"teleport","src":"a","dst":"b"})"), Stage::Refine), EditError);
  CHECK_THROWS_AS(edit_from_json(Json::parse(R"({"op":"add","src":"a"})"), Stage::Refine), EditError);
  CHECK_THROWS_AS(edit_from_json(Json::parse(R"({"op":"reweight","src":"a","dst":"b","weight_percent":2.5})"),
                                 Stage::Debias),
                  EditError);
  CHECK_THROWS_AS(edit_from_json(Json::parse(R"({"op":"add","src":"a","dst":"b","stage":"later"})"), Stage::Refine),
                  EditError);
  CHECK_THROWS_AS(edit_from_json(Json::array(), Stage::Refine), EditError);
}

TEST_CASE("edit scripts carry their stage forward") {
  const auto script = edit_script_from_json(read_json("data/edits/hiring_debias.json"));
  REQUIRE(script.size() == 3);
  CHECK(script[0].op == EditOp::SetStage);
  CHECK(script[1].stage == Stage::Debias);
  CHECK(script[2].stage == Stage::Debias);
  const auto refine = edit_script_from_json(read_json("data/edits/hiring_refine.json"));
  REQUIRE(refine.size() == 4);
  for (const auto& e : refine) CHECK(e.stage == Stage::Refine);
  CHECK(edit_script_from_json(Json::array()).empty());
  CHECK_THROWS_AS(edit_script_from_json(Json::object()), EditError);
  CHECK_THROWS_AS(edit_script_from_json(Json("x")), EditError);
}

TEST_CASE("csv options and group specs round trip") {
  CsvOptions o;
  o.label = "job";
  o.nominal = {"a", "b"};
  o.ordinal = {"c"};
  o.favorable = "Y";
  o.seed = 9;
  const CsvOptions back = csv_options_from_json(to_json(o));
  CHECK(back.label == o.label);
  CHECK(back.nominal == o.nominal);
  CHECK(back.ordinal == o.ordinal);
  CHECK(back.favorable == o.favorable);
  CHECK(back.seed == o.seed);
  const auto g = group_spec_from_json(Json::parse(R"({"column":"gender","privileged":"Male"})"));
  CHECK(g.is_simple());
  CHECK(g.privileged() == "Male");
  CHECK_THROWS_AS(group_spec_from_json(Json::parse(R"({"column":"gender"})")), SchemaError);
  CHECK_THROWS_AS(group_spec_from_json(Json::parse(R"({"a":{"all_of":[{"column":1}]},"b":{}})")), SchemaError);
}

TEST_CASE("model file replays to the same model") {
  const Dataset& d = hiring();
  Pdag g = cdbtest::hiring_truth(d);
  g.remove(g.require("age"), g.require("work_experience"));
  g.add_undirected(g.require("age"), g.require("work_experience"));
  CausalModel m = build_model(d, g);
  m.apply(d, Edit{EditOp::Direct, "age", "work_experience", 0, Stage::Refine});
  m.set_stage(Stage::Debias);
  m.apply(d, Edit{EditOp::Reweight, "gender", "job", -60, Stage::Debias});
  CsvOptions o;
  o.label = "job";
  const Json j = model_file_json(m, o);
  CHECK(j["format"] == "causaldebias-model");
  const ModelFile f = model_file_from_json(Json::parse(dump(j)));
  CHECK(f.stage == Stage::Debias);
  CHECK(f.log == m.log());
  const CausalModel again = replay_model_file(f, d);
  CHECK(dump(model_file_json(again, o)) == dump(j));
  CHECK(dump(model_view_json(again, d)) == dump(model_view_json(m, d)));
  CHECK_THROWS_AS(model_file_from_json(Json::object()), SchemaError);
}

TEST_CASE("model view lists fits and weights") {
  const Dataset& d = hiring();
  CausalModel m = build_model(d, cdbtest::hiring_truth(d));
  const Json v = model_view_json(m, d);
  CHECK(v["stage"] == "refine");
  CHECK(v["nodes"].size() == d.cols());
  CHECK(v["edges"].size() == 8);
  for (const auto& n : v["nodes"])
    if (n["name"] == "gender") CHECK(n["fit"].is_null());
    else if (n["name"] == "job") CHECK(n["fit"].is_object());
  for (const auto& e : v["edges"]) {
    CHECK(e["alpha"] == 1.0);
    CHECK(e["display_weight"].get<double>() >= 0.0);
  }
  CHECK(v["total_bic"].get<double>() == doctest::Approx(m.total_bic()));
}

TEST_CASE("report and metadata json") {
  MetricsReport r;
  r.parity_diff = 10.5;
  r.fourfold = Fourfold{1, 2, 3, 4};
  const Json j = to_json(r);
  CHECK(j["parity_diff"].is_number());
  CHECK(j["fourfold"]["a_pos"] == 1);
  CHECK(j["fourfold"]["a_rate"].get<double>() == doctest::Approx(100.0 / 3.0));
  Evaluation ev;
  ev.original = r;
  ev.debiased = r;
  const Json e = to_json(ev);
  CHECK(e.contains("original"));
  CHECK(e.contains("debiased"));
  CHECK(e.contains("warnings"));

  DebiasResult res;
  res.seed = 4;
  res.simulated = {"job"};
  res.edit_log_hash = "abc";
  const Json meta = debias_metadata_json(res);
  CHECK(meta["seed"] == 4);
  CHECK(meta["simulated"] == Json::array({"job"}));
  CHECK(meta["noise"] == "per-term");
  CHECK(dump(meta).back() == '\n');
}
