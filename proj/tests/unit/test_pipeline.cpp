#include <cstdlib>
#include <filesystem>

#include "causaldebias/errors.hpp"
#include "causaldebias/pipeline.hpp"
#include "causaldebias/synthetic.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdb;

namespace {

struct SeedEnv {
  explicit SeedEnv(const char* value) {
    if (value) ::setenv("CAUSALDEBIAS_SEED", value, 1);
    else ::unsetenv("CAUSALDEBIAS_SEED");
  }
  ~SeedEnv() { ::unsetenv("CAUSALDEBIAS_SEED"); }
};

Table hiring_table() {
  CsvOptions o;
  o.label = "job";
  o.favorable = "Y";
  return load_table(write_csv(generate_synthetic(default_hiring_spec(), 1)), o);
}

}  // namespace

TEST_CASE("load_table keeps bytes and options") {
  CsvOptions o;
  o.label = "y";
  const Table t = load_table("x,y\n1,a\n2,b\n3,a\n", o);
  CHECK(t.bytes == "x,y\n1,a\n2,b\n3,a\n");
  CHECK(t.options.label == "y");
  CHECK(t.data.rows() == 3);
  CHECK_THROWS_AS(load_table("x,y\n1,a\n", CsvOptions{"missing", {}, {}, {}, 0}), SchemaError);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "cdb_pipeline_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "bytes.bin").string();
  const std::string payload("a\0b\r\nc", 6);
  write_file(path, payload);
  CHECK(read_file(path) == payload);
  CHECK_THROWS_AS(read_file((dir / "absent.csv").string()), IngestError);
  CHECK_THROWS_AS(write_file((dir / "no/such/dir.csv").string(), "x"), IngestError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("default_seed reads the environment") {
  {
    SeedEnv env(nullptr);
    CHECK(default_seed(7) == 7);
  }
  {
    SeedEnv env("");
    CHECK(default_seed(7) == 7);
  }
  {
    SeedEnv env("42");
    CHECK(default_seed(7) == 42);
  }
  {
    SeedEnv env("18446744073709551615");
    CHECK(default_seed() == 18446744073709551615ull);
  }
  for (const char* bad : {"-1", "abc", "12x", " 3", "18446744073709551616"}) {
    SeedEnv env(bad);
    CHECK_THROWS_AS(default_seed(), ParameterError);
  }
}

TEST_CASE("apply_script") {
  const Table t = hiring_table();
  const Dataset& d = t.data;
  CausalModel m = build_model(d, cdbtest::hiring_truth(d));

  SUBCASE("a stage change is inserted before a debias edit") {
    const std::vector<Edit> script{{EditOp::Reweight, "gender", "job", -50, Stage::Debias},
                                   {EditOp::Delete, "gender", "major", 0, Stage::Debias}};
    const auto steps = apply_script(m, d, script);
    REQUIRE(steps.size() == 3);
    CHECK(steps[0].edit.op == EditOp::SetStage);
    CHECK(steps[1].edit == script[0]);
    CHECK(m.stage() == Stage::Debias);
    CHECK(steps.back().total_bic == doctest::Approx(m.total_bic()));
  }
  SUBCASE("a failing step keeps earlier steps and names itself") {
    const std::vector<Edit> script{{EditOp::Delete, "sat_score", "college_rank", 0, Stage::Refine},
                                   {EditOp::Add, "job", "age", 0, Stage::Refine}};
    try {
      apply_script(m, d, script);
      FAIL("expected a cycle");
    } catch (const Error& e) {
      CHECK(e.kind() == "CycleError");
      CHECK(std::string(e.what()).find("edit 2") != std::string::npos);
    }
    CHECK(m.log().size() == 1);
    CHECK_FALSE(m.graph().adjacent(m.graph().require("sat_score"), m.graph().require("college_rank")));
  }
  SUBCASE("empty script is a no-op") {
    CHECK(apply_script(m, d, {}).empty());
    CHECK(m.log().empty());
  }
}

TEST_CASE("debiased_csv and evaluate_csv") {
  const Table t = hiring_table();
  const Dataset& d = t.data;
  CausalModel m = build_model(d, cdbtest::hiring_truth(d));
  const auto untouched = generate_debiased(m, d, 1);
  CHECK(debiased_csv(untouched, t.bytes) == t.bytes);

  apply_script(m, d, {{EditOp::Delete, "gender", "job", 0, Stage::Debias}});
  const auto r = generate_debiased(m, d, 1);
  const std::string bytes = debiased_csv(r, t.bytes);
  CHECK(bytes == write_csv(r.data));
  CHECK(bytes != t.bytes);

  const auto groups = GroupSpec::simple("gender", "Male");
  const Evaluation a = evaluate_csv(d, bytes, groups, {});
  const Evaluation b = evaluate(d, r.data, groups, {});
  CHECK(dump(to_json(a)) == dump(to_json(b)));
  CHECK_THROWS_AS(evaluate_csv(d, "nope\n1\n", groups, {}), Error);
}
