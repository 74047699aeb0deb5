// Acceptance runner: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion passes. `--known-failures a,b`
// names criteria whose failure is documented; the run then succeeds only if
// exactly those fail, so a fix or a new regression both surface.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "causaldebias/cli.hpp"
#include "causaldebias/errors.hpp"
#include "causaldebias/pipeline.hpp"
#include "causaldebias/regress.hpp"
#include "causaldebias/service.hpp"
#include "causaldebias/synthetic.hpp"
#include "test_support.hpp"

using namespace cdb;
namespace fs = std::filesystem;
namespace oracle = cdbtest::oracle;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail.push_back((ok ? "" : "!") + what);
  }
};

CsvOptions hiring_options() {
  CsvOptions o;
  o.label = "job";
  o.favorable = "Y";
  return o;
}

std::vector<Edit> script_file(const char* rel) {
  return edit_script_from_json(Json::parse(read_file(cdbtest::source_path(rel))));
}

const GroupSpec kGender = GroupSpec::simple("gender", "Male");

// ------------------------------------------------------------------ criteria

Outcome no_edit_identity() {
  Outcome o;
  const Table fixture = load_table(write_csv(generate_synthetic(default_hiring_spec(), 1)), hiring_options());

  const auto t0 = Clock::now();
  const Table t = load_table(fixture.bytes, hiring_options());
  const CausalModel m = discover_model(t.data, {});
  const DebiasResult r = generate_debiased(m, t.data, 1);
  const std::string csv = debiased_csv(r, t.bytes);
  const Evaluation ev = evaluate_csv(t.data, csv, kGender, {});
  const double secs = seconds_since(t0);

  o.require(csv == t.bytes, "hiring csv byte-identical");
  o.require(ev.debiased.distortion == 0.0, "distortion 0");
  double worst = 0;
  const MetricsReport& a = ev.original;
  const MetricsReport& b = ev.debiased;
  for (auto [x, y] : {std::pair{a.parity_diff, b.parity_diff}, {a.individual_bias, b.individual_bias},
                      {a.accuracy_diff, b.accuracy_diff}, {a.fnr_diff, b.fnr_diff}, {a.fpr_diff, b.fpr_diff},
                      {a.accuracy * 100, b.accuracy * 100}, {a.f1 * 100, b.f1 * 100}})
    worst = std::max(worst, std::abs(x - y));
  o.require(worst < 0.5, "paired metrics max gap " + fixed(worst, 3) + " pt");
  o.require(secs < 5.0, "runtime " + fixed(secs) + " s");

  // other shapes: random tables through the same path
  cdbtest::Gen gen(2024);
  int identical = 0;
  const int cases = 20;
  for (int c = 0; c < cases; ++c) {
    cdbtest::RandomShape shape;
    shape.rows = static_cast<std::size_t>(gen.integer(40, 200));
    shape.numeric = gen.integer(1, 3);
    shape.categorical = gen.integer(0, 2);
    CsvOptions opts;
    opts.label = "y";
    opts.favorable = "yes";
    const Table rt = load_table(write_csv(cdbtest::random_dataset(gen, shape)), opts);
    const CausalModel rm = discover_model(rt.data, {});
    const DebiasResult rr = generate_debiased(rm, rt.data, static_cast<std::uint64_t>(c));
    const std::string out = debiased_csv(rr, rt.bytes);
    identical += out == rt.bytes && gower_distortion(rt.data, load_csv_like(out, rt.data)) == 0.0;
  }
  o.require(identical == cases, "random tables identical " + std::to_string(identical) + "/" + std::to_string(cases));
  return o;
}

struct SeedRun {
  double baseline = 0, one = 0, two = 0, acc_drop = 0, distortion = 0;
  bool ok = true;
  std::string error;
};

SeedRun case_study_seed(std::uint64_t seed, const std::vector<Edit>& refine) {
  SeedRun s;
  try {
    const Table t = load_table(write_csv(generate_synthetic(default_hiring_spec(), seed)), hiring_options());
    CausalModel m = discover_model(t.data, {});
    apply_script(m, t.data, refine);
    s.baseline = statistical_parity_diff(t.data, kGender);

    apply_script(m, t.data, {{EditOp::Delete, "gender", "job", 0, Stage::Debias}});
    const std::string one = debiased_csv(generate_debiased(m, t.data, seed), t.bytes);
    s.one = statistical_parity_diff(load_csv_like(one, t.data), kGender);

    apply_script(m, t.data, {{EditOp::Delete, "gender", "major", 0, Stage::Debias}});
    const std::string two = debiased_csv(generate_debiased(m, t.data, seed), t.bytes);
    EvaluateOptions eo;
    eo.seed = seed;
    const Evaluation ev = evaluate_csv(t.data, two, kGender, eo);
    s.two = ev.debiased.parity_diff;
    s.acc_drop = (ev.original.accuracy - ev.debiased.accuracy) * 100;
    s.distortion = ev.debiased.distortion;
  } catch (const Error& ex) {
    s.ok = false;
    s.error = ex.what();
  }
  return s;
}

Outcome case_study() {
  Outcome o;
  const auto refine = script_file("data/edits/hiring_refine.json");
  const auto t0 = Clock::now();
  int band[5] = {0, 0, 0, 0, 0};
  std::string errors;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SeedRun s = case_study_seed(seed, refine);
    if (!s.ok) {
      errors += " seed " + std::to_string(seed) + ": " + s.error;
      continue;
    }
    band[0] += std::abs(s.baseline - 11) <= 2;
    band[1] += std::abs(s.one - 6) <= 3;
    band[2] += s.two <= 3;
    band[3] += s.acc_drop <= 3;
    band[4] += std::abs(s.distortion - 0.06) <= 0.03;
    std::cout << "    seed " << seed << ": baseline " << fixed(s.baseline) << ", -gender->job " << fixed(s.one)
              << ", -gender->major " << fixed(s.two) << ", accuracy drop " << fixed(s.acc_drop)
              << ", distortion " << fixed(s.distortion, 4) << "\n";
  }
  const double secs = seconds_since(t0);
  const char* names[5] = {"baseline 11+-2", "one deletion 6+-3", "two deletions <=3", "accuracy drop <=3",
                          "distortion 0.06+-0.03"};
  for (int b = 0; b < 5; ++b) o.require(band[b] >= 8, std::string(names[b]) + " " + std::to_string(band[b]) + "/10");
  o.require(errors.empty(), errors.empty() ? "all seeds ran" : "errors:" + errors);
  o.require(secs < 120.0, "runtime " + fixed(secs, 1) + " s");
  return o;
}

Outcome table_shape() {
  Outcome o;
  const Table t = load_table(write_csv(generate_synthetic(default_hiring_spec(), 1)), hiring_options());
  CausalModel m = discover_model(t.data, {});
  apply_script(m, t.data, script_file("data/edits/hiring_refine.json"));
  apply_script(m, t.data, script_file("data/edits/hiring_debias.json"));
  EvaluateOptions eo;
  eo.seed = 1;
  const Evaluation ev = evaluate_csv(t.data, debiased_csv(generate_debiased(m, t.data, 1), t.bytes), kGender, eo);
  const MetricsReport& a = ev.original;
  const MetricsReport& b = ev.debiased;
  auto cut = [](double before, double after) { return before > 0 ? (before - after) / before : 0.0; };
  auto line = [&](const char* name, double before, double after, double need) {
    const double c = cut(before, after);
    o.require(c >= need, std::string(name) + " " + fixed(before) + " -> " + fixed(after) + " (" +
                             fixed(c * 100, 0) + "% cut, need " + fixed(need * 100, 0) + "%)");
  };
  line("parity", a.parity_diff, b.parity_diff, 0.70);
  line("fnr", a.fnr_diff, b.fnr_diff, 0.50);
  line("fpr", a.fpr_diff, b.fpr_diff, 0.50);
  const double f1_gap = std::abs(a.f1 - b.f1) * 100;
  o.require(f1_gap <= 5, "f1 " + fixed(a.f1 * 100) + " -> " + fixed(b.f1 * 100));
  return o;
}

Outcome pc_recovery() {
  Outcome o;
  const auto truth = cdbtest::hiring_true_edges();
  double found = 0, spurious = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = generate_synthetic(default_hiring_spec(), seed);
    PcOptions pc;
    pc.p_threshold = 0.01;
    const Pdag g = pc_discover(d, pc);
    std::set<std::set<std::string>> expected;
    for (const auto& [a, b] : truth) expected.insert({a, b});
    for (const auto& e : g.edges()) {
      const std::set<std::string> pair{e.src, e.dst};
      if (expected.count(pair)) found += 1;
      else if (pair != std::set<std::string>{"sat_score", "gpa"}) spurious += 1;
    }
  }
  found /= 10;
  spurious /= 10;
  o.require(found >= 5, "mean true skeleton edges " + fixed(found, 1) + " of " + std::to_string(truth.size()));
  o.require(spurious <= 2, "mean spurious " + fixed(spurious, 1));
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  cdbtest::Gen gen(585);
  int metric_ok = 0, path_ok = 0, rescale_ok = 0;
  const int cases = 100;
  for (int c = 0; c < cases; ++c) {
    cdbtest::RandomShape shape;
    shape.rows = static_cast<std::size_t>(gen.integer(4, 30));
    shape.numeric = gen.integer(0, 3);
    shape.categorical = gen.integer(0, 2);
    shape.integer_numeric = gen.coin(0.5);
    const Dataset d = cdbtest::random_dataset(gen, shape);
    const Dataset e = cdbtest::perturbed(gen, d, 0.3);
    const std::size_t k = static_cast<std::size_t>(gen.integer(1, static_cast<int>(d.rows()) - 1));
    const auto q = oracle::fourfold(d, "g", "A");
    const auto groups = GroupSpec::simple("g", "A");
    metric_ok += statistical_parity_diff(d, groups) == oracle::parity_diff(d, "g", "A") &&
                 fourfold(d, groups) == Fourfold{q.a_pos, q.a_neg, q.b_pos, q.b_neg} &&
                 individual_bias(d, k) == oracle::individual_bias(d, k) &&
                 gower_distortion(d, e) == oracle::distortion(d, e);

    const std::size_t n = static_cast<std::size_t>(gen.integer(2, 9));
    const Pdag g = cdbtest::random_dag(gen, n, gen.real(0.1, 0.7));
    const auto& nodes = g.nodes();
    const auto s = nodes[static_cast<std::size_t>(gen.integer(0, static_cast<int>(n) - 1))];
    auto t = nodes[static_cast<std::size_t>(gen.integer(0, static_cast<int>(n) - 1))];
    if (s == t) t = nodes[(g.require(s) + 1) % n];
    path_ok += find_paths(g, s, t) == oracle::all_paths(g, s, t);

    const std::size_t rows = static_cast<std::size_t>(gen.integer(2, 30));
    const std::size_t levels = static_cast<std::size_t>(gen.integer(2, 4));
    std::vector<std::vector<double>> pm(rows, std::vector<double>(levels));
    Eigen::MatrixXd p(rows, levels);
    std::vector<int> codes(rows);
    std::vector<std::string> names;
    for (std::size_t l = 0; l < levels; ++l) names.push_back("L" + std::to_string(l));
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t l = 0; l < levels; ++l) {
        const double v = gen.coin(0.1) ? 0.5 : gen.real(0, 1);
        pm[i][l] = v;
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = v;
      }
      codes[i] = gen.integer(0, static_cast<int>(levels) - 1);
    }
    const auto r = rescale_categorical(p, Column::categorical("v", ColumnKind::Nominal, names, codes));
    const auto tr = oracle::rescale(pm, codes, levels);
    rescale_ok += r.labels == tr.labels && r.gaps == tr.gaps;
  }
  const auto count = [&](const char* what, int n) {
    o.require(n == cases, std::string(what) + " " + std::to_string(n) + "/" + std::to_string(cases));
  };
  count("metrics", metric_ok);
  count("paths", path_ok);
  count("rescale", rescale_ok);
  return o;
}

Outcome numerical_invariants() {
  Outcome o;
  // moments of simulated numeric columns
  double worst_moment = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset d = generate_synthetic(default_hiring_spec(), seed);
    CausalModel m = build_model(d, cdbtest::hiring_truth(d));
    m.set_stage(Stage::Debias);
    m.apply(d, Edit{EditOp::Reweight, "age", "work_experience", -70, Stage::Debias});
    m.apply(d, Edit{EditOp::Delete, "gender", "job", 0, Stage::Debias});
    const DebiasResult r = generate_debiased(m, d, seed);
    for (const auto& c : d.columns()) {
      if (c.schema().categorical() || !r.plan.simulates(c.name())) continue;
      const auto& sim = r.data.column(c.name()).values();
      worst_moment = std::max({worst_moment, std::abs(mean_of(sim) - mean_of(c.values())),
                               std::abs(population_std(sim) - population_std(c.values()))});
    }
  }
  o.require(worst_moment <= 1e-9, "moment error " + fixed(worst_moment * 1e12, 3) + "e-12");

  // CI symmetry
  cdbtest::Gen gen(586);
  int asym = 0;
  for (int trial = 0; trial < 200; ++trial) {
    cdbtest::RandomShape shape;
    shape.rows = static_cast<std::size_t>(gen.integer(30, 150));
    shape.numeric = 3;
    shape.categorical = 2;
    const Dataset d = cdbtest::random_dataset(gen, shape);
    const auto names = d.column_names();
    const std::string a = gen.pick(names);
    std::string b = gen.pick(names);
    if (a == b) continue;
    std::vector<std::string> given;
    for (const auto& n : names)
      if (n != a && n != b && gen.coin(0.3)) given.push_back(n);
    asym += ci_test(d, a, b, given, 0.01).p_value != ci_test(d, b, a, given, 0.01).p_value;
  }
  o.require(asym == 0, "asymmetric ci pairs " + std::to_string(asym));

  // fuzz: accepted edits keep the graph acyclic and the deltas telescope
  const std::vector<EditOp> ops{EditOp::Add, EditOp::Delete, EditOp::Reverse, EditOp::Direct, EditOp::Reweight};
  int accepted = 0, cyclic = 0;
  double worst_sum = 0;
  while (accepted < 10000) {
    cdbtest::RandomShape shape;
    shape.rows = 60;
    shape.numeric = 3;
    shape.categorical = 1;
    const Dataset d = cdbtest::random_dataset(gen, shape);
    Pdag g(d.column_names());
    const Pdag dag = cdbtest::random_dag(gen, d.cols(), 0.3);
    for (const auto& e : dag.edges()) {
      const std::size_t a = std::stoul(e.src.substr(1)), b = std::stoul(e.dst.substr(1));
      if (gen.coin(0.3)) g.add_undirected(a, b);
      else g.add_directed(a, b);
    }
    CausalModel m = build_model(d, g);
    const double initial = m.total_bic();
    double deltas = 0;
    const auto names = d.column_names();
    for (int step = 0; step < 500 && accepted < 10000; ++step) {
      if (gen.coin(0.03)) {
        m.set_stage(m.stage() == Stage::Refine ? Stage::Debias : Stage::Refine);
        continue;
      }
      const Edit e{gen.pick(ops), gen.pick(names), gen.pick(names), gen.integer(-100, 100), m.stage()};
      try {
        deltas += m.apply(d, e).bic_delta;
        ++accepted;
      } catch (const Error&) {
      }
      cyclic += !m.graph().acyclic();
    }
    worst_sum = std::max(worst_sum, std::abs((m.total_bic() - initial) - deltas));
  }
  o.require(cyclic == 0, std::to_string(accepted) + " accepted edits, cyclic states " + std::to_string(cyclic));
  o.require(worst_sum <= 1e-6, "telescoping error " + fixed(worst_sum * 1e9, 3) + "e-9");
  return o;
}

Outcome cli_service_equivalence() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "cdb_acceptance_equiv";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto at = [&](const char* f) { return (dir / f).string(); };
  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cout << "    cli failed: " << err.str();
    return code;
  };
  const std::string refine = cdbtest::source_path("data/edits/hiring_refine.json");
  const std::string debias = cdbtest::source_path("data/edits/hiring_debias.json");

  Service svc;
  auto call = [&](const char* method, const std::string& path, const std::string& body) {
    HttpRequest r;
    r.method = method;
    r.path = path;
    r.body = body;
    r.content_type = "application/json";
    return svc.handle(r);
  };

  for (const std::uint64_t seed : {1u, 7u}) {
    const std::string s = std::to_string(seed);
    bool ran = cli({"synth", "--seed", s, "--out", at("f.csv")}) == 0 &&
               cli({"discover", "--data", at("f.csv"), "--label", "job", "--favorable", "Y", "--out",
                    at("m0.json")}) == 0 &&
               cli({"edit", "--model", at("m0.json"), "--data", at("f.csv"), "--script", refine, "--out",
                    at("m1.json")}) == 0 &&
               cli({"edit", "--model", at("m1.json"), "--data", at("f.csv"), "--script", debias, "--out",
                    at("m2.json")}) == 0 &&
               cli({"debias", "--model", at("m2.json"), "--data", at("f.csv"), "--seed", s, "--out",
                    at("debiased.csv")}) == 0 &&
               cli({"evaluate", "--original", at("f.csv"), "--debiased", at("debiased.csv"), "--group-col", "gender",
                    "--privileged", "Male", "--classifier", "logistic", "--k", "10", "--seed", s, "--out",
                    at("report.json")}) == 0;
    o.require(ran, "seed " + s + " cli steps ran");
    if (!ran) continue;

    HttpRequest up;
    up.method = "POST";
    up.path = "/datasets";
    up.body = read_file(at("f.csv"));
    up.query = {{"label", "job"}, {"favorable", "Y"}};
    const std::string did = svc.handle(up).json()["dataset_id"];
    const std::string base =
        "/sessions/" + call("POST", "/sessions", Json{{"dataset_id", did}}.dump()).json()["session_id"].get<std::string>();
    call("POST", base + "/edits", read_file(refine));
    call("POST", base + "/edits", read_file(debias));
    call("POST", base + "/debias", Json{{"seed", seed}}.dump());
    const auto csv = call("GET", base + "/debiased.csv", "");
    const auto report = call("POST", base + "/evaluate",
                             Json{{"groups", {{"column", "gender"}, {"privileged", "Male"}}},
                                  {"classifier", "logistic"},
                                  {"k", 10},
                                  {"seed", seed}}
                                 .dump());
    o.require(csv.body == read_file(at("debiased.csv")), "seed " + s + " debiased csv bytes equal");
    o.require(report.body == read_file(at("report.json")), "seed " + s + " report bytes equal");
  }
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  const char* id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known;
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto list = [&](std::set<std::string>& into) {
      if (i + 1 >= argc) return;
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) into.insert(item);
    };
    if (a == "--known-failures") list(known);
    else if (a == "--only") list(only);
    else {
      std::cerr << "usage: acceptance [--only ids] [--known-failures ids]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"no_edit_identity", "empty edit log reproduces the input", no_edit_identity},
      {"hiring_case_study", "synthetic hiring case study over 10 seeds", case_study},
      {"table_direction", "full debiasing shrinks parity, FNR and FPR gaps", table_shape},
      {"pc_recovery", "stable PC recovers the hiring skeleton", pc_recovery},
      {"oracle_equivalence", "metrics, paths and rescaling match brute force", oracle_equivalence},
      {"numerical_invariants", "moments, telescoping, CI symmetry, acyclicity", numerical_invariants},
      {"cli_service_equivalence", "CLI and service give identical bytes", cli_service_equivalence},
  };

  std::set<std::string> failed;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& ex) {
      out.require(false, std::string("threw: ") + ex.what());
    }
    std::string detail;
    for (const auto& d : out.detail) detail += (detail.empty() ? "" : "; ") + d;
    std::cout << (out.pass ? "PASS " : "FAIL ") << c.id << " - " << c.title << " [" << detail << "] ("
              << fixed(seconds_since(t0), 1) << " s)" << std::endl;
    if (!out.pass) failed.insert(c.id);
  }

  if (known.empty()) return failed.empty() ? 0 : 1;
  for (const auto& id : known)
    if (!failed.count(id) && (only.empty() || only.count(id)))
      std::cout << "note: " << id << " was listed as a known failure but passed" << std::endl;
  for (const auto& id : failed)
    if (!known.count(id)) return 1;
  for (const auto& id : known)
    if (!failed.count(id) && (only.empty() || only.count(id))) return 1;
  return 0;
}
