#include "causaldebias/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "causaldebias/errors.hpp"
#include "causaldebias/pipeline.hpp"
#include "causaldebias/service.hpp"
#include "causaldebias/synthetic.hpp"

namespace cdb {
namespace {

struct DataFlags {
  std::string label;
  std::vector<std::string> nominal;
  std::vector<std::string> ordinal;
  std::string favorable;

  void attach(CLI::App* cmd, bool label_required) {
    auto* l = cmd->add_option("--label", label, "Binary label column");
    if (label_required) l->required();
    cmd->add_option("--nominal", nominal, "Nominal columns (comma separated)")->delimiter(',');
    cmd->add_option("--ordinal", ordinal, "Ordinal columns (comma separated)")->delimiter(',');
    cmd->add_option("--favorable", favorable, "Favorable label level");
  }

  CsvOptions options() const {
    CsvOptions o;
    o.label = label;
    o.nominal = nominal;
    o.ordinal = ordinal;
    if (!favorable.empty()) o.favorable = favorable;
    return o;
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

Json load_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& ex) {
    throw IngestError("'" + path + "' is not valid JSON: " + ex.what());
  }
}

void print_graph(std::ostream& out, const CausalModel& model) {
  const Pdag& g = model.graph();
  std::size_t directed = 0;
  for (const auto& e : g.edges()) directed += e.directed;
  out << g.size() << " nodes, " << g.edge_count() << " edges (" << directed << " directed), total BIC "
      << fmt(model.total_bic()) << "\n";
  for (const auto& e : g.edges()) out << "  " << e.src << (e.directed ? " -> " : " -- ") << e.dst << "\n";
  for (const auto& n : g.notes) out << "  note: " << n << "\n";
}

void print_report(std::ostream& out, const Evaluation& ev) {
  auto row = [&](const char* name, double a, double b) {
    out << "  " << std::left << std::setw(16) << name << std::right << std::setw(10) << fmt(a, 2)
        << std::setw(10) << fmt(b, 2) << "\n";
  };
  out << "  " << std::left << std::setw(16) << "metric" << std::right << std::setw(10) << "original"
      << std::setw(10) << "debiased" << "\n";
  row("parity_diff", ev.original.parity_diff, ev.debiased.parity_diff);
  row("individual_bias", ev.original.individual_bias, ev.debiased.individual_bias);
  row("accuracy_diff", ev.original.accuracy_diff, ev.debiased.accuracy_diff);
  row("fnr_diff", ev.original.fnr_diff, ev.debiased.fnr_diff);
  row("fpr_diff", ev.original.fpr_diff, ev.debiased.fpr_diff);
  row("accuracy %", ev.original.accuracy * 100, ev.debiased.accuracy * 100);
  row("f1 %", ev.original.f1 * 100, ev.debiased.f1 * 100);
  row("distortion %", ev.original.distortion * 100, ev.debiased.distortion * 100);
  for (const auto& w : ev.warnings) out << "  warning: " << w << "\n";
}

struct Cli {
  std::ostream& out;
  bool json = false;

  int discover(const std::string& data_path, const DataFlags& flags, double p, int depth,
               bool exclude_label, const std::string& out_path) {
    const CsvOptions options = flags.options();
    const Table t = load_table(read_file(data_path), options);
    PcOptions pc;
    pc.p_threshold = p;
    pc.max_depth = depth;
    pc.exclude_label = exclude_label;
    const CausalModel model = discover_model(t.data, pc);
    write_file(out_path, dump(model_file_json(model, options)));
    if (json) {
      out << dump(model_view_json(model, t.data));
    } else {
      print_graph(out, model);
      out << "wrote " << out_path << "\n";
    }
    return 0;
  }

  int edit(const std::string& model_path, const std::string& data_path,
           const std::string& script_path, const std::string& out_path) {
    const ModelFile file = model_file_from_json(load_json_file(model_path));
    const Table t = load_table(read_file(data_path), file.data_options);
    CausalModel model = replay_model_file(file, t.data);
    const auto script = edit_script_from_json(load_json_file(script_path));
    const auto steps = apply_script(model, t.data, script);
    write_file(out_path, dump(model_file_json(model, file.data_options)));
    if (json) {
      Json js = Json::array();
      for (const auto& s : steps)
        js.push_back({{"edit", to_json(s.edit)},
                      {"bic_delta", s.outcome.bic_delta},
                      {"warnings", s.outcome.warnings},
                      {"total_bic", s.total_bic}});
      out << dump({{"steps", js}, {"stage", to_string(model.stage())}, {"total_bic", model.total_bic()}});
    } else {
      for (const auto& s : steps) {
        if (s.edit.op == EditOp::SetStage) {
          out << "stage " << to_string(s.edit.stage) << "\n";
        } else {
          out << to_string(s.edit.op) << " " << s.edit.src << " -> " << s.edit.dst;
          if (s.edit.op == EditOp::Reweight) out << " " << s.edit.weight_percent << "%";
          out << "  bic_delta " << fmt(s.outcome.bic_delta) << "\n";
        }
        for (const auto& w : s.outcome.warnings) out << "  warning: " << w << "\n";
      }
      out << "stage " << to_string(model.stage()) << ", total BIC " << fmt(model.total_bic()) << "\n";
      out << "wrote " << out_path << "\n";
    }
    return 0;
  }

  int debias(const std::string& model_path, const std::string& data_path, std::uint64_t seed,
             const std::string& noise, const std::string& out_path, std::string meta_path,
             bool no_meta) {
    const ModelFile file = model_file_from_json(load_json_file(model_path));
    const Table t = load_table(read_file(data_path), file.data_options);
    const CausalModel model = replay_model_file(file, t.data);
    DebiasOptions opts;
    opts.noise = noise_mode_from_string(noise);
    const DebiasResult result = generate_debiased(model, t.data, seed, opts);
    write_file(out_path, debiased_csv(result, t.bytes));
    Json meta = debias_metadata_json(result);
    meta["data_options"] = to_json(file.data_options);
    if (!no_meta) {
      if (meta_path.empty()) meta_path = out_path + ".meta.json";
      write_file(meta_path, dump(meta));
    }
    if (json) {
      out << dump(meta);
    } else {
      out << "simulated:";
      for (const auto& n : result.simulated) out << " " << n;
      out << (result.simulated.empty() ? " (none)\n" : "\n");
      for (const auto& [node, r] : result.rescale)
        out << "  " << node << ": " << r.iterations << " rescale steps, gap "
            << fmt(r.gaps.empty() ? 0.0 : r.gaps.back()) << "\n";
      for (const auto& n : result.notes) out << "  note: " << n << "\n";
      out << "wrote " << out_path << "\n";
    }
    return 0;
  }

  int evaluate_cmd(const std::string& original_path, const std::string& debiased_path,
                   const DataFlags& flags, const std::string& model_path,
                   const std::string& group_col, const std::string& privileged,
                   const std::string& groups_path, const EvaluateOptions& opts,
                   const std::string& out_path) {
    CsvOptions options;
    if (!flags.label.empty()) {
      options = flags.options();
    } else if (!model_path.empty()) {
      options = model_file_from_json(load_json_file(model_path)).data_options;
    } else if (std::filesystem::exists(debiased_path + ".meta.json")) {
      const Json meta = load_json_file(debiased_path + ".meta.json");
      if (!meta.contains("data_options"))
        throw ParameterError(debiased_path + ".meta.json has no data_options");
      options = csv_options_from_json(meta.at("data_options"));
    } else {
      throw ParameterError("no data options: pass --label, --model, or keep the debias sidecar");
    }
    std::optional<GroupSpec> groups;
    if (!groups_path.empty()) {
      groups = group_spec_from_json(load_json_file(groups_path));
    } else if (!group_col.empty() && !privileged.empty()) {
      groups = GroupSpec::simple(group_col, privileged);
    } else {
      throw ParameterError("pass --group-col with --privileged, or --groups");
    }
    const Table original = load_table(read_file(original_path), options);
    const Evaluation ev = evaluate_csv(original.data, read_file(debiased_path), *groups, opts);
    const std::string report = dump(to_json(ev));
    if (!out_path.empty()) write_file(out_path, report);
    if (json) {
      out << report;
    } else {
      print_report(out, ev);
      if (!out_path.empty()) out << "wrote " << out_path << "\n";
    }
    return 0;
  }

  int synth(const std::string& spec_path, std::uint64_t seed, long rows, const std::string& out_path,
            const std::string& write_spec) {
    SyntheticSpec spec =
        spec_path.empty() ? default_hiring_spec() : synthetic_spec_from_json(load_json_file(spec_path));
    if (rows > 0) spec.n_rows = static_cast<std::size_t>(rows);
    if (!write_spec.empty()) write_file(write_spec, dump(to_json(spec)));
    const Dataset d = generate_synthetic(spec, seed);
    write_file(out_path, write_csv(d));
    if (json) {
      out << dump({{"rows", d.rows()}, {"columns", d.column_names()}, {"seed", seed}, {"out", out_path}});
    } else {
      out << "wrote " << d.rows() << " rows to " << out_path << "\n";
    }
    return 0;
  }

  int serve(const std::string& host, int port, const ServiceOptions& options) {
    Service service(options);
    const std::size_t restored = service.load_snapshots();
    HttpServer server(service);
    const int bound = server.bind(host, port);
    if (bound < 0) throw ParameterError("cannot bind " + host + ":" + std::to_string(port));
    out << "listening on http://" << host << ":" << bound;
    if (restored) out << " (" << restored << " sessions restored)";
    out << std::endl;
    return server.listen() ? 0 : 1;
  }
};

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal-model based dataset debiasing", "causaldebias-cli"};
  app.require_subcommand(1);
  Cli cli{out};
  app.add_flag("--json", cli.json, "Structured JSON on stdout");

  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed (default: $CAUSALDEBIAS_SEED or 0)")
        ->each([&](const std::string&) { seed_given = true; });
  };

  std::string data_path, model_path, script_path, out_path, noise = "per-term", meta_path;
  DataFlags flags;
  double p = 0.01;
  int depth = 3;
  bool exclude_label = false, no_meta = false;

  auto* discover = app.add_subcommand("discover", "Run PC discovery and write a model file");
  discover->add_option("--data", data_path, "CSV file")->required();
  flags.attach(discover, true);
  discover->add_option("--p", p, "CI-test significance threshold")->check(CLI::Range(0.0, 1.0));
  discover->add_option("--max-depth", depth, "Largest conditioning set")->check(CLI::NonNegativeNumber);
  discover->add_flag("--exclude-label", exclude_label, "Leave the label out of discovery");
  discover->add_option("--out", out_path, "Model JSON to write")->required();

  auto* edit = app.add_subcommand("edit", "Apply an edit script to a model file");
  edit->add_option("--model", model_path, "Model JSON")->required();
  edit->add_option("--data", data_path, "CSV the model was discovered on")->required();
  edit->add_option("--script", script_path, "Edit script JSON")->required();
  edit->add_option("--out", out_path, "Model JSON to write")->required();

  auto* debias = app.add_subcommand("debias", "Generate the debiased dataset");
  debias->add_option("--model", model_path, "Model JSON")->required();
  debias->add_option("--data", data_path, "CSV the model was discovered on")->required();
  add_seed(debias);
  debias->add_option("--noise", noise, "per-term or per-row");
  debias->add_option("--out", out_path, "Debiased CSV to write")->required();
  debias->add_option("--meta", meta_path, "Run metadata JSON (default: <out>.meta.json)");
  debias->add_flag("--no-meta", no_meta, "Skip the metadata file");

  std::string original_path, debiased_path, group_col, privileged, groups_path;
  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "Compare fairness and utility metrics");
  evaluate->add_option("--original", original_path, "Original CSV")->required();
  evaluate->add_option("--debiased", debiased_path, "Debiased CSV")->required();
  flags.attach(evaluate, false);
  evaluate->add_option("--model", model_path, "Model JSON to take data options from");
  evaluate->add_option("--group-col", group_col, "Binary sensitive column");
  evaluate->add_option("--privileged", privileged, "Privileged level of --group-col");
  evaluate->add_option("--groups", groups_path, "Group spec JSON (custom groups)");
  evaluate->add_option("--classifier", eval_opts.classifier, "Classifier");
  evaluate->add_option("--k", eval_opts.k, "Neighbours for individual bias")->check(CLI::PositiveNumber);
  add_seed(evaluate);
  evaluate->add_option("--out", out_path, "Report JSON to write");

  std::string spec_path, write_spec;
  long rows = 0;
  auto* synth = app.add_subcommand("synth", "Generate synthetic data from a spec");
  synth->add_option("--spec", spec_path, "Spec JSON (default: built-in hiring spec)");
  add_seed(synth);
  synth->add_option("--rows", rows, "Override the row count")->check(CLI::PositiveNumber);
  synth->add_option("--out", out_path, "CSV to write")->required();
  synth->add_option("--write-spec", write_spec, "Also write the spec used");

  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceOptions service_opts;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--snapshot-dir", service_opts.snapshot_dir, "Persist sessions as JSON here");
  serve->add_option("--cors-origin", service_opts.cors_origin, "Allowed browser origin");
  serve->add_option("--budget-ms", service_opts.request_budget_ms, "Soft per-request time budget");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    write_error(err, "UsageError", ex.what());
    return 2;
  }

  try {
    if (!seed_given) seed = default_seed();
    if (*discover) return cli.discover(data_path, flags, p, depth, exclude_label, out_path);
    if (*edit) return cli.edit(model_path, data_path, script_path, out_path);
    if (*debias) return cli.debias(model_path, data_path, seed, noise, out_path, meta_path, no_meta);
    if (*evaluate) {
      eval_opts.seed = seed;
      return cli.evaluate_cmd(original_path, debiased_path, flags, model_path, group_col, privileged,
                              groups_path, eval_opts, out_path);
    }
    if (*synth) return cli.synth(spec_path, seed, rows, out_path, write_spec);
    if (*serve) return cli.serve(host, port, service_opts);
  } catch (const Error& ex) {
    write_error(err, ex.kind(), ex.what());
    return 1;
  } catch (const std::exception& ex) {
    write_error(err, "InternalError", ex.what());
    return 1;
  }
  return 2;
}

}  // namespace cdb
