#include "causaldebias/pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "causaldebias/errors.hpp"

namespace cdb {

Table load_table(std::string bytes, const CsvOptions& options) {
  Table t;
  t.data = load_csv(bytes, options);
  t.options = options;
  t.bytes = std::move(bytes);
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("write to '" + path + "' failed");
}

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* env = std::getenv("CAUSALDEBIAS_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  std::string_view text(env);
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ParameterError("CAUSALDEBIAS_SEED must be an unsigned integer, got '" +
                         std::string(text) + "'");
  return value;
}

CausalModel discover_model(const Dataset& data, const PcOptions& options) {
  return CausalModel::build(data, pc_discover(data, options));
}

std::vector<ScriptStep> apply_script(CausalModel& model, const Dataset& data,
                                     const std::vector<Edit>& script) {
  std::vector<ScriptStep> steps;
  steps.reserve(script.size());
  for (std::size_t i = 0; i < script.size(); ++i) {
    const Edit& e = script[i];
    try {
      if (e.op != EditOp::SetStage && e.stage != model.stage()) {
        Edit toggle{EditOp::SetStage, "", "", 0, e.stage};
        ScriptStep s{toggle, model.apply(data, toggle), model.total_bic()};
        steps.push_back(std::move(s));
      }
      ScriptStep s;
      s.edit = e;
      s.outcome = model.apply(data, e);
      s.total_bic = model.total_bic();
      steps.push_back(std::move(s));
    } catch (const Error& ex) {
      const std::string where = "edit " + std::to_string(i + 1) + " (" +
                                std::string(to_string(e.op)) + " " + e.src + " -> " + e.dst +
                                "): " + ex.what();
      throw Error(ex.kind(), where);
    }
  }
  return steps;
}

std::string debiased_csv(const DebiasResult& result, std::string_view source) {
  if (result.simulated.empty()) return std::string(source);
  return write_csv(result.data);
}

Evaluation evaluate_csv(const Dataset& original, std::string_view debiased_bytes,
                        const GroupSpec& groups, const EvaluateOptions& options) {
  const Dataset debiased = load_csv_like(debiased_bytes, original);
  return evaluate(original, debiased, groups, options);
}

}  // namespace cdb
