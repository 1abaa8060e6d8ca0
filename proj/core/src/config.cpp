#include "foldmix/harness/config.hpp"

#include <array>
#include <fstream>

namespace foldmix::harness {

namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 8> kKinds = {{
    {ExperimentKind::kFoldedRate, "folded-rate"},
    {ExperimentKind::kFoldedLimitLaw, "folded-limit-law"},
    {ExperimentKind::kMixtureConsistency, "mixture-consistency"},
    {ExperimentKind::kPmleConsistency, "pmle-consistency"},
    {ExperimentKind::kUlln, "ulln"},
    {ExperimentKind::kCollapseDemo, "collapse-demo"},
    {ExperimentKind::kKlGap, "kl-gap"},
    {ExperimentKind::kBoundsAudit, "bounds-audit"},
}};

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const json* find(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& what)
    : std::runtime_error("config field '" + field + "': " + what), field_(std::move(field)) {}

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKinds) {
    if (n == name) return k;
  }
  throw ConfigError("kind", "unknown experiment kind '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> v;
    for (const auto& kv : kKinds) v.push_back(kv.first);
    return v;
  }();
  return kinds;
}

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  throw ConfigError("output_format", "expected 'csv' or 'json'");
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw ConfigError("n_grid", "must list at least one sample size");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] == 0) throw ConfigError("n_grid", "sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid", "must be strictly increasing");
  }
  if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (!model.is_object()) throw ConfigError("model", "expected an object");
  if (!options.is_object()) throw ConfigError("options", "expected an object");
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig cfg;
  const json* kind = find(j, "kind", "");
  if (!kind || !kind->is_string()) throw ConfigError("kind", "required string");
  cfg.kind = parse_kind(kind->get<std::string>());
  cfg.id = get_string_or(j, "id", "", std::string(kind_name(cfg.kind)));
  if (const json* m = find(j, "model", "")) cfg.model = *m;
  if (const json* g = find(j, "n_grid", "")) {
    if (!g->is_array()) throw ConfigError("n_grid", "expected an array of integers");
    for (const json& v : *g) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw ConfigError("n_grid", "entries must be positive integers");
      }
      cfg.n_grid.push_back(v.get<std::size_t>());
    }
  } else {
    throw ConfigError("n_grid", "required");
  }
  if (const json* r = find(j, "replicates", "")) {
    if (!r->is_number_integer() || r->get<long long>() < 1) {
      throw ConfigError("replicates", "must be an integer >= 1");
    }
    cfg.replicates = r->get<std::size_t>();
  }
  if (const json* s = find(j, "seed", "")) {
    if (!s->is_number_integer() || (!s->is_number_unsigned() && s->get<long long>() < 0)) {
      throw ConfigError("seed", "must be a nonnegative integer");
    }
    cfg.seed = s->get<std::uint64_t>();
  }
  cfg.output_path = get_string_or(j, "output_path", "", "");
  cfg.output_format = parse_format(get_string_or(j, "output_format", "", "csv"));
  if (const json* o = find(j, "options", "")) cfg.options = *o;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

double get_number(const json& obj, const std::string& key, const std::string& path) {
  const json* v = find(obj, key, path);
  if (!v) throw ConfigError(join(path, key), "required number");
  if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
  return v->get<double>();
}

double get_number_or(const json& obj, const std::string& key, const std::string& path,
                     double fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
  return v->get<double>();
}

std::size_t get_count_or(const json& obj, const std::string& key, const std::string& path,
                         std::size_t fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 0) {
    throw ConfigError(join(path, key), "expected a nonnegative integer");
  }
  return v->get<std::size_t>();
}

bool get_bool_or(const json& obj, const std::string& key, const std::string& path, bool fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(path, key), "expected a boolean");
  return v->get<bool>();
}

std::string get_string_or(const json& obj, const std::string& key, const std::string& path,
                          const std::string& fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
  return v->get<std::string>();
}

std::vector<double> get_numbers(const json& obj, const std::string& key, const std::string& path) {
  const json* v = find(obj, key, path);
  if (!v) throw ConfigError(join(path, key), "required array of numbers");
  if (!v->is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (const json& e : *v) {
    if (!e.is_number()) throw ConfigError(join(path, key), "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

const json& get_object_or_empty(const json& obj, const std::string& key, const std::string& path) {
  static const json empty = json::object();
  const json* v = find(obj, key, path);
  if (!v) return empty;
  if (!v->is_object()) throw ConfigError(join(path, key), "expected an object");
  return *v;
}

}  // namespace foldmix::harness
