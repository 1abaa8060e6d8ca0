#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace foldmix::harness {

enum class ExperimentKind {
  kFoldedRate,
  kFoldedLimitLaw,
  kMixtureConsistency,
  kPmleConsistency,
  kUlln,
  kCollapseDemo,
  kKlGap,
  kBoundsAudit,
};

enum class OutputFormat { kCsv, kJson };

std::string_view kind_name(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);
const std::vector<ExperimentKind>& all_kinds();

OutputFormat parse_format(std::string_view name);

// Invalid configuration; `field()` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::string id;  // experiment column of the report; defaults to the kind name
  ExperimentKind kind = ExperimentKind::kFoldedRate;
  nlohmann::json model = nlohmann::json::object();
  std::vector<std::size_t> n_grid;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::string output_path;
  OutputFormat output_format = OutputFormat::kCsv;
  nlohmann::json options = nlohmann::json::object();

  // n_grid nonempty and strictly increasing, replicates >= 1.
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Typed lookups on the config's JSON blocks; errors name the dotted field.
double get_number(const nlohmann::json& obj, const std::string& key, const std::string& path);
double get_number_or(const nlohmann::json& obj, const std::string& key, const std::string& path,
                     double fallback);
std::size_t get_count_or(const nlohmann::json& obj, const std::string& key,
                         const std::string& path, std::size_t fallback);
bool get_bool_or(const nlohmann::json& obj, const std::string& key, const std::string& path,
                 bool fallback);
std::string get_string_or(const nlohmann::json& obj, const std::string& key,
                          const std::string& path, const std::string& fallback);
std::vector<double> get_numbers(const nlohmann::json& obj, const std::string& key,
                                const std::string& path);
const nlohmann::json& get_object_or_empty(const nlohmann::json& obj, const std::string& key,
                                          const std::string& path);

}  // namespace foldmix::harness
