#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldmix/harness/config.hpp"

namespace foldmix::harness {

// replicate == kAggregate marks per-n summaries; n == 0 marks experiment-wide rows.
inline constexpr long long kAggregate = -1;

struct ReportRow {
  std::string experiment;
  std::size_t n = 0;
  long long replicate = kAggregate;
  std::string statistic;
  double value = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ReportRow&) const = default;
};

// Throws if two rows share (experiment, n, replicate, statistic).
void check_unique(const std::vector<ReportRow>& rows);

std::string format_report(const std::vector<ReportRow>& rows, OutputFormat format);
// Writes to `path`, or to stdout when path is empty or "-".
void emit_report(const std::vector<ReportRow>& rows, OutputFormat format, const std::string& path);

std::vector<ReportRow> parse_report(const std::string& text, OutputFormat format);

// Value of the unique row matching the key; throws if absent.
double find_value(const std::vector<ReportRow>& rows, std::size_t n, long long replicate,
                  const std::string& statistic);
bool has_row(const std::vector<ReportRow>& rows, std::size_t n, long long replicate,
             const std::string& statistic);

}  // namespace foldmix::harness
