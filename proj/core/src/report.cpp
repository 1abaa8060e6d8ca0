#include "foldmix/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace foldmix::harness {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";  // never "-nan"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Statistic names never contain commas or quotes, but guard anyway.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void check_unique(const std::vector<ReportRow>& rows) {
  std::set<std::tuple<std::string, std::size_t, long long, std::string>> seen;
  for (const ReportRow& r : rows) {
    if (!seen.emplace(r.experiment, r.n, r.replicate, r.statistic).second) {
      throw std::logic_error("duplicate report row: " + r.experiment + " n=" + std::to_string(r.n) +
                             " replicate=" + std::to_string(r.replicate) + " " + r.statistic);
    }
  }
}

std::string format_report(const std::vector<ReportRow>& rows, OutputFormat format) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  if (format == OutputFormat::kCsv) {
    std::string out = "experiment,n,replicate,statistic,value,seed\n";
    for (const ReportRow& r : rows) {
      out += csv_field(r.experiment);
      out += ',' + std::to_string(r.n) + ',' + std::to_string(r.replicate) + ',';
      out += csv_field(r.statistic);
      out += ',' + format_double(r.value) + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ReportRow& r : rows) {
    nlohmann::ordered_json o;
    o["experiment"] = r.experiment;
    o["n"] = r.n;
    o["replicate"] = r.replicate;
    o["statistic"] = r.statistic;
    // JSON has no NaN/Inf literals; those travel as the strings "nan", "inf", "-inf"
    if (std::isfinite(r.value)) {
      o["value"] = r.value;
    } else {
      o["value"] = std::isnan(r.value) ? "nan" : (r.value > 0 ? "inf" : "-inf");
    }
    o["seed"] = r.seed;
    arr.push_back(std::move(o));
  }
  return arr.dump(1) + "\n";
}

void emit_report(const std::vector<ReportRow>& rows, OutputFormat format, const std::string& path) {
  const std::string text = format_report(rows, format);
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
}

std::vector<ReportRow> parse_report(const std::string& text, OutputFormat format) {
  std::vector<ReportRow> rows;
  if (format == OutputFormat::kJson) {
    const auto arr = nlohmann::ordered_json::parse(text);
    for (const auto& o : arr) {
      ReportRow r;
      r.experiment = o.at("experiment").get<std::string>();
      r.n = o.at("n").get<std::size_t>();
      r.replicate = o.at("replicate").get<long long>();
      r.statistic = o.at("statistic").get<std::string>();
      const auto& v = o.at("value");
      r.value = v.is_string() ? std::stod(v.get<std::string>()) : v.get<double>();
      r.seed = o.at("seed").get<std::uint64_t>();
      rows.push_back(std::move(r));
    }
    return rows;
  }
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "experiment,n,replicate,statistic,value,seed") {
    throw std::runtime_error("parse_report: missing CSV header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw std::runtime_error("parse_report: malformed CSV row");
    ReportRow r;
    r.experiment = f[0];
    r.n = std::stoull(f[1]);
    r.replicate = std::stoll(f[2]);
    r.statistic = f[3];
    r.value = std::stod(f[4]);
    r.seed = std::stoull(f[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double find_value(const std::vector<ReportRow>& rows, std::size_t n, long long replicate,
                  const std::string& statistic) {
  for (const ReportRow& r : rows) {
    if (r.n == n && r.replicate == replicate && r.statistic == statistic) return r.value;
  }
  throw std::out_of_range("report has no row n=" + std::to_string(n) + " replicate=" +
                          std::to_string(replicate) + " statistic=" + statistic);
}

bool has_row(const std::vector<ReportRow>& rows, std::size_t n, long long replicate,
             const std::string& statistic) {
  for (const ReportRow& r : rows) {
    if (r.n == n && r.replicate == replicate && r.statistic == statistic) return true;
  }
  return false;
}

}  // namespace foldmix::harness
