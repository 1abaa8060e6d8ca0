#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "foldmix/harness/config.hpp"
#include "foldmix/harness/experiments.hpp"
#include "foldmix/harness/report.hpp"
#include "foldmix/random.hpp"
#include "foldmix/stats.hpp"

using namespace foldmix::harness;
using nlohmann::json;

namespace {

json rate_config() {
  return json::parse(R"({
    "id": "t-rate", "kind": "folded-rate", "model": {"mu": 1.0, "sigma": 1.0},
    "n_grid": [64, 256], "replicates": 6, "seed": 5, "options": {"scan_points": 200, "threads": 2}
  })");
}

json mixture_config() {
  return json::parse(R"({
    "id": "t-mix", "kind": "mixture-consistency",
    "model": {"weights": [0.5, 0.5], "means": [-2.0, 2.0], "sigmas": [1.0, 1.0]},
    "n_grid": [1, 100], "replicates": 2, "seed": 3,
    "options": {"sieve": {"m": 3.0, "epsilon": 0.05}, "fit": {"restarts": 2}}
  })");
}

std::string field_of(const json& j) {
  try {
    run_experiment(parse_config(j));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, ParsesAndDefaultsId) {
  json j = rate_config();
  j.erase("id");
  const ExperimentConfig c = parse_config(j);
  EXPECT_EQ(c.id, "folded-rate");
  EXPECT_EQ(c.kind, ExperimentKind::kFoldedRate);
  EXPECT_EQ(c.n_grid, (std::vector<std::size_t>{64, 256}));
  EXPECT_EQ(c.output_format, OutputFormat::kCsv);
}

TEST(Config, ErrorsNameTheField) {
  json j = rate_config();
  j["n_grid"] = {256, 64};
  EXPECT_EQ(field_of(j), "n_grid");
  j = rate_config();
  j["replicates"] = 0;
  EXPECT_EQ(field_of(j), "replicates");
  j = rate_config();
  j["kind"] = "nope";
  EXPECT_EQ(field_of(j), "kind");
  j = rate_config();
  j["output_format"] = "xml";
  EXPECT_EQ(field_of(j), "output_format");
  j = rate_config();
  j["model"].erase("sigma");
  EXPECT_EQ(field_of(j), "model.sigma");
  j = rate_config();
  j["model"]["sigma"] = -1.0;
  EXPECT_EQ(field_of(j), "model");
  try {
    parse_config(json::parse(R"({"kind": "ulln", "n_grid": [3, 3]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_grid"), std::string::npos);
  }
}

TEST(Report, OneRowCsvHasTwoLines) {
  const std::vector<ReportRow> rows{{"e", 10, 0, "s", 0.1, 7}};
  const std::string csv = format_report(rows, OutputFormat::kCsv);
  EXPECT_EQ(csv, "experiment,n,replicate,statistic,value,seed\ne,10,0,s,0.10000000000000001,7\n");
  EXPECT_THROW(format_report({}, OutputFormat::kCsv), std::invalid_argument);
}

TEST(Report, RoundTripsBothFormats) {
  const std::vector<ReportRow> rows{{"e", 10, 0, "a", 1.0 / 3.0, 7},
                                    {"e", 10, kAggregate, "b[x=1]", -2.5e-300, 18446744073709551615ull},
                                    {"e", 0, kAggregate, "c", NAN, 1},
                                    {"e", 0, kAggregate, "d", INFINITY, 1}};
  for (OutputFormat f : {OutputFormat::kCsv, OutputFormat::kJson}) {
    const std::string text = format_report(rows, f);
    const auto back = parse_report(text, f);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(back[i].experiment, rows[i].experiment);
      EXPECT_EQ(back[i].n, rows[i].n);
      EXPECT_EQ(back[i].replicate, rows[i].replicate);
      EXPECT_EQ(back[i].statistic, rows[i].statistic);
      EXPECT_EQ(back[i].seed, rows[i].seed);
      if (std::isnan(rows[i].value)) {
        EXPECT_TRUE(std::isnan(back[i].value));
      } else {
        EXPECT_EQ(back[i].value, rows[i].value);
      }
    }
    EXPECT_EQ(format_report(back, f), text);
  }
}

TEST(Report, DuplicateKeysRejected) {
  const std::vector<ReportRow> rows{{"e", 1, 0, "a", 1, 0}, {"e", 1, 0, "a", 2, 0}};
  EXPECT_THROW(check_unique(rows), std::logic_error);
}

TEST(Experiments, DeterministicAcrossRunsAndThreadCounts) {
  json j = rate_config();
  const std::string a = format_report(run_experiment(parse_config(j)), OutputFormat::kCsv);
  const std::string b = format_report(run_experiment(parse_config(j)), OutputFormat::kCsv);
  j["options"]["threads"] = 1;
  const std::string c = format_report(run_experiment(parse_config(j)), OutputFormat::kCsv);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  j["seed"] = 6;
  EXPECT_NE(a, format_report(run_experiment(parse_config(j)), OutputFormat::kCsv));
}

TEST(Experiments, AggregatesRecomputableFromRawRows) {
  const auto rows = run_experiment(parse_config(rate_config()));
  std::map<std::size_t, std::vector<double>> raw;
  for (const auto& r : rows) {
    if (r.replicate >= 0 && r.statistic == "abs_sigma_error") raw[r.n].push_back(r.value);
  }
  std::vector<double> logn, logmed;
  for (auto& [n, v] : raw) {
    EXPECT_EQ(v.size(), 6u);
    const double med = foldmix::median(v);
    EXPECT_EQ(find_value(rows, n, kAggregate, "median_abs_sigma_error"), med);
    logn.push_back(std::log(static_cast<double>(n)));
    logmed.push_back(std::log(med));
  }
  EXPECT_DOUBLE_EQ(find_value(rows, 0, kAggregate, "slope_log_median_abs_sigma_error"),
                   foldmix::ls_slope(logn, logmed));
  // every replicate row carries the derived seed
  for (const auto& r : rows) {
    if (r.replicate >= 0) { EXPECT_EQ(r.seed, foldmix::derive_seed(5, "t-rate", r.n, r.replicate)); }
  }
}

TEST(Experiments, SingleReplicateAggregates) {
  json j = rate_config();
  j["replicates"] = 1;
  const auto rows = run_experiment(parse_config(j));
  EXPECT_EQ(find_value(rows, 64, kAggregate, "median_abs_sigma_error"), find_value(rows, 64, 0, "abs_sigma_error"));
}

TEST(Experiments, LimitLawRequiresKink) {
  json j = rate_config();
  j["kind"] = "folded-limit-law";
  try {
    run_experiment(parse_config(j));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.mu");
    EXPECT_NE(std::string(e.what()).find("limit law requires the kink"), std::string::npos);
  }
}

TEST(Experiments, LimitLawCdfShape) {
  EXPECT_EQ(limit_law_cdf(-1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(limit_law_cdf(0.0, 1.0), 0.5);
  // P(|T*| <= x) = Phi(x^2 / sqrt 2) at sigma0 = 1 since E[Y^4] = 3
  EXPECT_NEAR(limit_law_cdf(1.2, 1.0), 0.5 * std::erfc(-1.44 / std::sqrt(2.0) / std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(limit_law_cdf(2.4, 2.0), limit_law_cdf(1.2, 1.0), 1e-15);
}

TEST(Experiments, SmallNGivesErrorRowAndContinues) {
  const auto rows = run_experiment(parse_config(mixture_config()));
  EXPECT_TRUE(has_row(rows, 1, kAggregate, "error.n_below_k"));
  EXPECT_TRUE(has_row(rows, 100, kAggregate, "median_d_min"));
}

TEST(Experiments, TruthOutsideSieveIsAnError) {
  json j = mixture_config();
  j["options"]["sieve"]["m"] = 1.0;
  EXPECT_EQ(field_of(j), "model");
}

TEST(Experiments, PmleBoundedPenaltyWarns) {
  json j = mixture_config();
  j["kind"] = "pmle-consistency";
  j["n_grid"] = {50, 100};
  j["options"] = json::parse(R"({"lambda": {"schedule": "power", "c": 1.0, "power": -2.0}, "fit": {"restarts": 1}})");
  const auto rows = run_experiment(parse_config(j));
  EXPECT_TRUE(has_row(rows, 0, kAggregate, "warning.n_lambda_bounded"));
  j["options"]["lambda"]["power"] = -0.5;
  EXPECT_FALSE(has_row(run_experiment(parse_config(j)), 0, kAggregate, "warning.n_lambda_bounded"));
  j["options"]["lambda"] = json::parse(R"({"schedule": "sometimes"})");
  EXPECT_EQ(field_of(j), "options.lambda.schedule");
}

TEST(Experiments, CollapseDemoRows) {
  const json j = json::parse(R"({
    "kind": "collapse-demo", "model": {"weights": [0.5, 0.5], "means": [-2.0, 2.0], "sigmas": [1.0, 1.0]},
    "n_grid": [200], "replicates": 1, "seed": 1, "options": {"lambda": 0.1, "u_grid_points": 2001}
  })");
  const auto rows = run_experiment(parse_config(j));
  EXPECT_NEAR(find_value(rows, 200, 0, "unpenalized_slope"), 1.0, 0.1);
  EXPECT_EQ(find_value(rows, 200, 0, "penalized_interior_max"), 1.0);
  EXPECT_EQ(find_value(rows, 200, 0, "large_lambda_argmax_u"), 0.0);
  EXPECT_LE(find_value(rows, 0, kAggregate, "spike_bonus_grid_error[lambda=0.25]"), 1e-8);
}
