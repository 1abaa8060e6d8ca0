#pragma once

#include <vector>

#include "foldmix/harness/config.hpp"
#include "foldmix/harness/report.hpp"

namespace foldmix::harness {

using Report = std::vector<ReportRow>;

// Replicate r at size n draws from derive_seed(cfg.seed, cfg.id, n, r).
// Rows come out ordered by n, then replicate, then per-n aggregates; rows with
// n == 0 close the report.
Report run_rate_experiment(const ExperimentConfig& cfg);
Report run_limit_law_experiment(const ExperimentConfig& cfg);
Report run_consistency_experiment(const ExperimentConfig& cfg);
Report run_pmle_experiment(const ExperimentConfig& cfg);
Report run_ulln_experiment(const ExperimentConfig& cfg);
Report run_collapse_demo(const ExperimentConfig& cfg);
Report run_kl_gap_experiment(const ExperimentConfig& cfg);
Report run_bounds_audit(const ExperimentConfig& cfg);

Report run_experiment(const ExperimentConfig& cfg);

// CDF of sqrt(3 sigma0^4 (Z)_+ / E[Y^4]) with Z ~ N(0, Var(Y^2)), Y folded (0, sigma0).
double limit_law_cdf(double x, double sigma0);

}  // namespace foldmix::harness
