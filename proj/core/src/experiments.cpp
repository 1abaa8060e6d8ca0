#include "foldmix/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "foldmix/bounds.hpp"
#include "foldmix/folded.hpp"
#include "foldmix/folded_asymptotics.hpp"
#include "foldmix/mixture.hpp"
#include "foldmix/mixture_fit.hpp"
#include "foldmix/random.hpp"
#include "foldmix/stats.hpp"

namespace foldmix::harness {

namespace {

using json = nlohmann::json;

constexpr double kZeroBranch = 1e-8;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(i) for i in [0, count) on a small pool; the first exception wins.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, count);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t thread_count(const ExperimentConfig& cfg) {
  const std::size_t t = get_count_or(cfg.options, "threads", "options", 0);
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string label(const std::string& base, const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return base + "[" + key + "=" + buf + "]";
}

// Collects rows for one experiment; per-replicate buffers keep emission order
// independent of scheduling.
class Sink {
 public:
  explicit Sink(const ExperimentConfig& cfg) : cfg_(cfg) {}

  void add(std::size_t n, long long rep, const std::string& stat, double value, std::uint64_t seed) {
    rows_.push_back({cfg_.id, n, rep, stat, value, seed});
  }
  void aggregate(std::size_t n, const std::string& stat, double value) {
    add(n, kAggregate, stat, value, cfg_.seed);
  }
  void global(const std::string& stat, double value) { add(0, kAggregate, stat, value, cfg_.seed); }
  void append(std::vector<ReportRow>&& rows) {
    for (auto& r : rows) rows_.push_back(std::move(r));
  }
  Report finish() {
    check_unique(rows_);
    return std::move(rows_);
  }

 private:
  const ExperimentConfig& cfg_;
  std::vector<ReportRow> rows_;
};

struct ReplicateRows {
  std::vector<ReportRow> rows;
  void add(const ExperimentConfig& cfg, std::size_t n, std::size_t r, const std::string& stat,
           double value, std::uint64_t seed) {
    rows.push_back({cfg.id, n, static_cast<long long>(r), stat, value, seed});
  }
};

FoldedParams folded_model(const json& model, const std::string& path) {
  try {
    return FoldedParams(get_number(model, "mu", path), get_number(model, "sigma", path));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

MixtureParams mixture_model(const json& model, const std::string& path) {
  try {
    return MixtureParams(get_numbers(model, "weights", path), get_numbers(model, "means", path),
                         get_numbers(model, "sigmas", path));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

FitConfig fit_config(const json& options) {
  const json& f = get_object_or_empty(options, "fit", "options");
  FitConfig c;
  c.restarts = get_count_or(f, "restarts", "options.fit", c.restarts);
  c.max_iterations = get_count_or(f, "max_iterations", "options.fit", c.max_iterations);
  c.em_tolerance = get_number_or(f, "em_tolerance", "options.fit", c.em_tolerance);
  c.polish_steps = get_count_or(f, "polish_steps", "options.fit", c.polish_steps);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("options.fit", e.what());
  }
  return c;
}

ParameterBox folded_box(const json& obj, const std::string& path, ParameterBox fallback) {
  ParameterBox b{get_number_or(obj, "mu_min", path, fallback.mu_min),
                 get_number_or(obj, "mu_max", path, fallback.mu_max),
                 get_number_or(obj, "sigma_min", path, fallback.sigma_min),
                 get_number_or(obj, "sigma_max", path, fallback.sigma_max)};
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return b;
}

double log_slope(const std::vector<std::size_t>& ns, const std::vector<double>& values) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(values[i] > 0.0)) return kNaN;
    x.push_back(std::log(static_cast<double>(ns[i])));
    y.push_back(std::log(values[i]));
  }
  return x.size() >= 2 ? ls_slope(x, y) : kNaN;
}

double fraction(const std::vector<double>& flags) {
  double s = 0.0;
  for (double f : flags) s += f;
  return flags.empty() ? kNaN : s / static_cast<double>(flags.size());
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double limit_law_cdf(double x, double sigma0) {
  if (x < 0.0) return 0.0;
  const double m4 = gaussian_even_moment(4, 0.0, sigma0);
  const double var_y2 = m4 - std::pow(gaussian_even_moment(2, 0.0, sigma0), 2);
  const double s4 = std::pow(sigma0, 4);
  // |T| <= x  iff  Z <= x^2 E[Y^4] / (3 sigma0^4)
  return normal_cdf(x * x * m4 / (3.0 * s4) / std::sqrt(var_y2));
}

Report run_rate_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kFoldedRate) throw ConfigError("kind", "expected folded-rate");
  const FoldedParams theta0 = folded_model(cfg.model, "model");
  FoldedFitOptions fo;
  fo.scan_points = get_count_or(cfg.options, "scan_points", "options", fo.scan_points);
  fo.lo_factor = get_number_or(cfg.options, "lo_factor", "options", fo.lo_factor);
  fo.hi_factor = get_number_or(cfg.options, "hi_factor", "options", fo.hi_factor);
  if (fo.scan_points < 2) throw ConfigError("options.scan_points", "must be >= 2");
  const bool diag = get_bool_or(cfg.options, "sigma0_diagnostic", "options", true);
  const std::size_t threads = thread_count(cfg);

  Sink sink(cfg);
  std::vector<double> med_mu, med_sd, q75_mu, med_mu0;
  for (std::size_t n : cfg.n_grid) {
    std::vector<ReplicateRows> reps(cfg.replicates);
    std::vector<double> amu(cfg.replicates, kNaN), asd(cfg.replicates, kNaN),
        zero(cfg.replicates, kNaN), amu0(cfg.replicates, kNaN);
    parallel_for(cfg.replicates, threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const FoldedSample s = sample_folded(theta0, n, seed);
      const FoldedFitReport fit = fit_folded(s, fo);
      auto& out = reps[r];
      if (fit.degenerate) {
        out.add(cfg, n, r, "error.degenerate_sample", 1.0, seed);
        return;
      }
      // mu is identified only up to sign
      amu[r] = std::abs(std::abs(fit.mu_hat) - std::abs(theta0.mu));
      asd[r] = std::abs(fit.sigma_hat - theta0.sigma);
      zero[r] = fit.mu_hat < kZeroBranch ? 1.0 : 0.0;
      out.add(cfg, n, r, "abs_mu_error", amu[r], seed);
      out.add(cfg, n, r, "abs_sigma_error", asd[r], seed);
      out.add(cfg, n, r, "mu_hat_zero", zero[r], seed);
      out.add(cfg, n, r, "crossings_found", static_cast<double>(fit.crossings_found), seed);
      if (diag) {
        amu0[r] = std::abs(mu_hat(theta0.sigma, s) - std::abs(theta0.mu));
        out.add(cfg, n, r, "abs_mu_error_sigma0", amu0[r], seed);
      }
    });
    auto finite = [](const std::vector<double>& v) {
      std::vector<double> o;
      for (double x : v) {
        if (std::isfinite(x)) o.push_back(x);
      }
      return o;
    };
    for (auto& rr : reps) sink.append(std::move(rr.rows));
    const auto fm = finite(amu), fs = finite(asd), fz = finite(zero);
    if (fm.empty()) throw std::runtime_error("folded-rate: every replicate was degenerate");
    med_mu.push_back(median(fm));
    med_sd.push_back(median(fs));
    q75_mu.push_back(quantile(fm, 0.75));
    sink.aggregate(n, "median_abs_mu_error", med_mu.back());
    sink.aggregate(n, "median_abs_sigma_error", med_sd.back());
    sink.aggregate(n, "q75_abs_mu_error", q75_mu.back());
    sink.aggregate(n, "zero_fraction", fraction(fz));
    if (diag) {
      med_mu0.push_back(median(finite(amu0)));
      sink.aggregate(n, "median_abs_mu_error_sigma0", med_mu0.back());
    }
  }
  if (cfg.n_grid.size() >= 2) {
    sink.global("slope_log_median_abs_mu_error", log_slope(cfg.n_grid, med_mu));
    sink.global("slope_log_median_abs_sigma_error", log_slope(cfg.n_grid, med_sd));
    sink.global("slope_log_q75_abs_mu_error", log_slope(cfg.n_grid, q75_mu));
    if (diag) sink.global("slope_log_median_abs_mu_error_sigma0", log_slope(cfg.n_grid, med_mu0));
  }
  return sink.finish();
}

Report run_limit_law_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kFoldedLimitLaw) throw ConfigError("kind", "expected folded-limit-law");
  const FoldedParams theta0 = folded_model(cfg.model, "model");
  if (theta0.mu != 0.0) throw ConfigError("model.mu", "limit law requires the kink");
  const bool joint = get_bool_or(cfg.options, "joint_diagnostic", "options", false);
  FoldedFitOptions fo;
  fo.scan_points = get_count_or(cfg.options, "scan_points", "options", fo.scan_points);
  const std::size_t threads = thread_count(cfg);
  const double sigma0 = theta0.sigma;
  auto cdf = [sigma0](double x) { return limit_law_cdf(x, sigma0); };
  auto cdf_left = [sigma0](double x) { return x <= 0.0 ? 0.0 : limit_law_cdf(x, sigma0); };
  const double atoms[1] = {0.0};

  Sink sink(cfg);
  for (std::size_t n : cfg.n_grid) {
    std::vector<ReplicateRows> reps(cfg.replicates);
    std::vector<double> t(cfg.replicates), z(cfg.replicates), tj(cfg.replicates), zj(cfg.replicates);
    const double scale = std::pow(static_cast<double>(n), 0.25);
    parallel_for(cfg.replicates, threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const FoldedSample s = sample_folded(theta0, n, seed);
      // maximizer of the rescaled contrast l_n(n^{-1/4} t, sigma0) - l_n(0, sigma0)
      const double m = mu_hat(sigma0, s);
      t[r] = scale * m;
      z[r] = m < kZeroBranch ? 1.0 : 0.0;
      reps[r].add(cfg, n, r, "t_n", t[r], seed);
      reps[r].add(cfg, n, r, "zero_branch", z[r], seed);
      if (joint) {
        const FoldedFitReport fit = fit_folded(s, fo);
        tj[r] = scale * fit.mu_hat;
        zj[r] = fit.mu_hat < kZeroBranch ? 1.0 : 0.0;
        reps[r].add(cfg, n, r, "t_n_joint", tj[r], seed);
        reps[r].add(cfg, n, r, "zero_branch_joint", zj[r], seed);
      }
    });
    for (auto& rr : reps) sink.append(std::move(rr.rows));
    // atoms of the sample at the zero branch are exact zeros
    for (double& v : t) {
      if (v < kZeroBranch * scale) v = 0.0;
    }
    sink.aggregate(n, "ks_distance", ks_distance(t, cdf, cdf_left, atoms));
    sink.aggregate(n, "zero_fraction", fraction(z));
    if (joint) {
      for (double& v : tj) {
        if (v < kZeroBranch * scale) v = 0.0;
      }
      sink.aggregate(n, "ks_distance_joint", ks_distance(tj, cdf, cdf_left, atoms));
      sink.aggregate(n, "zero_fraction_joint", fraction(zj));
    }
  }
  return sink.finish();
}

namespace {

struct SieveSchedule {
  bool growing = false;
  double m = 3.0;
  double epsilon = 0.05;
  double m_offset = 1.0;
  double m_scale = 1.0;
  double eps_scale = 0.2;

  SieveSpec at(std::size_t n, std::size_t k) const {
    if (!growing) return {k, m, epsilon};
    const double l = std::log10(static_cast<double>(n));
    return {k, m_offset + m_scale * l, eps_scale / l};
  }
};

SieveSchedule sieve_schedule(const json& options) {
  SieveSchedule s;
  const json& g = get_object_or_empty(options, "growing_sieve", "options");
  if (!g.empty()) {
    s.growing = true;
    s.m_offset = get_number_or(g, "m_offset", "options.growing_sieve", s.m_offset);
    s.m_scale = get_number_or(g, "m_scale", "options.growing_sieve", s.m_scale);
    s.eps_scale = get_number_or(g, "eps_scale", "options.growing_sieve", s.eps_scale);
    return s;
  }
  const json& f = get_object_or_empty(options, "sieve", "options");
  s.m = get_number_or(f, "m", "options.sieve", s.m);
  s.epsilon = get_number_or(f, "epsilon", "options.sieve", s.epsilon);
  return s;
}

}  // namespace

Report run_consistency_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kMixtureConsistency) {
    throw ConfigError("kind", "expected mixture-consistency");
  }
  const MixtureParams theta0 = mixture_model(cfg.model, "model");
  const std::size_t k = theta0.k();
  const SieveSchedule sched = sieve_schedule(cfg.options);
  const FitConfig base_fit = fit_config(cfg.options);
  const std::size_t threads = thread_count(cfg);
  {
    const SieveSpec first = sched.at(std::max<std::size_t>(cfg.n_grid.front(), 2), k);
    try {
      first.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(sched.growing ? "options.growing_sieve" : "options.sieve", e.what());
    }
    if (!first.contains(theta0)) throw ConfigError("model", "theta0 outside sieve");
  }

  Sink sink(cfg);
  std::vector<std::size_t> used_n;
  std::vector<double> med;
  for (std::size_t n : cfg.n_grid) {
    if (n < k) {
      sink.aggregate(n, "error.n_below_k", static_cast<double>(n));
      continue;
    }
    const SieveSpec sieve = sched.at(n, k);
    sieve.validate();
    std::vector<ReplicateRows> reps(cfg.replicates);
    std::vector<double> d(cfg.replicates), cert(cfg.replicates);
    parallel_for(cfg.replicates, threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const std::vector<double> x = sample_mixture(theta0, n, seed);
      FitConfig fc = base_fit;
      fc.seed = seed;
      const MixtureFitResult fit = fit_sieve_mle(x, sieve, fc);
      d[r] = d_min(fit.theta_hat, theta0).value;
      cert[r] = fit.certified ? 1.0 : 0.0;
      const double truth = mixture_loglik(x, project_to_sieve(theta0, sieve));
      auto& out = reps[r];
      out.add(cfg, n, r, "d_min", d[r], seed);
      out.add(cfg, n, r, "objective", fit.objective, seed);
      out.add(cfg, n, r, "objective_minus_truth", fit.objective - truth, seed);
      out.add(cfg, n, r, "certified", cert[r], seed);
      out.add(cfg, n, r, "converged", fit.converged ? 1.0 : 0.0, seed);
    });
    for (auto& rr : reps) sink.append(std::move(rr.rows));
    used_n.push_back(n);
    med.push_back(median(d));
    sink.aggregate(n, "sieve_m", sieve.m);
    sink.aggregate(n, "sieve_epsilon", sieve.epsilon);
    sink.aggregate(n, "median_d_min", med.back());
    sink.aggregate(n, "certified_fraction", fraction(cert));
  }
  if (med.size() >= 2) sink.global("median_ratio_last_first", med.back() / med.front());
  return sink.finish();
}

Report run_pmle_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kPmleConsistency) throw ConfigError("kind", "expected pmle-consistency");
  const MixtureParams theta0 = mixture_model(cfg.model, "model");
  const std::size_t k = theta0.k();
  const FitConfig base_fit = fit_config(cfg.options);
  const std::size_t threads = thread_count(cfg);

  const json& lam = get_object_or_empty(cfg.options, "lambda", "options");
  const std::string schedule = get_string_or(lam, "schedule", "options.lambda", "fixed");
  double fixed = 0.0, c = 1.0, power = -0.5;
  if (schedule == "fixed") {
    fixed = get_number(lam, "value", "options.lambda");
    if (!(fixed > 0.0)) throw ConfigError("options.lambda.value", "must be > 0");
  } else if (schedule == "power") {
    c = get_number_or(lam, "c", "options.lambda", c);
    power = get_number(lam, "power", "options.lambda");
    if (!(c > 0.0)) throw ConfigError("options.lambda.c", "must be > 0");
  } else {
    throw ConfigError("options.lambda.schedule", "expected 'fixed' or 'power'");
  }
  auto lambda_at = [&](std::size_t n) {
    return schedule == "fixed" ? fixed : c * std::pow(static_cast<double>(n), power);
  };
  const json& loc = get_object_or_empty(cfg.options, "localization_sieve", "options");
  const SieveSpec loc_sieve{k, get_number_or(loc, "m", "options.localization_sieve", 3.0),
                            get_number_or(loc, "epsilon", "options.localization_sieve", 0.01)};
  try {
    loc_sieve.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("options.localization_sieve", e.what());
  }

  Sink sink(cfg);
  std::vector<double> med;
  for (std::size_t n : cfg.n_grid) {
    if (n < k) {
      sink.aggregate(n, "error.n_below_k", static_cast<double>(n));
      continue;
    }
    const double lambda = lambda_at(n);
    std::vector<ReplicateRows> reps(cfg.replicates);
    std::vector<double> d(cfg.replicates), inside(cfg.replicates), cert(cfg.replicates);
    parallel_for(cfg.replicates, threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const std::vector<double> x = sample_mixture(theta0, n, seed);
      FitConfig fc = base_fit;
      fc.seed = seed;
      const MixtureFitResult fit = fit_pmle(x, k, PenaltySpec{lambda}, fc);
      d[r] = d_min(fit.theta_hat, theta0).value;
      inside[r] = loc_sieve.contains(fit.theta_hat) ? 1.0 : 0.0;
      cert[r] = fit.certified ? 1.0 : 0.0;
      auto& out = reps[r];
      out.add(cfg, n, r, "d_min", d[r], seed);
      out.add(cfg, n, r, "objective", fit.objective, seed);
      out.add(cfg, n, r, "in_localization_sieve", inside[r], seed);
      out.add(cfg, n, r, "certified", cert[r], seed);
    });
    for (auto& rr : reps) sink.append(std::move(rr.rows));
    med.push_back(median(d));
    sink.aggregate(n, "lambda", lambda);
    sink.aggregate(n, "n_lambda", static_cast<double>(n) * lambda);
    sink.aggregate(n, "median_d_min", med.back());
    sink.aggregate(n, "localization_frequency", fraction(inside));
    sink.aggregate(n, "certified_fraction", fraction(cert));
  }
  if (schedule == "power" && power <= -1.0) {
    // n lambda_n stays bounded: the vanishing-penalty hypotheses fail
    sink.global("warning.n_lambda_bounded", power);
  }
  if (med.size() >= 2) sink.global("median_ratio_last_first", med.back() / med.front());
  return sink.finish();
}

Report run_ulln_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kUlln) throw ConfigError("kind", "expected ulln");
  const FoldedParams law = folded_model(cfg.model, "model");
  const ParameterBox box =
      folded_box(get_object_or_empty(cfg.options, "box", "options"), "options.box", {-1.0, 1.0, 0.5, 2.0});
  const double eps = get_number_or(cfg.options, "epsilon", "options", 0.5);
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("options.epsilon", "must lie in (0, 1)");
  QuadratureSpec quad;
  quad.nodes = get_count_or(cfg.options, "quadrature_nodes", "options", quad.nodes);
  const std::size_t eval_points = get_count_or(cfg.options, "evaluation_net_points", "options", 10);
  if (eval_points < 2) throw ConfigError("options.evaluation_net_points", "must be >= 2");
  const std::size_t threads = thread_count(cfg);

  const FoldedEnvelopeConstants env = folded_envelopes(box);
  const EnvelopeMoments mom = envelope_moments(box, law, quad);
  const double delta = eps / (6.0 * mom.m1);
  const double M = net_cardinality(box, delta);

  // Evaluation net: an axis grid of eval_points^2 parameters, a proxy for the
  // sup over the box.
  std::vector<FoldedParams> net;
  for (std::size_t i = 0; i < eval_points; ++i) {
    for (std::size_t j = 0; j < eval_points; ++j) {
      const double u = static_cast<double>(i) / static_cast<double>(eval_points - 1);
      const double v = static_cast<double>(j) / static_cast<double>(eval_points - 1);
      net.emplace_back(box.mu_min + u * (box.mu_max - box.mu_min),
                       box.sigma_min + v * (box.sigma_max - box.sigma_min));
    }
  }
  std::vector<double> pop(net.size());
  for (std::size_t j = 0; j < net.size(); ++j) pop[j] = folded_population_loglik(net[j], law, quad);

  Sink sink(cfg);
  std::vector<double> med;
  for (std::size_t n : cfg.n_grid) {
    const UllnBudget b = ulln_bound(mom.m1, mom.m2, mom.D, M, static_cast<double>(n), eps);
    std::vector<ReplicateRows> reps(cfg.replicates);
    std::vector<double> dev(cfg.replicates), viol(cfg.replicates);
    parallel_for(cfg.replicates, threads, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const FoldedSample s = sample_folded(law, n, seed);
      dev[r] = empirical_sup_deviation(s, net, pop);
      viol[r] = dev[r] > eps ? 1.0 : 0.0;
      reps[r].add(cfg, n, r, "sup_deviation", dev[r], seed);
      reps[r].add(cfg, n, r, "violation", viol[r], seed);
    });
    for (auto& rr : reps) sink.append(std::move(rr.rows));
    med.push_back(median(dev));
    sink.aggregate(n, "bound", b.bound);
    sink.aggregate(n, "bound_lt_one", b.bound < 1.0 ? 1.0 : 0.0);
    sink.aggregate(n, "violation_frequency", fraction(viol));
    sink.aggregate(n, "median_sup_deviation", med.back());
  }

  // sup_theta E[l(Y; theta)^2] <= D at random box points
  std::size_t d_viol = 0;
  RandomStream rng(derive_seed(cfg.seed, cfg.id, 0, 0));
  for (int i = 0; i < 20; ++i) {
    const FoldedParams th(rng.uniform(box.mu_min, box.mu_max), rng.uniform(box.sigma_min, box.sigma_max));
    double e2 = 0.0;
    for_each_node(0.0, 12.0 * (std::abs(law.mu) + law.sigma), quad, [&](double y, double w) {
      const double l = folded_log_density(y, th);
      e2 += w * std::exp(folded_log_density(y, law)) * l * l;
    });
    if (e2 > mom.D) ++d_viol;
  }

  sink.global("C2", env.C2);
  sink.global("B_K", env.B_K);
  sink.global("m1", mom.m1);
  sink.global("m2", mom.m2);
  sink.global("D", mom.D);
  sink.global("epsilon", eps);
  sink.global("delta", delta);
  sink.global("net_cardinality", M);
  sink.global("evaluation_net_size", static_cast<double>(net.size()));
  sink.global("D_domination_violations", static_cast<double>(d_viol));
  if (med.size() >= 2) sink.global("median_ratio_first_last", med.front() / med.back());
  return sink.finish();
}

Report run_collapse_demo(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kCollapseDemo) throw ConfigError("kind", "expected collapse-demo");
  const MixtureParams theta0 = mixture_model(cfg.model, "model");
  if (theta0.k() < 2) throw ConfigError("model", "spike path needs k >= 2");
  std::vector<double> ladder = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  if (cfg.options.contains("t_ladder")) ladder = get_numbers(cfg.options, "t_ladder", "options");
  const double slope_lo = get_number_or(cfg.options, "slope_t_min", "options", 1e-6);
  const double slope_hi = get_number_or(cfg.options, "slope_t_max", "options", 1e-2);
  const double lambda = get_number_or(cfg.options, "lambda", "options", 0.1);
  const double lambda_large = get_number_or(cfg.options, "lambda_large", "options", 1e6);
  const double t_min = get_number_or(cfg.options, "t_min", "options", 1e-8);
  const std::size_t u_points = get_count_or(cfg.options, "u_grid_points", "options", 4001);
  std::vector<double> bonus_lambdas = {0.25, 0.5, 0.1, 0.01};
  if (cfg.options.contains("spike_lambdas")) {
    bonus_lambdas = get_numbers(cfg.options, "spike_lambdas", "options");
  }
  if (!(lambda > 0.0) || !(lambda_large > 0.0)) throw ConfigError("options.lambda", "must be > 0");
  if (!(t_min > 0.0 && t_min < 1.0)) throw ConfigError("options.t_min", "must lie in (0, 1)");
  if (u_points < 3) throw ConfigError("options.u_grid_points", "must be >= 3");
  if (!(slope_lo > 0.0 && slope_lo < slope_hi && slope_hi <= 1.0 && t_min < slope_hi)) {
    throw ConfigError("options.slope_t_max", "need 0 < slope_t_min < slope_t_max <= 1 and t_min < slope_t_max");
  }
  for (double t : ladder) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("options.t_ladder", "entries must lie in (0, 1]");
  }

  Sink sink(cfg);
  for (std::size_t n : cfg.n_grid) {
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      const std::uint64_t seed = derive_seed(cfg.seed, cfg.id, n, r);
      const std::vector<double> x = sample_mixture(theta0, n, seed);
      const std::size_t i = most_isolated_index(x);
      const auto rep = static_cast<long long>(r);
      sink.add(n, rep, "spike_index", static_cast<double>(i), seed);
      std::vector<double> sx, sy;
      for (double t : ladder) {
        const double v = spike_path_loglik(x, i, t, theta0);
        sink.add(n, rep, label("path_loglik", "t", t), v, seed);
        if (t >= slope_lo && t <= slope_hi) {
          sx.push_back(-std::log(t));
          sy.push_back(v);
        }
      }
      sink.add(n, rep, "unpenalized_slope", sx.size() >= 2 ? ls_slope(sx, sy) : kNaN, seed);

      // Penalized search runs over the collapse regime u in [-log slope_t_max, -log t_min],
      // where only x_i still feels the spike; above it neighbours dominate the path.
      // The large-lambda and full-path searches start at u = 0.
      const double u_max = -std::log(t_min);
      const double u_window = -std::log(slope_hi);
      auto argmax_u = [&](double lam, double u_lo) {
        double best = -std::numeric_limits<double>::infinity();
        double arg = u_lo;
        for (std::size_t g = 0; g < u_points; ++g) {
          const double u = u_lo + (u_max - u_lo) * static_cast<double>(g) / static_cast<double>(u_points - 1);
          const double v = spike_path_penalized(x, i, std::exp(-u), theta0, lam);
          if (v > best) best = v, arg = u;
        }
        return arg;
      };
      const double grid_step = (u_max - u_window) / static_cast<double>(u_points - 1);
      const double u_hat = argmax_u(lambda, u_window);
      const bool interior = u_hat > u_window + 0.5 * grid_step && u_hat < u_max - 0.5 * grid_step;
      sink.add(n, rep, "penalized_argmax_u", u_hat, seed);
      sink.add(n, rep, "penalized_interior_max", interior ? 1.0 : 0.0, seed);
      sink.add(n, rep, "penalized_grid_step", grid_step, seed);
      sink.add(n, rep, "spike_bonus_u_star", spike_bonus_bound(lambda).u_star, seed);
      sink.add(n, rep, "full_path_argmax_u", argmax_u(lambda, 0.0), seed);
      sink.add(n, rep, "large_lambda_argmax_u", argmax_u(lambda_large, 0.0), seed);
      const double tail = spike_path_penalized(x, i, t_min, theta0, lambda);
      const double peak = spike_path_penalized(x, i, std::exp(-u_hat), theta0, lambda);
      sink.add(n, rep, "penalized_drop_to_t_min", peak - tail, seed);
    }
  }
  for (double lam : bonus_lambdas) {
    if (!(lam > 0.0)) throw ConfigError("options.spike_lambdas", "entries must be > 0");
    const SpikeBonus sb = spike_bonus_bound(lam);
    const std::size_t pts = 200001;
    double best = -std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (std::size_t g = 0; g < pts; ++g) {
      const double u = 2.0 * sb.u_star * static_cast<double>(g) / static_cast<double>(pts - 1);
      const double v = u - lam * u * u;
      if (v > best) best = v, arg = u;
    }
    sink.global(label("spike_bonus_bound", "lambda", lam), sb.bound);
    sink.global(label("spike_bonus_u_star", "lambda", lam), sb.u_star);
    sink.global(label("spike_bonus_grid_error", "lambda", lam), std::abs(best - sb.bound));
    sink.global(label("spike_bonus_argmax_error", "lambda", lam), std::abs(arg - sb.u_star));
  }
  return sink.finish();
}

Report run_kl_gap_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kKlGap) throw ConfigError("kind", "expected kl-gap");
  std::vector<double> deltas = {0.25, 0.5, 1.0};
  if (cfg.options.contains("deltas")) deltas = get_numbers(cfg.options, "deltas", "options");
  QuadratureSpec quad;
  quad.nodes = get_count_or(cfg.options, "quadrature_nodes", "options", quad.nodes);
  Sink sink(cfg);

  auto emit = [&](const std::string& prefix, const std::vector<KlGapReport>& reps) {
    bool monotone = true;
    bool positive = true;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const KlGapReport& r = reps[i];
      sink.global(label(prefix + ".eta", "delta", r.delta), r.eta);
      for (std::size_t c = 0; c < r.argmax_theta.size(); ++c) {
        sink.global(label(prefix + ".argmax_" + std::to_string(c), "delta", r.delta), r.argmax_theta[c]);
      }
      if (i > 0 && r.delta >= reps[i - 1].delta && r.eta < reps[i - 1].eta) monotone = false;
      if (r.delta > 0.0 && !(r.eta > 0.0)) positive = false;
    }
    sink.global(prefix + ".max_excess", reps.front().max_excess);
    sink.global(prefix + ".grid_step", reps.front().grid_step);
    sink.global(prefix + ".grid_points", static_cast<double>(reps.front().grid_points));
    sink.global(prefix + ".eta_nondecreasing", monotone ? 1.0 : 0.0);
    sink.global(prefix + ".eta_positive", positive ? 1.0 : 0.0);
  };

  const json& fm = get_object_or_empty(cfg.model, "folded", "model");
  if (!fm.empty()) {
    const FoldedParams theta0 = folded_model(fm, "model.folded");
    const json& fr = get_object_or_empty(cfg.options, "folded_region", "options");
    FoldedKlRegion region;
    region.box = folded_box(fr, "options.folded_region", {-3.0, 3.0, 0.3, 3.0});
    region.points_per_axis = get_count_or(fr, "points_per_axis", "options.folded_region", 201);
    try {
      emit("folded", folded_kl_gap(region, deltas, theta0, quad));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("options.folded_region", e.what());
    }
  }
  const json& mm = get_object_or_empty(cfg.model, "mixture", "model");
  if (!mm.empty()) {
    const MixtureParams theta0 = mixture_model(mm, "model.mixture");
    const json& mr = get_object_or_empty(cfg.options, "mixture_region", "options");
    const std::string p = "options.mixture_region";
    MixtureKlRegion region;
    region.k = theta0.k();
    region.weight_lo = get_number_or(mr, "weight_lo", p, region.weight_lo);
    region.mean_lo = get_number_or(mr, "mean_lo", p, region.mean_lo);
    region.mean_hi = get_number_or(mr, "mean_hi", p, region.mean_hi);
    region.sigma_lo = get_number_or(mr, "sigma_lo", p, region.sigma_lo);
    region.sigma_hi = get_number_or(mr, "sigma_hi", p, region.sigma_hi);
    region.weight_steps = get_count_or(mr, "weight_steps", p, region.weight_steps);
    region.mean_points = get_count_or(mr, "mean_points", p, region.mean_points);
    region.sigma_points = get_count_or(mr, "sigma_points", p, region.sigma_points);
    try {
      emit("mixture", mixture_kl_gap(region, deltas, theta0, quad));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p, e.what());
    }
  }
  if (fm.empty() && mm.empty()) throw ConfigError("model", "expected 'folded' and/or 'mixture'");
  return sink.finish();
}

namespace {

MixtureParams random_sieve_point(const SieveSpec& s, RandomStream& rng) {
  MixtureParams p;
  p.means.resize(s.k);
  p.sigmas.resize(s.k);
  p.weights.resize(s.k);
  double total = 0.0;
  for (std::size_t j = 0; j < s.k; ++j) {
    p.means[j] = rng.uniform(-s.m, s.m);
    p.sigmas[j] = std::exp(rng.uniform(-s.m, s.m));
    p.weights[j] = -std::log(rng.uniform());  // Dirichlet(1) on the free mass
    total += p.weights[j];
  }
  const double free_mass = 1.0 - static_cast<double>(s.k) * s.epsilon;
  for (double& w : p.weights) w = s.epsilon + free_mass * w / total;
  return p;
}

}  // namespace

Report run_bounds_audit(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::kBoundsAudit) throw ConfigError("kind", "expected bounds-audit");
  const std::size_t draws = get_count_or(cfg.options, "draws", "options", 10000);
  const double slack = get_number_or(cfg.options, "relative_slack", "options", 1e-12);
  const ParameterBox box =
      folded_box(get_object_or_empty(cfg.options, "box", "options"), "options.box", {-1.0, 1.0, 0.5, 2.0});
  const double y_max = get_number_or(cfg.options, "y_max", "options", 20.0);
  const double x_max = get_number_or(cfg.options, "x_max", "options", 10.0);
  std::vector<SieveSpec> sieves = {{2, 1.0, 0.1}, {3, 2.0, 0.05}};
  if (cfg.options.contains("sieves")) {
    sieves.clear();
    const json& arr = cfg.options.at("sieves");
    if (!arr.is_array()) throw ConfigError("options.sieves", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "options.sieves[" + std::to_string(i) + "]";
      SieveSpec s{get_count_or(arr[i], "k", p, 2), get_number(arr[i], "m", p), get_number(arr[i], "epsilon", p)};
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(p, e.what());
      }
      sieves.push_back(s);
    }
  }
  auto exceeds = [slack](double value, double bound) { return value > bound * (1.0 + slack); };
  Sink sink(cfg);

  {
    const FoldedEnvelopeConstants env = folded_envelopes(box);
    RandomStream rng(derive_seed(cfg.seed, cfg.id, 0, 0));
    std::size_t vf = 0, vg = 0, vh = 0;
    double rf = 0, rg = 0, rh = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      const FoldedParams th(rng.uniform(box.mu_min, box.mu_max), rng.uniform(box.sigma_min, box.sigma_max));
      const double y = rng.uniform(0.0, y_max);
      const double l = std::abs(folded_log_density(y, th));
      const ScoreVector s = score_vector(y, th);
      const double g = std::hypot(s.d_mu, s.d_sigma);
      const Hessian2 h = hessian_matrix(y, th);
      const double hn = std::sqrt(h.mm * h.mm + 2.0 * h.ms * h.ms + h.ss * h.ss);
      vf += exceeds(l, env.function_envelope(y));
      vg += exceeds(g, env.gradient_envelope(y));
      vh += exceeds(hn, env.hessian_envelope(y));
      rf = std::max(rf, l / env.function_envelope(y));
      rg = std::max(rg, g / env.gradient_envelope(y));
      rh = std::max(rh, hn / env.hessian_envelope(y));
    }
    sink.global("folded.C1", env.C1);
    sink.global("folded.C2", env.C2);
    sink.global("folded.C3", env.C3);
    sink.global("folded.B_K", env.B_K);
    sink.global("folded.function_violations", static_cast<double>(vf));
    sink.global("folded.gradient_violations", static_cast<double>(vg));
    sink.global("folded.hessian_violations", static_cast<double>(vh));
    sink.global("folded.function_max_ratio", rf);
    sink.global("folded.gradient_max_ratio", rg);
    sink.global("folded.hessian_max_ratio", rh);
  }

  for (std::size_t si = 0; si < sieves.size(); ++si) {
    const SieveSpec& s = sieves[si];
    char name[96];
    std::snprintf(name, sizeof name, "sieve[m=%g,eps=%g,k=%zu]", s.m, s.epsilon, s.k);
    const std::string p = name;
    const MixtureEnvelopes env = envelope_constants(s);
    RandomStream rng(derive_seed(cfg.seed, cfg.id, 0, si + 1));
    std::size_t vlo = 0, vhi = 0, vlog = 0, vgrad = 0, vlip = 0;
    double rgrad = 0, rlip = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      const MixtureParams th = random_sieve_point(s, rng);
      const double x = rng.uniform(-x_max, x_max);
      const double lf = mixture_log_density(x, th);
      const double x2 = x * x;
      // sandwich in log form: log A - a x^2 <= log f <= log B - b x^2
      const double lower = env.log_A_m - env.a_m * x2;
      const double upper = env.log_B_mk - env.b_m * x2;
      vlo += lf < lower - slack * std::abs(lower);
      vhi += lf > upper + slack * std::abs(upper);
      vlog += exceeds(std::abs(lf), env.K_mk * (1.0 + x2));
      const double gn = grad_log_density(x, th).euclidean_norm();
      vgrad += exceeds(gn, env.C_mek * (1.0 + x2));
      rgrad = std::max(rgrad, gn / (env.C_mek * (1.0 + x2)));
      const MixtureParams th2 = random_sieve_point(s, rng);
      const double diff = std::abs(lf - mixture_log_density(x, th2));
      const double lip = env.C_mek * (1.0 + x2) * product_norm_distance(th, th2);
      vlip += exceeds(diff, lip);
      rlip = std::max(rlip, diff / lip);
    }
    sink.global(p + ".log_A_m", env.log_A_m);
    sink.global(p + ".a_m", env.a_m);
    sink.global(p + ".B_mk", env.B_mk);
    sink.global(p + ".b_m", env.b_m);
    sink.global(p + ".K_mk", env.K_mk);
    sink.global(p + ".C_mek", env.C_mek);
    sink.global(p + ".sandwich_lower_violations", static_cast<double>(vlo));
    sink.global(p + ".sandwich_upper_violations", static_cast<double>(vhi));
    sink.global(p + ".log_envelope_violations", static_cast<double>(vlog));
    sink.global(p + ".gradient_violations", static_cast<double>(vgrad));
    sink.global(p + ".lipschitz_violations", static_cast<double>(vlip));
    sink.global(p + ".gradient_max_ratio", rgrad);
    sink.global(p + ".lipschitz_max_ratio", rlip);
  }
  sink.global("draws_per_family", static_cast<double>(draws));
  return sink.finish();
}

Report run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::kFoldedRate: return run_rate_experiment(cfg);
    case ExperimentKind::kFoldedLimitLaw: return run_limit_law_experiment(cfg);
    case ExperimentKind::kMixtureConsistency: return run_consistency_experiment(cfg);
    case ExperimentKind::kPmleConsistency: return run_pmle_experiment(cfg);
    case ExperimentKind::kUlln: return run_ulln_experiment(cfg);
    case ExperimentKind::kCollapseDemo: return run_collapse_demo(cfg);
    case ExperimentKind::kKlGap: return run_kl_gap_experiment(cfg);
    case ExperimentKind::kBoundsAudit: return run_bounds_audit(cfg);
  }
  throw ConfigError("kind", "unhandled experiment kind");
}

}  // namespace foldmix::harness
