#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "morss/common.hpp"
#include "morss/linear.hpp"
#include "morss/logistic.hpp"
#include "morss/report.hpp"
#include "morss/restricted.hpp"
#include "morss/rng.hpp"
#include "morss/sampling.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// Synthetic data generators.
// ---------------------------------------------------------------------------

// Centers and scales to unit sample variance (denominator n-1).
inline Eigen::VectorXd standardize(const Eigen::VectorXd& y) {
  if (y.size() < 2)
    throw InvalidInputError("cannot standardize fewer than two values");
  const double mean = y.mean();
  const double ss = (y.array() - mean).square().sum();
  const double sd = std::sqrt(ss / static_cast<double>(y.size() - 1));
  if (!(sd > 0.0))
    throw InvalidInputError("cannot standardize a constant vector");
  return (y.array() - mean) / sd;
}

// p predictors sharing one latent factor: x_ij = sqrt(1-kappa^2) u_ij +
// kappa u_i,p+1, giving unit variances and pairwise correlation kappa^2.
// Draws row-major: p idiosyncratic normals then the shared one per row.
inline Eigen::MatrixXd gen_collinear_predictors(Eigen::Index n, int p,
                                                double kappa, Rng& rng) {
  if (n < 1 || p < 1) throw InvalidInputError("need n >= 1 and p >= 1");
  if (!(kappa >= 0.0 && kappa < 1.0))
    throw InvalidInputError("kappa must lie in [0, 1)");
  const double w = std::sqrt(1.0 - kappa * kappa);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
    const double shared = rng.normal();
    for (int j = 0; j < p; ++j) x(i, j) = w * x(i, j) + kappa * shared;
  }
  return x;
}

// Four predictors in two collinearity blocks: columns 0-1 load on the shared
// factor with phi, columns 2-3 with eta, so within-block correlations are
// phi^2 and eta^2 and the cross-block correlation is phi*eta.
inline Eigen::MatrixXd gen_logistic_predictors(Eigen::Index n, double phi,
                                               double eta, Rng& rng) {
  if (n < 1) throw InvalidInputError("need n >= 1");
  if (!(phi >= 0.0 && phi < 1.0) || !(eta >= 0.0 && eta < 1.0))
    throw InvalidInputError("phi and eta must lie in [0, 1)");
  const double wp = std::sqrt(1.0 - phi * phi);
  const double we = std::sqrt(1.0 - eta * eta);
  Eigen::MatrixXd x(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u[4];
    for (double& uj : u) uj = rng.normal();
    const double shared = rng.normal();
    x(i, 0) = wp * u[0] + phi * shared;
    x(i, 1) = wp * u[1] + phi * shared;
    x(i, 2) = we * u[2] + eta * shared;
    x(i, 3) = we * u[3] + eta * shared;
  }
  return x;
}

// Ranker scores correlated with a standardized response:
// R_i = rho * y_std_i + sqrt(1 - rho^2) * u_i, so Cor(R, y) = rho.
inline Eigen::VectorXd gen_linear_observer(const Eigen::VectorXd& y_std,
                                           double rho, Rng& rng) {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw InvalidInputError("observer correlation must lie in [-1, 1]");
  const double w = std::sqrt(1.0 - rho * rho);
  Eigen::VectorXd r(y_std.size());
  for (Eigen::Index i = 0; i < y_std.size(); ++i)
    r[i] = rho * y_std[i] + w * rng.normal();
  return r;
}

// Conditional score mean for a unit with y = 1 and success probability g.
inline double logistic_observer_mean(double rho, double g) {
  return rho / std::sqrt((1.0 - rho * rho) * g * (1.0 - g));
}

// Ranker scores for binary responses: R | y=0 ~ N(0, 1) and
// R | y=1 ~ N(rho / sqrt((1-rho^2) g (1-g)), 1) with g the unit's true
// success probability. g is clamped to [1e-9, 1-1e-9]; clamps are counted
// into *clamped when provided.
inline Eigen::VectorXd gen_logistic_observer(const Eigen::VectorXd& y,
                                             const Eigen::MatrixXd& x,
                                             const Eigen::VectorXd& beta0,
                                             double rho, Rng& rng,
                                             long* clamped = nullptr) {
  if (!(rho > -1.0 && rho < 1.0))
    throw InvalidInputError("observer correlation must lie in (-1, 1)");
  if (x.rows() != y.size() || x.cols() != beta0.size())
    throw InvalidInputError("observer generator shapes disagree");
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      r[i] = rng.normal();
      continue;
    }
    double g = sigmoid(x.row(i).dot(beta0));
    if (g < 1e-9 || g > 1.0 - 1e-9) {
      g = std::clamp(g, 1e-9, 1.0 - 1e-9);
      if (clamped) ++*clamped;
    }
    r[i] = logistic_observer_mean(rho, g) + rng.normal();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Summary statistics.
// ---------------------------------------------------------------------------

// Order-stable summation: the result depends only on element order, not on
// accumulation interleaving, and keeps rounding error at O(log n).
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

namespace detail {

// Quantile by linear interpolation between order statistics (the continuous
// convention with position q*(n-1)). Input must be sorted ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InvalidInputError("quantile of empty sample");
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

inline std::pair<double, double> percentile_ci(std::vector<double> values,
                                               double lo = 0.025,
                                               double hi = 0.975) {
  if (values.empty()) throw InvalidInputError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  return {detail::quantile_sorted(values, lo),
          detail::quantile_sorted(values, hi)};
}

struct Metrics {
  double mse = 0.0;
  double median_sse = 0.0;
  std::vector<double> sse;  // squared error per estimate, input order
};

inline Metrics metrics(const std::vector<Eigen::VectorXd>& estimates,
                       const Eigen::VectorXd& beta0) {
  if (estimates.empty()) throw InvalidInputError("no estimates to summarize");
  Metrics m;
  m.sse.reserve(estimates.size());
  for (const Eigen::VectorXd& b : estimates) {
    if (b.size() != beta0.size())
      throw InvalidInputError("estimate dimension disagrees with the truth");
    m.sse.push_back((b - beta0).squaredNorm());
  }
  m.mse = pairwise_sum(m.sse) / static_cast<double>(m.sse.size());
  std::vector<double> sorted = m.sse;
  std::sort(sorted.begin(), sorted.end());
  m.median_sse = detail::quantile_sorted(sorted, 0.5);
  return m;
}

// ---------------------------------------------------------------------------
// Study configuration.
// ---------------------------------------------------------------------------

// A sampling-scheme label as used in configs and reports: the base scheme
// plus whether all configured observers take part in the ranking.
struct SchemeChoice {
  std::string label;
  Scheme scheme = Scheme::Srs;
  bool all_observers = false;
};

inline SchemeChoice parse_scheme_label(const std::string& label) {
  if (label == "srs") return {label, Scheme::Srs, false};
  if (label == "rss") return {label, Scheme::Rss, false};
  if (label == "mrs") return {label, Scheme::Mrs, true};
  if (label == "mmrs") return {label, Scheme::Mmr, false};
  if (label == "mmrm" || label == "mmr") return {label, Scheme::Mmr, true};
  throw ConfigError("unknown sampling scheme '" + label + "'");
}

enum class LinearEstimator { Ls, Ridge, Liu, Mixed, MixedRidge, MixedLiu, Srr, Srl };
enum class LogisticEstimator { Ml, Ridge, Liu };

inline LinearEstimator parse_linear_estimator(const std::string& label,
                                              bool allow_restricted) {
  if (label == "ls") return LinearEstimator::Ls;
  if (label == "ridge") return LinearEstimator::Ridge;
  if (label == "liu") return LinearEstimator::Liu;
  if (allow_restricted) {
    if (label == "mixed") return LinearEstimator::Mixed;
    if (label == "mixed-ridge") return LinearEstimator::MixedRidge;
    if (label == "mixed-liu") return LinearEstimator::MixedLiu;
    if (label == "srr") return LinearEstimator::Srr;
    if (label == "srl") return LinearEstimator::Srl;
  }
  throw ConfigError("unknown estimator '" + label + "' for this study");
}

inline LogisticEstimator parse_logistic_estimator(const std::string& label) {
  if (label == "ml") return LogisticEstimator::Ml;
  if (label == "ridge") return LogisticEstimator::Ridge;
  if (label == "liu") return LogisticEstimator::Liu;
  throw ConfigError("unknown logistic estimator '" + label + "'");
}

struct LinearStudyConfig {
  int set_size = 3;  // H
  int cycles = 3;    // n; delivered sample size is N = n*H
  int predictors = 4;
  double kappa = 0.9;
  double sigma = 1.0;
  Eigen::VectorXd beta0;  // empty -> 0.25 * ones(p)
  std::vector<double> observer_rhos = {1.0, 1.0, 1.0};
  double tie_c = 1.0;
  long replications = 10000;
  std::uint64_t seed = 1;
  int threads = 1;  // 0 = all hardware threads
  std::vector<std::string> schemes = {"srs", "rss", "mrs", "mmrs", "mmrm"};
  std::vector<std::string> estimators = {"ls", "ridge", "liu"};
  HkbVariant hkb_variant = HkbVariant::SigmaSquared;

  Eigen::VectorXd resolved_beta0() const {
    if (beta0.size() > 0) return beta0;
    return Eigen::VectorXd::Constant(predictors, 0.25);
  }
};

struct RestrictedStudyConfig {
  LinearStudyConfig base;
  RestrictionSpec restriction;
  // The restriction target r is perturbed by fresh N(0, sd^2) noise in every
  // replication, shared across schemes so all designs see the same prior.
  double restriction_noise_sd = 0.03872983346207417;  // sqrt(0.0015)

  RestrictedStudyConfig() {
    base.beta0 = Eigen::VectorXd(4);
    base.beta0 << 0.6455, 0.0896, 0.1436, 0.1526;
    base.estimators = {"ls", "mixed", "mixed-ridge", "mixed-liu", "srr", "srl"};
    restriction.R = Eigen::MatrixXd(1, 4);
    restriction.R << 1.0, -2.0, -2.0, -2.0;
    restriction.r = Eigen::VectorXd::Zero(1);
    restriction.omega = Eigen::MatrixXd::Identity(1, 1);
    restriction.v = 1.0;
  }
};

struct LogisticStudyConfig {
  int set_size = 6;  // H
  int cycles = 4;    // n
  double phi = 0.95;
  double eta = 0.95;
  Eigen::VectorXd beta0;  // empty -> (-0.2, 1.3, 0.8, -0.3, -0.9)
  std::vector<double> observer_rhos = {0.95, 0.95};
  double tie_c = 0.2;
  long replications = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<std::string> schemes = {"srs", "rss", "mrs", "mmrs", "mmrm"};
  std::vector<std::string> estimators = {"ml", "ridge", "liu"};

  // Intercept plus four predictors.
  Eigen::VectorXd resolved_beta0() const {
    if (beta0.size() > 0) return beta0;
    Eigen::VectorXd b(5);
    b << -0.2, 1.3, 0.8, -0.3, -0.9;
    return b;
  }
};

// ---------------------------------------------------------------------------
// Replication engine.
// ---------------------------------------------------------------------------

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs body(rep) for rep in [0, count) on `threads` workers. Work items are
// handed out dynamically; bodies write only to their own replication's slots,
// so results are independent of the scheduling order.
template <class Fn>
inline void run_replications(long count, int threads, Fn&& body) {
  threads = std::min<long>(threads, count);
  if (threads <= 1) {
    for (long rep = 0; rep < count; ++rep) body(rep);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const long rep = next.fetch_add(1, std::memory_order_relaxed);
        if (rep >= count) return;
        try {
          body(rep);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Per-(scheme, estimator) squared errors indexed by replication; NaN marks a
// replication whose fit failed.
struct CellSlots {
  std::vector<double> sse;
  explicit CellSlots(long reps)
      : sse(static_cast<std::size_t>(reps),
            std::numeric_limits<double>::quiet_NaN()) {}
};

inline ReportCell summarize_cell(const std::string& scheme,
                                 const std::string& estimator,
                                 const std::vector<double>& slots) {
  ReportCell cell;
  cell.scheme = scheme;
  cell.estimator = estimator;
  std::vector<double> ok;
  ok.reserve(slots.size());
  for (double v : slots)
    if (std::isfinite(v)) ok.push_back(v);
  cell.replications = static_cast<long>(ok.size());
  cell.failures = static_cast<long>(slots.size() - ok.size());
  if (ok.empty()) return cell;
  cell.mse = pairwise_sum(ok) / static_cast<double>(ok.size());
  std::sort(ok.begin(), ok.end());
  cell.median_sse = quantile_sorted(ok, 0.5);
  cell.ci_lo = quantile_sorted(ok, 0.025);
  cell.ci_hi = quantile_sorted(ok, 0.975);
  return cell;
}

inline void fill_relative_efficiency(ExperimentReport& report,
                                     const std::string& baseline_estimator) {
  double base = std::numeric_limits<double>::quiet_NaN();
  for (const ReportCell& cell : report.cells)
    if (cell.scheme == "srs" && cell.estimator == baseline_estimator)
      base = cell.mse;
  if (!std::isfinite(base))
    throw NumericError("baseline (srs, " + baseline_estimator +
                       ") produced no usable replications");
  for (ReportCell& cell : report.cells) cell.re = cell.mse / base;
}

inline void validate_study_common(int h, int n, long reps, double c,
                                  const std::vector<double>& rhos,
                                  const std::vector<std::string>& schemes,
                                  const std::vector<std::string>& estimators,
                                  const std::string& baseline_estimator) {
  if (h < 1) throw ConfigError("set size H must be >= 1");
  if (n < 1) throw ConfigError("cycle count n must be >= 1");
  if (reps < 1) throw ConfigError("replications must be >= 1");
  if (!(c > 0.0)) throw ConfigError("tie width c must be positive");
  if (rhos.empty()) throw ConfigError("need at least one observer correlation");
  for (double rho : rhos)
    if (!std::isfinite(rho) || rho < -1.0 || rho > 1.0)
      throw ConfigError("observer correlations must lie in [-1, 1]");
  if (schemes.empty()) throw ConfigError("scheme list is empty");
  if (estimators.empty()) throw ConfigError("estimator list is empty");
  const bool has_srs =
      std::find(schemes.begin(), schemes.end(), "srs") != schemes.end();
  const bool has_base = std::find(estimators.begin(), estimators.end(),
                                  baseline_estimator) != estimators.end();
  if (!has_srs || !has_base)
    throw ConfigError("relative efficiencies need the (srs, " +
                      baseline_estimator + ") baseline in the study");
}

inline SchemeSpec make_scheme_spec(const SchemeChoice& choice, int h, int n,
                                   double c,
                                   const std::vector<double>& rhos) {
  SchemeSpec spec;
  spec.scheme = choice.scheme;
  spec.set_size = h;
  spec.cycles = n;
  spec.tie_c = c;
  if (choice.scheme != Scheme::Srs) {
    if (choice.all_observers)
      spec.observer_correlations = rhos;
    else
      spec.observer_correlations = {rhos.front()};
  }
  return spec;
}

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ",";
    out += labels[i];
  }
  return out;
}

inline std::string join_reals(const std::vector<double>& vals) {
  std::string out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) out += ",";
    out += format_real(vals[i]);
  }
  return out;
}

inline std::string join_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_real(v[i]);
  }
  return out;
}

inline std::string join_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += ";";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ",";
      out += format_real(m(i, j));
    }
  }
  return out;
}

// One linear-model fit dispatched by estimator label. Shrinkage constants
// come from their data-driven rules: HKB for ridge-flavoured estimators, the
// joint (k, d) rule for the Liu-type family.
inline Eigen::VectorXd fit_linear_estimator(const Dataset& data,
                                            LinearEstimator which,
                                            HkbVariant hkb,
                                            const RestrictionSpec* restr) {
  switch (which) {
    case LinearEstimator::Ls:
      return ls_fit(data).beta;
    case LinearEstimator::Ridge:
      return ridge_fit(data, select_k_hkb(data, hkb).k).beta;
    case LinearEstimator::Liu: {
      const ShrinkageParams prm = select_kd_liu(data);
      return liu_type_fit(data, prm.k, prm.d).beta;
    }
    case LinearEstimator::Mixed:
      return mixed_fit(data, *restr).beta;
    case LinearEstimator::MixedRidge:
      return mixed_ridge_fit(data, *restr, select_k_hkb(data, hkb).k).beta;
    case LinearEstimator::MixedLiu:
      return mixed_liu_fit(data, *restr, select_kd_liu(data).d).beta;
    case LinearEstimator::Srr:
      return srr_fit(data, *restr, select_k_hkb(data, hkb).k).beta;
    case LinearEstimator::Srl:
      return srl_fit(data, *restr, select_kd_liu(data).d).beta;
  }
  throw ConfigError("unhandled estimator");
}

// Shared engine for the linear and restricted studies. Each replication gets
// one independent substream per scheme (lane si+1) and, when a restriction is
// present, one shared substream (lane 0) for the restriction noise, so every
// scheme within a replication sees the same perturbed prior.
inline ExperimentReport run_linear_like(const LinearStudyConfig& cfg,
                                        const RestrictionSpec* restriction,
                                        double restriction_noise_sd,
                                        const std::string& study_label,
                                        const std::string& canonical) {
  validate_study_common(cfg.set_size, cfg.cycles, cfg.replications, cfg.tie_c,
                        cfg.observer_rhos, cfg.schemes, cfg.estimators, "ls");
  if (cfg.predictors < 1) throw ConfigError("need at least one predictor");
  if (!(cfg.kappa >= 0.0 && cfg.kappa < 1.0))
    throw ConfigError("kappa must lie in [0, 1)");
  if (!(cfg.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  const Eigen::VectorXd beta0 = cfg.resolved_beta0();
  if (beta0.size() != cfg.predictors)
    throw ConfigError("beta0 length must equal the predictor count");
  if (restriction) {
    if (!(restriction_noise_sd >= 0.0))
      throw ConfigError("restriction noise sd must be >= 0");
    try {
      validate_restriction(*restriction, cfg.predictors);
    } catch (const InvalidInputError& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<SchemeChoice> schemes;
  for (const std::string& label : cfg.schemes)
    schemes.push_back(parse_scheme_label(label));
  std::vector<LinearEstimator> estimators;
  for (const std::string& label : cfg.estimators)
    estimators.push_back(parse_linear_estimator(label, restriction != nullptr));

  const int h = cfg.set_size;
  const int n = cfg.cycles;
  const long reps = cfg.replications;
  std::vector<CellSlots> cells(schemes.size() * estimators.size(),
                               CellSlots(reps));

  auto body = [&](long rep) {
    RestrictionSpec local;
    if (restriction) {
      local = *restriction;
      Rng noise(substream_seed(cfg.seed, static_cast<std::uint64_t>(rep), 0));
      for (Eigen::Index i = 0; i < local.r.size(); ++i)
        local.r[i] += restriction_noise_sd * noise.normal();
    }
    for (std::size_t si = 0; si < schemes.size(); ++si) {
      const SchemeChoice& choice = schemes[si];
      Rng rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(rep),
                             1 + static_cast<std::uint64_t>(si)));
      const bool ranked = choice.scheme != Scheme::Srs;
      const Eigen::Index units =
          ranked ? static_cast<Eigen::Index>(n) * h * h
                 : static_cast<Eigen::Index>(n) * h;
      Population pop;
      pop.kind = ResponseKind::Continuous;
      pop.predictors =
          gen_collinear_predictors(units, cfg.predictors, cfg.kappa, rng);
      pop.response = pop.predictors * beta0;
      for (Eigen::Index i = 0; i < units; ++i)
        pop.response[i] += cfg.sigma * rng.normal();
      const SchemeSpec spec =
          make_scheme_spec(choice, h, n, cfg.tie_c, cfg.observer_rhos);
      if (ranked) {
        const Eigen::VectorXd y_std = standardize(pop.response);
        const auto n_obs =
            static_cast<Eigen::Index>(spec.observer_correlations.size());
        pop.observers.resize(units, n_obs);
        for (Eigen::Index k = 0; k < n_obs; ++k)
          pop.observers.col(k) = gen_linear_observer(
              y_std, spec.observer_correlations[static_cast<std::size_t>(k)],
              rng);
      }
      const RankedSample sample = draw_sample_sequential(pop, spec);
      for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
        try {
          const Eigen::VectorXd beta_hat =
              fit_linear_estimator(sample.dataset, estimators[ei],
                                   cfg.hkb_variant,
                                   restriction ? &local : nullptr);
          cells[si * estimators.size() + ei].sse[static_cast<std::size_t>(
              rep)] = (beta_hat - beta0).squaredNorm();
        } catch (const NumericError&) {
          // Slot stays NaN: excluded from the summary, counted as a failure.
        }
      }
    }
  };
  run_replications(reps, resolve_threads(cfg.threads), body);

  ExperimentReport report;
  report.study = study_label;
  report.seed = cfg.seed;
  report.config_digest = fnv1a_digest(canonical);
  report.design = {{"kappa", format_real(cfg.kappa)},
                   {"n", format_int(n)},
                   {"H", format_int(h)},
                   {"c", format_real(cfg.tie_c)}};
  for (std::size_t si = 0; si < schemes.size(); ++si)
    for (std::size_t ei = 0; ei < estimators.size(); ++ei)
      report.cells.push_back(
          summarize_cell(cfg.schemes[si], cfg.estimators[ei],
                         cells[si * estimators.size() + ei].sse));
  fill_relative_efficiency(report, "ls");
  return report;
}

inline std::string canonical_linear(const LinearStudyConfig& cfg) {
  return "linear;H=" + format_int(cfg.set_size) + ";n=" +
         format_int(cfg.cycles) + ";p=" + format_int(cfg.predictors) +
         ";kappa=" + format_real(cfg.kappa) + ";sigma=" +
         format_real(cfg.sigma) + ";beta0=" + join_vector(cfg.resolved_beta0()) +
         ";rhos=" + join_reals(cfg.observer_rhos) + ";c=" +
         format_real(cfg.tie_c) + ";reps=" + format_int(cfg.replications) +
         ";seed=" + std::to_string(cfg.seed) + ";schemes=" +
         join_labels(cfg.schemes) + ";estimators=" +
         join_labels(cfg.estimators) + ";hkb=" +
         (cfg.hkb_variant == HkbVariant::SigmaSquared ? "s2" : "s1");
}

}  // namespace detail

inline ExperimentReport run_linear_study(const LinearStudyConfig& cfg) {
  return detail::run_linear_like(cfg, nullptr, 0.0, "linear",
                                 detail::canonical_linear(cfg));
}

inline ExperimentReport run_restricted_study(const RestrictedStudyConfig& cfg) {
  const std::string canonical =
      "restricted;" + detail::canonical_linear(cfg.base) + ";R=" +
      detail::join_matrix(cfg.restriction.R) + ";r=" +
      detail::join_vector(cfg.restriction.r) + ";omega=" +
      detail::join_matrix(cfg.restriction.omega) + ";v=" +
      format_real(cfg.restriction.v) + ";noise_sd=" +
      format_real(cfg.restriction_noise_sd);
  return detail::run_linear_like(cfg.base, &cfg.restriction,
                                 cfg.restriction_noise_sd, "restricted",
                                 canonical);
}

inline ExperimentReport run_logistic_study(const LogisticStudyConfig& cfg) {
  detail::validate_study_common(cfg.set_size, cfg.cycles, cfg.replications,
                                cfg.tie_c, cfg.observer_rhos, cfg.schemes,
                                cfg.estimators, "ml");
  if (!(cfg.phi >= 0.0 && cfg.phi < 1.0) || !(cfg.eta >= 0.0 && cfg.eta < 1.0))
    throw ConfigError("phi and eta must lie in [0, 1)");
  for (double rho : cfg.observer_rhos)
    if (rho <= -1.0 || rho >= 1.0)
      throw ConfigError("logistic observer correlations must lie in (-1, 1)");
  const Eigen::VectorXd beta0 = cfg.resolved_beta0();
  if (beta0.size() != 5)
    throw ConfigError("logistic beta0 must have 5 entries (intercept + 4)");

  std::vector<SchemeChoice> schemes;
  for (const std::string& label : cfg.schemes)
    schemes.push_back(parse_scheme_label(label));
  std::vector<LogisticEstimator> estimators;
  for (const std::string& label : cfg.estimators)
    estimators.push_back(parse_logistic_estimator(label));

  const int h = cfg.set_size;
  const int n = cfg.cycles;
  const long reps = cfg.replications;
  std::vector<detail::CellSlots> cells(schemes.size() * estimators.size(),
                                       detail::CellSlots(reps));
  std::atomic<long> clamped_total{0};

  auto body = [&](long rep) {
    for (std::size_t si = 0; si < schemes.size(); ++si) {
      const SchemeChoice& choice = schemes[si];
      Rng rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(rep),
                             1 + static_cast<std::uint64_t>(si)));
      const bool ranked = choice.scheme != Scheme::Srs;
      const Eigen::Index units =
          ranked ? static_cast<Eigen::Index>(n) * h * h
                 : static_cast<Eigen::Index>(n) * h;
      Population pop;
      pop.kind = ResponseKind::Binary;
      const Eigen::MatrixXd x4 =
          gen_logistic_predictors(units, cfg.phi, cfg.eta, rng);
      pop.predictors.resize(units, 5);
      pop.predictors.col(0).setOnes();
      pop.predictors.rightCols(4) = x4;
      pop.response.resize(units);
      for (Eigen::Index i = 0; i < units; ++i) {
        const double g = sigmoid(pop.predictors.row(i).dot(beta0));
        pop.response[i] = rng.uniform01() < g ? 1.0 : 0.0;
      }
      const SchemeSpec spec =
          detail::make_scheme_spec(choice, h, n, cfg.tie_c, cfg.observer_rhos);
      if (ranked) {
        const auto n_obs =
            static_cast<Eigen::Index>(spec.observer_correlations.size());
        pop.observers.resize(units, n_obs);
        long clamped = 0;
        for (Eigen::Index k = 0; k < n_obs; ++k)
          pop.observers.col(k) = gen_logistic_observer(
              pop.response, pop.predictors, beta0,
              spec.observer_correlations[static_cast<std::size_t>(k)], rng,
              &clamped);
        if (clamped > 0)
          clamped_total.fetch_add(clamped, std::memory_order_relaxed);
      }
      const RankedSample sample = draw_sample_sequential(pop, spec);
      const Dataset& data = sample.dataset;

      LogisticFitResult ml;
      bool ml_ok = false;
      try {
        ml = ml_fit(data);
        ml_ok = true;
      } catch (const NumericError&) {
      }
      for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
        if (!ml_ok) continue;  // every estimator builds on the ML fit
        try {
          Eigen::VectorXd beta_hat;
          switch (estimators[ei]) {
            case LogisticEstimator::Ml:
              beta_hat = ml.beta;
              break;
            case LogisticEstimator::Ridge: {
              const ShrinkageParams prm = select_k_logistic(ml, 4);
              beta_hat = ridge_logistic_fit(data, ml, prm.k).beta;
              break;
            }
            case LogisticEstimator::Liu: {
              const ShrinkageParams k_prm = select_k_logistic(ml, 4);
              const ShrinkageParams prm = select_d_logistic(data, k_prm.k, ml);
              beta_hat = liu_logistic_fit(data, ml, prm.k, prm.d).beta;
              break;
            }
          }
          cells[si * estimators.size() + ei].sse[static_cast<std::size_t>(
              rep)] = (beta_hat - beta0).squaredNorm();
        } catch (const NumericError&) {
        }
      }
    }
  };
  detail::run_replications(reps, detail::resolve_threads(cfg.threads), body);

  const std::string canonical =
      "logistic;H=" + format_int(h) + ";n=" + format_int(n) + ";phi=" +
      format_real(cfg.phi) + ";eta=" + format_real(cfg.eta) + ";beta0=" +
      detail::join_vector(beta0) + ";rhos=" +
      detail::join_reals(cfg.observer_rhos) + ";c=" + format_real(cfg.tie_c) +
      ";reps=" + format_int(reps) + ";seed=" + std::to_string(cfg.seed) +
      ";schemes=" + detail::join_labels(cfg.schemes) + ";estimators=" +
      detail::join_labels(cfg.estimators);
  ExperimentReport report;
  report.study = "logistic";
  report.seed = cfg.seed;
  report.config_digest = fnv1a_digest(canonical);
  report.clamp_warnings = clamped_total.load();
  report.design = {{"phi", format_real(cfg.phi)},
                   {"eta", format_real(cfg.eta)},
                   {"n", format_int(n)},
                   {"H", format_int(h)},
                   {"c", format_real(cfg.tie_c)}};
  for (std::size_t si = 0; si < schemes.size(); ++si)
    for (std::size_t ei = 0; ei < estimators.size(); ++ei)
      report.cells.push_back(detail::summarize_cell(
          cfg.schemes[si], cfg.estimators[ei],
          cells[si * estimators.size() + ei].sse));
  detail::fill_relative_efficiency(report, "ml");
  return report;
}

}  // namespace morss
