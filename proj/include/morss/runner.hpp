#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morss/common.hpp"
#include "morss/config.hpp"
#include "morss/csv.hpp"
#include "morss/logistic.hpp"
#include "morss/report.hpp"
#include "morss/restricted.hpp"
#include "morss/sampling.hpp"
#include "morss/simulation.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// Declarative run description: one config file drives sampling, single fits,
// and the three simulation studies. The CLI front end parses flags into the
// same structure and overrides file values.
// ---------------------------------------------------------------------------

enum class RunKind { Sample, Fit, SimulateLinear, SimulateRestricted, SimulateLogistic };

inline RunKind parse_run_kind(const std::string& label) {
  if (label == "sample") return RunKind::Sample;
  if (label == "fit") return RunKind::Fit;
  if (label == "simulate-linear") return RunKind::SimulateLinear;
  if (label == "simulate-restricted") return RunKind::SimulateRestricted;
  if (label == "simulate-logistic") return RunKind::SimulateLogistic;
  throw ConfigError("unknown run kind '" + label +
                    "' (expected sample, fit, simulate-linear, "
                    "simulate-restricted, or simulate-logistic)");
}

inline const char* run_kind_label(RunKind kind) {
  switch (kind) {
    case RunKind::Sample: return "sample";
    case RunKind::Fit: return "fit";
    case RunKind::SimulateLinear: return "simulate-linear";
    case RunKind::SimulateRestricted: return "simulate-restricted";
    case RunKind::SimulateLogistic: return "simulate-logistic";
  }
  return "?";
}

struct DataConfig {
  std::filesystem::path path;
  PopulationCsvMapping mapping;
};

// Shrinkage parameter request: absent, a named data-driven rule, or a number.
struct ParamSpec {
  enum class Kind { Absent, Rule, Number };
  Kind kind = Kind::Absent;
  std::string rule;
  double value = 0.0;

  static ParamSpec parse(const std::string& text, const char* what) {
    ParamSpec out;
    if (text.empty()) return out;
    if (text == "hkb" || text == "kp1" || text == "liu") {
      out.kind = Kind::Rule;
      out.rule = text;
      return out;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, out.value);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(out.value))
      throw ConfigError(std::string(what) + ": expected a number or a rule "
                        "name (hkb, kp1, liu), got '" + text + "'");
    out.kind = Kind::Number;
    return out;
  }
};

struct SampleConfig {
  std::string scheme = "srs";
  int set_size = 1;
  int cycles = 1;
  double tie_c = 1.0;
  std::vector<double> correlations;  // empty -> 1.0 per participating observer
};

struct FitConfig {
  std::string estimator = "ls";
  ParamSpec k;
  ParamSpec d;
  bool intercept = true;  // binary fits only: prepend a column of ones
  HkbVariant hkb_variant = HkbVariant::SigmaSquared;
  std::optional<RestrictionSpec> restriction;
};

struct RunConfig {
  RunKind kind = RunKind::SimulateLinear;
  std::optional<std::uint64_t> seed;  // mandatory before run()
  std::filesystem::path output;       // empty -> derived from kind + format
  ReportFormat format = ReportFormat::Csv;
  int threads = 1;
  LinearStudyConfig linear;
  RestrictedStudyConfig restricted;
  LogisticStudyConfig logistic;
  std::optional<DataConfig> data;
  SampleConfig sample;
  FitConfig fit;
};

// ---------------------------------------------------------------------------
// Config file -> RunConfig.
// ---------------------------------------------------------------------------

namespace detail {

inline DataConfig load_data_config(const KeyValueConfig& kv) {
  DataConfig out;
  out.path = kv.require_string("data", "path");
  out.mapping.response = kv.require_string("data", "response");
  out.mapping.predictors = kv.get_string_list("data", "predictors", {});
  out.mapping.observers = kv.get_string_list("data", "observers", {});
  if (out.mapping.predictors.empty())
    throw ConfigError(kv.name() + ": [data] predictors must name at least one column");
  if (kv.has("data", "threshold")) {
    BinaryThreshold rule;
    rule.value = kv.get_real("data", "threshold", 0.0);
    const std::string dir =
        kv.get_string("data", "threshold_direction", "greater");
    if (dir == "greater") rule.greater = true;
    else if (dir == "less") rule.greater = false;
    else
      throw ConfigError(kv.name() +
                        ": [data] threshold_direction: expected greater or "
                        "less, got '" + dir + "'");
    out.mapping.threshold = rule;
  }
  return out;
}

inline std::optional<RestrictionSpec> load_restriction(
    const KeyValueConfig& kv, const std::string& section) {
  if (!kv.has(section, "restriction")) return std::nullopt;
  RestrictionSpec spec;
  spec.R = kv.get_matrix(section, "restriction", Eigen::MatrixXd());
  const std::vector<double> target =
      kv.get_real_list(section, "restriction_target", {0.0});
  spec.r = Eigen::Map<const Eigen::VectorXd>(target.data(),
                                             static_cast<Eigen::Index>(target.size()));
  spec.omega = kv.get_matrix(
      section, "restriction_omega",
      Eigen::MatrixXd::Identity(spec.R.rows(), spec.R.rows()));
  spec.v = kv.get_real(section, "v", 1.0);
  return spec;
}

inline HkbVariant parse_hkb_variant(const KeyValueConfig& kv,
                                    const std::string& section) {
  const std::string label = kv.get_string(section, "hkb_variant", "sigma2");
  if (label == "sigma2") return HkbVariant::SigmaSquared;
  if (label == "sigma") return HkbVariant::Sigma;
  throw ConfigError(kv.name() + ": [" + section +
                    "] hkb_variant: expected sigma2 or sigma, got '" + label +
                    "'");
}

inline void load_linear_keys(const KeyValueConfig& kv, LinearStudyConfig& cfg) {
  cfg.set_size = static_cast<int>(kv.get_int("simulate", "set_size", cfg.set_size));
  cfg.cycles = static_cast<int>(kv.get_int("simulate", "cycles", cfg.cycles));
  cfg.predictors =
      static_cast<int>(kv.get_int("simulate", "predictors", cfg.predictors));
  cfg.kappa = kv.get_real("simulate", "kappa", cfg.kappa);
  cfg.sigma = kv.get_real("simulate", "sigma", cfg.sigma);
  if (kv.has("simulate", "beta0")) {
    const std::vector<double> b = kv.get_real_list("simulate", "beta0", {});
    cfg.beta0 = Eigen::Map<const Eigen::VectorXd>(
        b.data(), static_cast<Eigen::Index>(b.size()));
  }
  cfg.observer_rhos =
      kv.get_real_list("simulate", "correlations", cfg.observer_rhos);
  cfg.tie_c = kv.get_real("simulate", "tie_c", cfg.tie_c);
  cfg.replications = kv.get_int("simulate", "replications", cfg.replications);
  cfg.schemes = kv.get_string_list("simulate", "schemes", cfg.schemes);
  cfg.estimators = kv.get_string_list("simulate", "estimators", cfg.estimators);
  cfg.hkb_variant = parse_hkb_variant(kv, "simulate");
}

inline void load_logistic_keys(const KeyValueConfig& kv,
                               LogisticStudyConfig& cfg) {
  cfg.set_size = static_cast<int>(kv.get_int("simulate", "set_size", cfg.set_size));
  cfg.cycles = static_cast<int>(kv.get_int("simulate", "cycles", cfg.cycles));
  cfg.phi = kv.get_real("simulate", "phi", cfg.phi);
  cfg.eta = kv.get_real("simulate", "eta", cfg.eta);
  if (kv.has("simulate", "beta0")) {
    const std::vector<double> b = kv.get_real_list("simulate", "beta0", {});
    cfg.beta0 = Eigen::Map<const Eigen::VectorXd>(
        b.data(), static_cast<Eigen::Index>(b.size()));
  }
  cfg.observer_rhos =
      kv.get_real_list("simulate", "correlations", cfg.observer_rhos);
  cfg.tie_c = kv.get_real("simulate", "tie_c", cfg.tie_c);
  cfg.replications = kv.get_int("simulate", "replications", cfg.replications);
  cfg.schemes = kv.get_string_list("simulate", "schemes", cfg.schemes);
  cfg.estimators = kv.get_string_list("simulate", "estimators", cfg.estimators);
}

}  // namespace detail

inline RunConfig load_run_config(const KeyValueConfig& kv) {
  static const std::vector<std::pair<std::string, std::set<std::string>>>
      schema = {
          {"run", {"kind", "seed", "output", "format", "threads"}},
          {"data",
           {"path", "response", "predictors", "observers", "threshold",
            "threshold_direction"}},
          {"sample", {"scheme", "set_size", "cycles", "tie_c", "correlations"}},
          {"fit",
           {"estimator", "k", "d", "intercept", "hkb_variant", "restriction",
            "restriction_target", "restriction_omega", "v"}},
          {"simulate",
           {"set_size", "cycles", "predictors", "kappa", "sigma", "beta0",
            "correlations", "tie_c", "replications", "schemes", "estimators",
            "hkb_variant", "phi", "eta", "restriction", "restriction_target",
            "restriction_omega", "v", "restriction_noise_sd"}},
      };
  kv.ensure_known(schema);

  RunConfig cfg;
  cfg.kind = parse_run_kind(kv.require_string("run", "kind"));
  if (kv.has("run", "seed")) cfg.seed = kv.get_uint64("run", "seed", 0);
  cfg.output = kv.get_string("run", "output", "");
  cfg.format = parse_report_format(kv.get_string("run", "format", "csv"));
  cfg.threads = static_cast<int>(kv.get_int("run", "threads", 1));

  if (kv.has("data", "path")) cfg.data = detail::load_data_config(kv);

  switch (cfg.kind) {
    case RunKind::Sample: {
      cfg.sample.scheme = kv.get_string("sample", "scheme", cfg.sample.scheme);
      cfg.sample.set_size =
          static_cast<int>(kv.get_int("sample", "set_size", cfg.sample.set_size));
      cfg.sample.cycles =
          static_cast<int>(kv.get_int("sample", "cycles", cfg.sample.cycles));
      cfg.sample.tie_c = kv.get_real("sample", "tie_c", cfg.sample.tie_c);
      cfg.sample.correlations =
          kv.get_real_list("sample", "correlations", cfg.sample.correlations);
      break;
    }
    case RunKind::Fit: {
      cfg.fit.estimator = kv.get_string("fit", "estimator", cfg.fit.estimator);
      cfg.fit.k = ParamSpec::parse(kv.get_string("fit", "k", ""), "[fit] k");
      cfg.fit.d = ParamSpec::parse(kv.get_string("fit", "d", ""), "[fit] d");
      cfg.fit.intercept = kv.get_bool("fit", "intercept", cfg.fit.intercept);
      cfg.fit.hkb_variant = detail::parse_hkb_variant(kv, "fit");
      cfg.fit.restriction = detail::load_restriction(kv, "fit");
      break;
    }
    case RunKind::SimulateLinear:
      detail::load_linear_keys(kv, cfg.linear);
      break;
    case RunKind::SimulateRestricted: {
      detail::load_linear_keys(kv, cfg.restricted.base);
      if (auto restr = detail::load_restriction(kv, "simulate"))
        cfg.restricted.restriction = *restr;
      cfg.restricted.restriction_noise_sd =
          kv.get_real("simulate", "restriction_noise_sd",
                      cfg.restricted.restriction_noise_sd);
      break;
    }
    case RunKind::SimulateLogistic:
      detail::load_logistic_keys(kv, cfg.logistic);
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Single-fit and sample emission.
// ---------------------------------------------------------------------------

namespace detail {

struct FitOutcome {
  std::string estimator;
  std::optional<double> k;
  std::optional<double> d;
  std::optional<double> sigma2;
  std::optional<double> condition;
  Eigen::VectorXd beta;
};

inline double resolve_fit_k(const Dataset& data, const FitConfig& fit) {
  switch (fit.k.kind) {
    case ParamSpec::Kind::Number:
      return fit.k.value;
    case ParamSpec::Kind::Rule:
      if (fit.k.rule != "hkb")
        throw ConfigError("[fit] k: rule '" + fit.k.rule +
                          "' does not apply to continuous responses");
      return select_k_hkb(data, fit.hkb_variant).k;
    case ParamSpec::Kind::Absent:
      return select_k_hkb(data, fit.hkb_variant).k;
  }
  return 0.0;
}

inline FitOutcome run_linear_fit(const Dataset& data, const FitConfig& fit) {
  const LinearEstimator which = parse_linear_estimator(fit.estimator, true);
  const bool restricted = which == LinearEstimator::Mixed ||
                          which == LinearEstimator::MixedRidge ||
                          which == LinearEstimator::MixedLiu ||
                          which == LinearEstimator::Srr ||
                          which == LinearEstimator::Srl;
  if (restricted && !fit.restriction)
    throw ConfigError("estimator '" + fit.estimator +
                      "' needs a [fit] restriction");
  FitOutcome out;
  out.estimator = fit.estimator;
  FitResult res;
  switch (which) {
    case LinearEstimator::Ls:
      res = ls_fit(data);
      break;
    case LinearEstimator::Ridge:
      res = ridge_fit(data, resolve_fit_k(data, fit));
      break;
    case LinearEstimator::Liu: {
      if (fit.d.kind == ParamSpec::Kind::Number) {
        res = liu_type_fit(data, resolve_fit_k(data, fit), fit.d.value);
      } else if (fit.d.kind == ParamSpec::Kind::Rule && fit.d.rule != "liu") {
        throw ConfigError("[fit] d: rule '" + fit.d.rule +
                          "' does not apply to continuous responses");
      } else {
        const ShrinkageParams kd = select_kd_liu(data);
        res = liu_type_fit(data, kd.k, kd.d);
      }
      break;
    }
    case LinearEstimator::Mixed:
      res = mixed_fit(data, *fit.restriction);
      break;
    case LinearEstimator::MixedRidge:
      res = mixed_ridge_fit(data, *fit.restriction, resolve_fit_k(data, fit));
      break;
    case LinearEstimator::MixedLiu: {
      const double d = fit.d.kind == ParamSpec::Kind::Number
                           ? fit.d.value
                           : select_kd_liu(data).d;
      res = mixed_liu_fit(data, *fit.restriction, d);
      break;
    }
    case LinearEstimator::Srr:
      res = srr_fit(data, *fit.restriction, resolve_fit_k(data, fit));
      break;
    case LinearEstimator::Srl: {
      const double d = fit.d.kind == ParamSpec::Kind::Number
                           ? fit.d.value
                           : select_kd_liu(data).d;
      res = srl_fit(data, *fit.restriction, d);
      break;
    }
  }
  out.beta = res.beta;
  if (res.params) {
    out.k = res.params->k;
    out.d = res.params->d;
  }
  if (res.sigma2_hat) out.sigma2 = *res.sigma2_hat;
  out.condition = res.condition;
  return out;
}

inline FitOutcome run_logistic_fit(const Dataset& data, const FitConfig& fit,
                                   int predictors) {
  const LogisticEstimator which = parse_logistic_estimator(fit.estimator);
  FitOutcome out;
  out.estimator = fit.estimator;
  const LogisticFitResult ml = ml_fit(data);
  const auto resolve_k = [&]() -> double {
    if (fit.k.kind == ParamSpec::Kind::Number) return fit.k.value;
    if (fit.k.kind == ParamSpec::Kind::Rule && fit.k.rule != "kp1")
      throw ConfigError("[fit] k: rule '" + fit.k.rule +
                        "' does not apply to binary responses");
    return select_k_logistic(ml, predictors).k;
  };
  switch (which) {
    case LogisticEstimator::Ml:
      out.beta = ml.beta;
      break;
    case LogisticEstimator::Ridge: {
      const double k = resolve_k();
      out.beta = ridge_logistic_fit(data, ml, k).beta;
      out.k = k;
      break;
    }
    case LogisticEstimator::Liu: {
      const double k = resolve_k();
      double d = 0.0;
      if (fit.d.kind == ParamSpec::Kind::Number) {
        d = fit.d.value;
      } else if (fit.d.kind == ParamSpec::Kind::Rule && fit.d.rule != "liu") {
        throw ConfigError("[fit] d: rule '" + fit.d.rule +
                          "' does not apply to binary responses");
      } else {
        d = select_d_logistic(data, k, ml).d;
      }
      out.beta = liu_logistic_fit(data, ml, k, d).beta;
      out.k = k;
      out.d = d;
      break;
    }
  }
  return out;
}

inline std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

inline std::string header_line(const char* study, std::uint64_t seed,
                               const std::string& digest) {
  ExperimentReport stub;
  stub.study = study;
  stub.seed = seed;
  stub.config_digest = digest;
  return "# " + report_preamble(stub) + "\n";
}

inline std::string fit_report_bytes(const FitOutcome& fit, ReportFormat format,
                                    std::uint64_t seed,
                                    const std::string& digest) {
  const auto p = fit.beta.size();
  if (format == ReportFormat::Csv) {
    std::string out = header_line("fit", seed, digest);
    out += "estimator,k,d,sigma2,condition";
    for (Eigen::Index j = 0; j < p; ++j) out += ",beta_" + format_int(j);
    out += "\n";
    out += csv_quote(fit.estimator) + "," + optional_real(fit.k) + "," +
           optional_real(fit.d) + "," + optional_real(fit.sigma2) + "," +
           optional_real(fit.condition);
    for (Eigen::Index j = 0; j < p; ++j) out += "," + format_real(fit.beta[j]);
    out += "\n";
    return out;
  }
  if (format == ReportFormat::Markdown) {
    std::string out = header_line("fit", seed, digest) + "\n";
    out += "| field | value |\n|---|---|\n";
    out += "| estimator | " + fit.estimator + " |\n";
    if (fit.k) out += "| k | " + format_real(*fit.k) + " |\n";
    if (fit.d) out += "| d | " + format_real(*fit.d) + " |\n";
    if (fit.sigma2) out += "| sigma2 | " + format_real(*fit.sigma2) + " |\n";
    if (fit.condition)
      out += "| condition | " + format_real(*fit.condition) + " |\n";
    for (Eigen::Index j = 0; j < p; ++j)
      out += "| beta_" + format_int(j) + " | " + format_real(fit.beta[j]) +
             " |\n";
    return out;
  }
  nlohmann::ordered_json meta;
  meta["morss"] = kVersion;
  meta["study"] = "fit";
  meta["seed"] = seed;
  meta["config"] = digest;
  nlohmann::ordered_json row;
  row["estimator"] = fit.estimator;
  row["k"] = fit.k ? nlohmann::json(six_digit(*fit.k)) : nlohmann::json();
  row["d"] = fit.d ? nlohmann::json(six_digit(*fit.d)) : nlohmann::json();
  row["sigma2"] =
      fit.sigma2 ? nlohmann::json(six_digit(*fit.sigma2)) : nlohmann::json();
  row["condition"] = fit.condition ? nlohmann::json(six_digit(*fit.condition))
                                   : nlohmann::json();
  nlohmann::ordered_json beta = nlohmann::json::array();
  for (Eigen::Index j = 0; j < p; ++j) beta.push_back(six_digit(fit.beta[j]));
  row["beta"] = beta;
  return meta.dump() + "\n" + row.dump() + "\n";
}

inline std::string sample_report_bytes(const RankedSample& sample,
                                       ReportFormat format, std::uint64_t seed,
                                       const std::string& digest) {
  const Eigen::Index rows = sample.dataset.y.size();
  const Eigen::Index p = sample.dataset.X.cols();
  const auto draw_at = [&](Eigen::Index i) -> DrawInfo {
    if (i < static_cast<Eigen::Index>(sample.draws.size()))
      return sample.draws[static_cast<std::size_t>(i)];
    // Simple random draws carry no rank bookkeeping.
    return DrawInfo{static_cast<int>(i), 0, 1, 1.0};
  };
  if (format == ReportFormat::Csv) {
    std::string out = header_line("sample", seed, digest);
    out += "cycle,set,rank,weight,y";
    for (Eigen::Index j = 0; j < p; ++j) out += ",x_" + format_int(j);
    out += "\n";
    for (Eigen::Index i = 0; i < rows; ++i) {
      const DrawInfo info = draw_at(i);
      out += format_int(info.cycle) + "," + format_int(info.set) + "," +
             format_int(info.measured_rank) + "," + format_real(info.weight) +
             "," + format_real(sample.dataset.y[i]);
      for (Eigen::Index j = 0; j < p; ++j)
        out += "," + format_real(sample.dataset.X(i, j));
      out += "\n";
    }
    return out;
  }
  if (format == ReportFormat::Markdown) {
    std::string out = header_line("sample", seed, digest) + "\n";
    out += "| cycle | set | rank | weight | y |";
    for (Eigen::Index j = 0; j < p; ++j) out += " x_" + format_int(j) + " |";
    out += "\n|---|---|---|---|---|";
    for (Eigen::Index j = 0; j < p; ++j) out += "---|";
    out += "\n";
    for (Eigen::Index i = 0; i < rows; ++i) {
      const DrawInfo info = draw_at(i);
      out += "| " + format_int(info.cycle) + " | " + format_int(info.set) +
             " | " + format_int(info.measured_rank) + " | " +
             format_real(info.weight) + " | " + format_real(sample.dataset.y[i]) +
             " |";
      for (Eigen::Index j = 0; j < p; ++j)
        out += " " + format_real(sample.dataset.X(i, j)) + " |";
      out += "\n";
    }
    return out;
  }
  nlohmann::ordered_json meta;
  meta["morss"] = kVersion;
  meta["study"] = "sample";
  meta["seed"] = seed;
  meta["config"] = digest;
  std::string out = meta.dump() + "\n";
  for (Eigen::Index i = 0; i < rows; ++i) {
    const DrawInfo info = draw_at(i);
    nlohmann::ordered_json row;
    row["cycle"] = info.cycle;
    row["set"] = info.set;
    row["rank"] = info.measured_rank;
    row["weight"] = six_digit(info.weight);
    row["y"] = six_digit(sample.dataset.y[i]);
    nlohmann::ordered_json x = nlohmann::json::array();
    for (Eigen::Index j = 0; j < p; ++j)
      x.push_back(six_digit(sample.dataset.X(i, j)));
    row["x"] = x;
    out += row.dump() + "\n";
  }
  return out;
}

inline std::string canonical_sample(const RunConfig& cfg) {
  return "sample;scheme=" + cfg.sample.scheme + ";H=" +
         format_int(cfg.sample.set_size) + ";n=" +
         format_int(cfg.sample.cycles) + ";c=" + format_real(cfg.sample.tie_c) +
         ";rhos=" + join_reals(cfg.sample.correlations) + ";path=" +
         cfg.data->path.string() + ";seed=" + std::to_string(*cfg.seed);
}

inline std::string canonical_fit(const RunConfig& cfg) {
  std::string out = "fit;estimator=" + cfg.fit.estimator;
  const auto spec_text = [](const ParamSpec& s) {
    switch (s.kind) {
      case ParamSpec::Kind::Absent: return std::string("auto");
      case ParamSpec::Kind::Rule: return s.rule;
      case ParamSpec::Kind::Number: return format_real(s.value);
    }
    return std::string();
  };
  out += ";k=" + spec_text(cfg.fit.k) + ";d=" + spec_text(cfg.fit.d);
  out += ";intercept=" + std::string(cfg.fit.intercept ? "1" : "0");
  out += ";hkb=" +
         std::string(cfg.fit.hkb_variant == HkbVariant::SigmaSquared ? "s2"
                                                                     : "s1");
  if (cfg.fit.restriction) {
    out += ";R=" + join_matrix(cfg.fit.restriction->R) + ";r=" +
           join_vector(cfg.fit.restriction->r) + ";omega=" +
           join_matrix(cfg.fit.restriction->omega) + ";v=" +
           format_real(cfg.fit.restriction->v);
  }
  out += ";path=" + cfg.data->path.string() +
         ";seed=" + std::to_string(*cfg.seed);
  return out;
}

inline std::filesystem::path default_output(RunKind kind, ReportFormat format) {
  std::string stem = std::string("morss_") + run_kind_label(kind);
  for (char& ch : stem)
    if (ch == '-') ch = '_';
  switch (format) {
    case ReportFormat::Csv: return stem + ".csv";
    case ReportFormat::Markdown: return stem + ".md";
    case ReportFormat::JsonLines: return stem + ".jsonl";
  }
  return stem + ".out";
}

}  // namespace detail

// Executes the configured run, writes the report atomically, and prints one
// summary line per result row to `summary`. Throws morss::Error on failure.
inline std::filesystem::path run(RunConfig cfg, std::ostream& summary) {
  if (!cfg.seed) throw ConfigError("seed is mandatory: set [run] seed or --seed");
  if (cfg.output.empty())
    cfg.output = detail::default_output(cfg.kind, cfg.format);

  const auto print_cells = [&](const ExperimentReport& report) {
    for (const ReportCell& cell : report.cells) {
      summary << report.study << " scheme=" << cell.scheme
              << " estimator=" << cell.estimator;
      if (std::isfinite(cell.re)) summary << " re=" << format_real(cell.re);
      if (std::isfinite(cell.mse)) summary << " mse=" << format_real(cell.mse);
      if (std::isfinite(cell.median_sse))
        summary << " median_sse=" << format_real(cell.median_sse);
      summary << " failures=" << cell.failures << "/" << cell.replications
              << "\n";
    }
  };

  switch (cfg.kind) {
    case RunKind::SimulateLinear: {
      cfg.linear.seed = *cfg.seed;
      cfg.linear.threads = cfg.threads;
      const ExperimentReport report = run_linear_study(cfg.linear);
      write_text_atomic(cfg.output, emit_report(report, cfg.format));
      print_cells(report);
      break;
    }
    case RunKind::SimulateRestricted: {
      cfg.restricted.base.seed = *cfg.seed;
      cfg.restricted.base.threads = cfg.threads;
      const ExperimentReport report = run_restricted_study(cfg.restricted);
      write_text_atomic(cfg.output, emit_report(report, cfg.format));
      print_cells(report);
      break;
    }
    case RunKind::SimulateLogistic: {
      cfg.logistic.seed = *cfg.seed;
      cfg.logistic.threads = cfg.threads;
      const ExperimentReport report = run_logistic_study(cfg.logistic);
      write_text_atomic(cfg.output, emit_report(report, cfg.format));
      print_cells(report);
      break;
    }
    case RunKind::Sample: {
      if (!cfg.data)
        throw ConfigError("sample runs need a [data] section naming the "
                          "population CSV");
      const Population pop = load_population(cfg.data->path, cfg.data->mapping);
      const SchemeChoice choice = parse_scheme_label(cfg.sample.scheme);
      SchemeSpec spec;
      spec.scheme = choice.scheme;
      spec.set_size = cfg.sample.set_size;
      spec.cycles = cfg.sample.cycles;
      spec.tie_c = cfg.sample.tie_c;
      if (choice.scheme != Scheme::Srs) {
        std::vector<double> rhos = cfg.sample.correlations;
        if (rhos.empty())
          rhos.assign(choice.all_observers
                          ? static_cast<std::size_t>(pop.observers.cols())
                          : 1,
                      1.0);
        spec.observer_correlations =
            choice.all_observers ? rhos : std::vector<double>{rhos.front()};
      }
      const RankedSample sample = draw_sample(pop, spec, *cfg.seed);
      const std::string digest = fnv1a_digest(detail::canonical_sample(cfg));
      write_text_atomic(
          cfg.output,
          detail::sample_report_bytes(sample, cfg.format, *cfg.seed, digest));
      summary << "sample scheme=" << cfg.sample.scheme
              << " rows=" << sample.dataset.y.size() << "\n";
      break;
    }
    case RunKind::Fit: {
      if (!cfg.data)
        throw ConfigError("fit runs need a [data] section naming the input "
                          "CSV");
      const Population pop = load_population(cfg.data->path, cfg.data->mapping);
      Dataset data;
      data.kind = pop.kind;
      data.y = pop.response;
      if (pop.kind == ResponseKind::Binary && cfg.fit.intercept) {
        data.X.resize(pop.predictors.rows(), pop.predictors.cols() + 1);
        data.X.col(0).setOnes();
        data.X.rightCols(pop.predictors.cols()) = pop.predictors;
      } else {
        data.X = pop.predictors;
      }
      const detail::FitOutcome outcome =
          pop.kind == ResponseKind::Binary
              ? detail::run_logistic_fit(
                    data, cfg.fit,
                    static_cast<int>(pop.predictors.cols()))
              : detail::run_linear_fit(data, cfg.fit);
      const std::string digest = fnv1a_digest(detail::canonical_fit(cfg));
      write_text_atomic(
          cfg.output,
          detail::fit_report_bytes(outcome, cfg.format, *cfg.seed, digest));
      summary << "fit estimator=" << outcome.estimator;
      if (outcome.k) summary << " k=" << format_real(*outcome.k);
      if (outcome.d) summary << " d=" << format_real(*outcome.d);
      summary << " beta=(";
      for (Eigen::Index j = 0; j < outcome.beta.size(); ++j)
        summary << (j ? ", " : "") << format_real(outcome.beta[j]);
      summary << ")\n";
      break;
    }
  }
  return cfg.output;
}

}  // namespace morss
