#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "morss/common.hpp"
#include "morss/version.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// Study results and their serialisation. All formatting is locale-independent
// (std::to_chars) and reals carry 6 significant digits, so identical runs
// serialise to identical bytes.
// ---------------------------------------------------------------------------

struct ReportCell {
  std::string scheme;
  std::string estimator;
  long replications = 0;  // replications that produced a usable fit
  long failures = 0;      // replications excluded (and counted) per estimator
  double mse = std::numeric_limits<double>::quiet_NaN();
  double median_sse = std::numeric_limits<double>::quiet_NaN();
  double re = std::numeric_limits<double>::quiet_NaN();  // MSE / MSE(ls, srs)
  double ci_lo = std::numeric_limits<double>::quiet_NaN();  // SSE 2.5th pct
  double ci_hi = std::numeric_limits<double>::quiet_NaN();  // SSE 97.5th pct
};

struct ExperimentReport {
  std::string study;  // linear | restricted | logistic | fit | sample
  std::uint64_t seed = 0;
  std::string config_digest;  // hash of the full run configuration
  // Design parameters in report-column order (e.g. kappa, n, H, c).
  std::vector<std::pair<std::string, std::string>> design;
  std::vector<ReportCell> cells;
  // Times a generator had to clamp a degenerate probability (logistic study).
  long clamp_warnings = 0;
};

enum class ReportFormat { Csv, Markdown, JsonLines };

inline ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "json-lines" || name == "jsonl") return ReportFormat::JsonLines;
  throw ConfigError("unknown report format '" + name + "'");
}

// 6 significant digits, shortest general form, locale-free.
inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long v) { return std::to_string(v); }

// FNV-1a over a canonical config string; cheap and stable across platforms.
inline std::string fnv1a_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

namespace detail {

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out += ch;
  }
  out += '"';
  return out;
}

inline std::string report_preamble(const ExperimentReport& report) {
  std::string out = std::string("morss ") + kVersion + " study=" +
                    report.study + " seed=" + std::to_string(report.seed) +
                    " config=" + report.config_digest;
  if (report.clamp_warnings > 0)
    out += " warnings=" + std::to_string(report.clamp_warnings);
  return out;
}

inline std::string emit_csv(const ExperimentReport& report) {
  std::string out = "# " + report_preamble(report) + "\n";
  out += "scheme,estimator";
  for (const auto& [key, value] : report.design) out += "," + csv_quote(key);
  out += ",re,ci_lo,ci_hi,failures,mse,median_sse,replications\n";
  for (const ReportCell& cell : report.cells) {
    out += csv_quote(cell.scheme) + "," + csv_quote(cell.estimator);
    for (const auto& [key, value] : report.design) out += "," + csv_quote(value);
    out += "," + format_real(cell.re) + "," + format_real(cell.ci_lo) + "," +
           format_real(cell.ci_hi) + "," + format_int(cell.failures) + "," +
           format_real(cell.mse) + "," + format_real(cell.median_sse) + "," +
           format_int(cell.replications) + "\n";
  }
  return out;
}

inline std::string emit_markdown(const ExperimentReport& report) {
  // Estimators as rows, schemes as columns. Linear-model studies tabulate
  // the relative efficiency; the logistic study tabulates median SSE with
  // its percentile interval.
  std::vector<std::string> schemes, estimators;
  for (const ReportCell& cell : report.cells) {
    if (std::find(schemes.begin(), schemes.end(), cell.scheme) == schemes.end())
      schemes.push_back(cell.scheme);
    if (std::find(estimators.begin(), estimators.end(), cell.estimator) ==
        estimators.end())
      estimators.push_back(cell.estimator);
  }
  const bool medians = report.study == "logistic";
  std::string out = "# " + report_preamble(report) + "\n\n";
  out += "design:";
  for (const auto& [key, value] : report.design)
    out += " " + key + "=" + value;
  out += "\nmetric: ";
  out += medians ? "median SSE (2.5%, 97.5%)" : "relative efficiency vs ls,srs";
  out += "\n\n| estimator |";
  for (const auto& s : schemes) out += " " + s + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < schemes.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& est : estimators) {
    out += "| " + est + " |";
    for (const auto& s : schemes) {
      const ReportCell* found = nullptr;
      for (const ReportCell& cell : report.cells)
        if (cell.scheme == s && cell.estimator == est) found = &cell;
      if (!found) {
        out += " — |";
      } else if (medians) {
        out += " " + format_real(found->median_sse) + " (" +
               format_real(found->ci_lo) + ", " + format_real(found->ci_hi) +
               ") |";
      } else {
        out += " " + format_real(found->re) + " |";
      }
    }
    out += "\n";
  }
  return out;
}

inline double six_digit(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_real(v).c_str(), nullptr);
}

inline std::string emit_json_lines(const ExperimentReport& report) {
  nlohmann::json meta;
  meta["artifact"] = "morss";
  meta["version"] = kVersion;
  meta["study"] = report.study;
  meta["seed"] = report.seed;
  meta["config"] = report.config_digest;
  meta["warnings"] = report.clamp_warnings;
  for (const auto& [key, value] : report.design) meta["design_" + key] = value;
  std::string out = meta.dump() + "\n";
  for (const ReportCell& cell : report.cells) {
    nlohmann::json row;
    row["scheme"] = cell.scheme;
    row["estimator"] = cell.estimator;
    row["re"] = six_digit(cell.re);
    row["ci_lo"] = six_digit(cell.ci_lo);
    row["ci_hi"] = six_digit(cell.ci_hi);
    row["failures"] = cell.failures;
    row["mse"] = six_digit(cell.mse);
    row["median_sse"] = six_digit(cell.median_sse);
    row["replications"] = cell.replications;
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace detail

inline std::string emit_report(const ExperimentReport& report,
                               ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return detail::emit_csv(report);
    case ReportFormat::Markdown: return detail::emit_markdown(report);
    case ReportFormat::JsonLines: return detail::emit_json_lines(report);
  }
  throw ConfigError("unknown report format");
}

// Writes via a temporary file in the same directory plus an atomic rename,
// so readers never observe a partially written report.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("failed to move report into place: " + ec.message());
  }
}

}  // namespace morss
