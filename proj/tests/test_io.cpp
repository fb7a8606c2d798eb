// I/O layer: CSV parsing, population ingestion, key-value configs, report
// serialisation, and the declarative runner. Error-message tests pin the
// exact text because positions (file:line) are part of the contract.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <morss/morss.hpp>

namespace {

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::Message;
using Catch::Matchers::MessageMatches;

// Scratch directory for tests that need real files.
std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "morss_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_scratch(const std::string& name,
                                    const std::string& bytes) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return path;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

morss::CsvTable parse_csv_text(const std::string& text,
                               const std::string& name = "test") {
  std::istringstream in(text);
  return morss::parse_csv(in, name);
}

morss::KeyValueConfig parse_config_text(const std::string& text,
                                        const std::string& name) {
  std::istringstream in(text);
  return morss::KeyValueConfig::parse(in, name);
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV parsing.
// ---------------------------------------------------------------------------

TEST_CASE("parse_csv handles quoting, CRLF, embedded newlines, blank lines") {
  const std::string text =
      "id,name,score\r\n"
      "1,\"alpha, beta\",3.5\r\n"
      "2,\"say \"\"hi\"\"\",4\n"
      "3,\"multi\nline\",5\n"
      "\n"
      "4,plain,6\n";
  const morss::CsvTable table = parse_csv_text(text);

  REQUIRE(table.header == std::vector<std::string>{"id", "name", "score"});
  REQUIRE(table.rows.size() == 4);
  REQUIRE(table.rows[0] == std::vector<std::string>{"1", "alpha, beta", "3.5"});
  REQUIRE(table.rows[1] == std::vector<std::string>{"2", "say \"hi\"", "4"});
  REQUIRE(table.rows[2] == std::vector<std::string>{"3", "multi\nline", "5"});
  REQUIRE(table.rows[3] == std::vector<std::string>{"4", "plain", "6"});
  // Source line of each data row; the quoted newline and the blank line both
  // shift later rows.
  REQUIRE(table.row_lines == std::vector<long>{2, 3, 4, 7});
}

TEST_CASE("parse_csv tolerates a missing trailing newline") {
  const morss::CsvTable table = parse_csv_text("a,b\n1,2");
  REQUIRE(table.rows.size() == 1);
  REQUIRE(table.rows[0] == std::vector<std::string>{"1", "2"});
}

TEST_CASE("parse_csv accepts a header-only file") {
  const morss::CsvTable table = parse_csv_text("a,b\n");
  REQUIRE(table.header.size() == 2);
  REQUIRE(table.rows.empty());
}

TEST_CASE("parse_csv reports malformed input with positions") {
  REQUIRE_THROWS_MATCHES(parse_csv_text("a,b\n1,2\n3\n"), morss::DataError,
                         Message("test:3: row has 1 fields, header has 2"));
  REQUIRE_THROWS_MATCHES(parse_csv_text("a,b\n\"x,2\n"), morss::DataError,
                         Message("test:3: unterminated quoted field"));
  REQUIRE_THROWS_MATCHES(
      parse_csv_text("a\n\"x\"y\n"), morss::DataError,
      Message("test:2: unexpected character after closing quote"));
  REQUIRE_THROWS_MATCHES(
      parse_csv_text("a\nx\"y\n"), morss::DataError,
      Message("test:2: unexpected quote inside unquoted field"));
  REQUIRE_THROWS_MATCHES(parse_csv_text(""), morss::DataError,
                         Message("test: file is empty"));
  REQUIRE_THROWS_MATCHES(parse_csv_text("\n\n"), morss::DataError,
                         Message("test: file is empty"));
}

TEST_CASE("read_csv_file rejects a missing path") {
  REQUIRE_THROWS_MATCHES(
      morss::read_csv_file(scratch_dir() / "does_not_exist.csv"),
      morss::DataError,
      MessageMatches(ContainsSubstring("cannot open")));
}

// ---------------------------------------------------------------------------
// Population ingestion.
// ---------------------------------------------------------------------------

namespace {

const char* kPopulationCsv =
    "subject,bmd,weight,bmi,obs1,obs2\n"
    "s1,0.85,70.5,24.2,0.84,0.86\n"
    "s2,1.02,81.0,27.9,1.01,1.05\n"
    "s3,0.77,59.3,21.4,0.79,0.75\n"
    "s4,0.95,74.8,25.6,0.93,0.96\n";

morss::PopulationCsvMapping bone_mapping() {
  morss::PopulationCsvMapping mapping;
  mapping.response = "bmd";
  mapping.predictors = {"weight", "bmi"};
  mapping.observers = {"obs1", "obs2"};
  return mapping;
}

}  // namespace

TEST_CASE("load_population maps named columns into matrices") {
  const auto path = write_scratch("pop.csv", kPopulationCsv);
  const morss::Population pop = morss::load_population(path, bone_mapping());

  REQUIRE(pop.size() == 4);
  REQUIRE(pop.kind == morss::ResponseKind::Continuous);
  REQUIRE(pop.predictors.rows() == 4);
  REQUIRE(pop.predictors.cols() == 2);
  REQUIRE(pop.observers.cols() == 2);
  REQUIRE(pop.response[1] == 1.02);
  REQUIRE(pop.predictors(2, 0) == 59.3);
  REQUIRE(pop.predictors(3, 1) == 25.6);
  REQUIRE(pop.observers(0, 1) == 0.86);
}

TEST_CASE("load_population applies binary thresholds in both directions") {
  const auto path = write_scratch("pop.csv", kPopulationCsv);
  auto mapping = bone_mapping();

  mapping.threshold = morss::BinaryThreshold{0.9, true};  // y = 1 iff bmd > 0.9
  morss::Population pop = morss::load_population(path, mapping);
  REQUIRE(pop.kind == morss::ResponseKind::Binary);
  REQUIRE(pop.response[0] == 0.0);
  REQUIRE(pop.response[1] == 1.0);
  REQUIRE(pop.response[2] == 0.0);
  REQUIRE(pop.response[3] == 1.0);

  mapping.threshold = morss::BinaryThreshold{0.9, false};  // y = 1 iff bmd < 0.9
  pop = morss::load_population(path, mapping);
  REQUIRE(pop.response[0] == 1.0);
  REQUIRE(pop.response[1] == 0.0);

  // A value exactly at the threshold is on neither strict side.
  mapping.threshold = morss::BinaryThreshold{0.95, true};
  REQUIRE(morss::load_population(path, mapping).response[3] == 0.0);
  mapping.threshold = morss::BinaryThreshold{0.95, false};
  REQUIRE(morss::load_population(path, mapping).response[3] == 0.0);
}

TEST_CASE("load_population tolerates spaces and tabs around numbers") {
  const auto path = write_scratch("pop_ws.csv",
                                  "y,x\n"
                                  " 1.5\t,\t-2.25 \n");
  morss::PopulationCsvMapping mapping;
  mapping.response = "y";
  mapping.predictors = {"x"};
  const morss::Population pop = morss::load_population(path, mapping);
  REQUIRE(pop.response[0] == 1.5);
  REQUIRE(pop.predictors(0, 0) == -2.25);
}

TEST_CASE("load_population reports mapping and parsing problems") {
  const auto path = write_scratch("pop.csv", kPopulationCsv);

  auto missing = bone_mapping();
  missing.predictors = {"weight", "height"};
  REQUIRE_THROWS_MATCHES(morss::load_population(path, missing),
                         morss::DataError,
                         Message("pop.csv: column 'height' not found"));

  auto no_response = bone_mapping();
  no_response.response.clear();
  REQUIRE_THROWS_MATCHES(morss::load_population(path, no_response),
                         morss::DataError,
                         Message("pop.csv: no response column configured"));

  const auto dup = write_scratch("pop_dup.csv",
                                 "y,weight,weight\n"
                                 "1,2,3\n");
  morss::PopulationCsvMapping dup_mapping;
  dup_mapping.response = "y";
  dup_mapping.predictors = {"weight"};
  REQUIRE_THROWS_MATCHES(morss::load_population(dup, dup_mapping),
                         morss::DataError,
                         Message("pop_dup.csv: column 'weight' appears twice"));

  const auto bad = write_scratch("pop_bad.csv",
                                 "subject,bmd,weight,bmi,obs1,obs2\n"
                                 "s1,0.85,70.5,24.2,0.84,0.86\n"
                                 "s2,1.02,81.0,27.9,1.01,1.05\n"
                                 "s3,0.77,59.3,n/a,0.79,0.75\n");
  REQUIRE_THROWS_MATCHES(
      morss::load_population(bad, bone_mapping()), morss::DataError,
      Message("pop_bad.csv:4: column 'bmi': cannot parse 'n/a' as a finite "
              "number"));

  const auto empty = write_scratch("pop_empty.csv", "subject,bmd,weight,bmi\n");
  REQUIRE_THROWS_MATCHES(morss::load_population(empty, bone_mapping()),
                         morss::DataError,
                         Message("pop_empty.csv: no data rows"));
}

// ---------------------------------------------------------------------------
// Key-value configs.
// ---------------------------------------------------------------------------

TEST_CASE("config parser tracks sections, lines, and trimming") {
  const morss::KeyValueConfig kv = parse_config_text(
      "# morss run configuration\n"
      "[run]\n"
      "kind = simulate-linear\n"
      "seed = 42\n"
      "   threads=3\n"
      "\n"
      "[simulate]\n"
      "kappa = 0.9\n"
      "schemes = srs , rss,mmrm\n"
      "flag = yes\n",
      "a.cfg");

  REQUIRE(kv.name() == "a.cfg");
  REQUIRE(kv.entries().size() == 6);
  const morss::ConfigEntry* kind = kv.find("run", "kind");
  REQUIRE(kind != nullptr);
  REQUIRE(kind->value == "simulate-linear");
  REQUIRE(kind->line == 3);
  REQUIRE(kv.has("run", "threads"));
  REQUIRE_FALSE(kv.has("run", "output"));

  REQUIRE(kv.get_int("run", "threads", 1) == 3);
  REQUIRE(kv.get_string("run", "output", "out.csv") == "out.csv");
  REQUIRE(kv.get_real("simulate", "kappa", 0.0) == 0.9);
  REQUIRE(kv.get_string_list("simulate", "schemes", {}) ==
          std::vector<std::string>{"srs", "rss", "mmrm"});
  REQUIRE(kv.get_bool("simulate", "flag", false));
  REQUIRE(kv.get_uint64("run", "seed", 0) == 42);

  // Typed getters cite file, line, section, and key when a value is malformed.
  REQUIRE_THROWS_MATCHES(
      kv.get_int("simulate", "kappa", 0), morss::ConfigError,
      Message("a.cfg:8: [simulate] kappa: expected an integer, got '0.9'"));
}

TEST_CASE("config parser rejects structural mistakes with exact positions") {
  REQUIRE_THROWS_MATCHES(
      parse_config_text("[run]\nseed = 1\nseed = 2\n", "dup.cfg"),
      morss::ConfigError,
      Message("dup.cfg:3: duplicate key 'seed' in [run] (first on line 2)"));
  REQUIRE_THROWS_MATCHES(parse_config_text("[run\n", "m.cfg"),
                         morss::ConfigError,
                         Message("m.cfg:1: malformed section header '[run'"));
  REQUIRE_THROWS_MATCHES(parse_config_text("[]\n", "m.cfg"),
                         morss::ConfigError,
                         Message("m.cfg:1: malformed section header '[]'"));
  REQUIRE_THROWS_MATCHES(parse_config_text("[ ]\n", "m.cfg"),
                         morss::ConfigError,
                         Message("m.cfg:1: empty section name"));
  REQUIRE_THROWS_MATCHES(
      parse_config_text("[s]\njust-a-token\n", "e.cfg"), morss::ConfigError,
      Message("e.cfg:2: expected 'key = value', got 'just-a-token'"));
  REQUIRE_THROWS_MATCHES(parse_config_text("[s]\n= 5\n", "e.cfg"),
                         morss::ConfigError,
                         Message("e.cfg:2: missing key before '='"));
}

TEST_CASE("require_string insists on a nonempty value") {
  const morss::KeyValueConfig kv =
      parse_config_text("[run]\nkind =\n", "r.cfg");
  REQUIRE_THROWS_MATCHES(
      kv.require_string("run", "kind"), morss::ConfigError,
      Message("r.cfg: missing required key 'kind' in [run]"));
  REQUIRE_THROWS_MATCHES(
      kv.require_string("run", "seed"), morss::ConfigError,
      Message("r.cfg: missing required key 'seed' in [run]"));
}

TEST_CASE("typed getters validate numbers, booleans, and lists") {
  const morss::KeyValueConfig kv = parse_config_text(
      "[s]\n"
      "negative = -1\n"
      "big = 18446744073709551615\n"
      "word = abc\n"
      "notfinite = inf\n"
      "reals = 1, 2.5 ,3\n"
      "badreals = 1, x\n"
      "blanklist = ,\n"
      "t1 = true\nt2 = 1\nt3 = yes\n"
      "f1 = false\nf2 = 0\nf3 = no\n"
      "maybe = maybe\n",
      "t.cfg");

  REQUIRE_THROWS_MATCHES(
      kv.get_uint64("s", "negative", 0), morss::ConfigError,
      Message("t.cfg:2: [s] negative: expected a nonnegative integer, got "
              "'-1'"));
  REQUIRE(kv.get_uint64("s", "big", 0) == 18446744073709551615ULL);
  REQUIRE_THROWS_MATCHES(
      kv.get_real("s", "word", 0.0), morss::ConfigError,
      Message("t.cfg:4: [s] word: expected a real number, got 'abc'"));
  REQUIRE_THROWS_MATCHES(
      kv.get_real("s", "notfinite", 0.0), morss::ConfigError,
      Message("t.cfg:5: [s] notfinite: expected a real number, got 'inf'"));

  REQUIRE(kv.get_real_list("s", "reals", {}) ==
          std::vector<double>{1.0, 2.5, 3.0});
  REQUIRE_THROWS_MATCHES(
      kv.get_real_list("s", "badreals", {}), morss::ConfigError,
      Message("t.cfg:7: [s] badreals: expected a comma-separated list of "
              "reals, got '1, x'"));
  REQUIRE_THROWS_MATCHES(kv.get_string_list("s", "blanklist", {}),
                         morss::ConfigError,
                         Message("t.cfg:8: [s] blanklist: expected a nonempty "
                                 "list"));

  REQUIRE(kv.get_bool("s", "t1", false));
  REQUIRE(kv.get_bool("s", "t2", false));
  REQUIRE(kv.get_bool("s", "t3", false));
  REQUIRE_FALSE(kv.get_bool("s", "f1", true));
  REQUIRE_FALSE(kv.get_bool("s", "f2", true));
  REQUIRE_FALSE(kv.get_bool("s", "f3", true));
  REQUIRE_THROWS_MATCHES(
      kv.get_bool("s", "maybe", false), morss::ConfigError,
      Message("t.cfg:15: [s] maybe: expected true/false, got 'maybe'"));

  // Fallbacks pass through untouched when the key is absent.
  REQUIRE(kv.get_int("s", "missing", -9) == -9);
  REQUIRE(kv.get_real_list("s", "missing", {7.0}) ==
          std::vector<double>{7.0});
}

TEST_CASE("matrix values parse rows by semicolon and entries by comma") {
  const morss::KeyValueConfig kv = parse_config_text(
      "[s]\n"
      "m = 1,-2;3,4.5\n"
      "ragged = 1,2;3\n"
      "bad = 1,x\n",
      "m.cfg");

  const Eigen::MatrixXd m = kv.get_matrix("s", "m", Eigen::MatrixXd());
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  REQUIRE(m(0, 0) == 1.0);
  REQUIRE(m(0, 1) == -2.0);
  REQUIRE(m(1, 0) == 3.0);
  REQUIRE(m(1, 1) == 4.5);

  const Eigen::MatrixXd fallback = Eigen::MatrixXd::Identity(2, 2);
  REQUIRE(kv.get_matrix("s", "missing", fallback) == fallback);

  REQUIRE_THROWS_MATCHES(
      kv.get_matrix("s", "ragged", Eigen::MatrixXd()), morss::ConfigError,
      Message("m.cfg:3: [s] ragged: matrix rows differ in length"));
  REQUIRE_THROWS_MATCHES(
      kv.get_matrix("s", "bad", Eigen::MatrixXd()), morss::ConfigError,
      Message("m.cfg:4: [s] bad: expected matrix entries, got 'x'"));
}

TEST_CASE("ensure_known rejects unknown sections and keys") {
  const std::vector<std::pair<std::string, std::set<std::string>>> schema = {
      {"run", {"kind", "seed"}}};

  const morss::KeyValueConfig ok =
      parse_config_text("[run]\nkind = fit\n", "u.cfg");
  REQUIRE_NOTHROW(ok.ensure_known(schema));

  REQUIRE_THROWS_MATCHES(
      parse_config_text("[bogus]\nx = 1\n", "u.cfg").ensure_known(schema),
      morss::ConfigError,
      Message("u.cfg:2: [bogus] x: unknown section [bogus]"));
  REQUIRE_THROWS_MATCHES(
      parse_config_text("[run]\nbogus = 1\n", "u.cfg").ensure_known(schema),
      morss::ConfigError,
      Message("u.cfg:2: [run] bogus: unknown key 'bogus' in [run]"));
}

TEST_CASE("trim and split helpers behave as documented") {
  REQUIRE(morss::KeyValueConfig::trim("  a b\t ") == "a b");
  REQUIRE(morss::KeyValueConfig::trim("") == "");
  REQUIRE(morss::KeyValueConfig::split("a,,b", ',') ==
          std::vector<std::string>{"a", "", "b"});
}

TEST_CASE("parse_file reports unreadable config paths") {
  REQUIRE_THROWS_MATCHES(
      morss::KeyValueConfig::parse_file(scratch_dir() / "nope.cfg"),
      morss::ConfigError,
      MessageMatches(ContainsSubstring("cannot open config")));
}

// ---------------------------------------------------------------------------
// Report formatting.
// ---------------------------------------------------------------------------

TEST_CASE("format_real prints 6 significant digits in shortest general form") {
  REQUIRE(morss::format_real(0.0) == "0");
  REQUIRE(morss::format_real(1.0) == "1");
  REQUIRE(morss::format_real(0.25) == "0.25");
  REQUIRE(morss::format_real(-2.5) == "-2.5");
  REQUIRE(morss::format_real(1.0 / 3.0) == "0.333333");
  REQUIRE(morss::format_real(123456789.0) == "1.23457e+08");
  REQUIRE(morss::format_real(1.2345678e-05) == "1.23457e-05");
  REQUIRE(morss::format_real(std::numeric_limits<double>::quiet_NaN()) ==
          "nan");
  REQUIRE(morss::format_real(std::numeric_limits<double>::infinity()) ==
          "inf");
  REQUIRE(morss::format_real(-std::numeric_limits<double>::infinity()) ==
          "-inf");
  REQUIRE(morss::format_int(-7) == "-7");
}

TEST_CASE("fnv1a_digest matches the published 64-bit test vectors") {
  REQUIRE(morss::fnv1a_digest("") == "cbf29ce484222325");
  REQUIRE(morss::fnv1a_digest("a") == "af63dc4c8601ec8c");
  REQUIRE(morss::fnv1a_digest("foobar") == "85944171f73967e8");
  REQUIRE(morss::fnv1a_digest("config-a") != morss::fnv1a_digest("config-b"));
}

TEST_CASE("csv_quote escapes only when needed") {
  REQUIRE(morss::detail::csv_quote("abc") == "abc");
  REQUIRE(morss::detail::csv_quote("a,b") == "\"a,b\"");
  REQUIRE(morss::detail::csv_quote("a\"b") == "\"a\"\"b\"");
  REQUIRE(morss::detail::csv_quote("a\nb") == "\"a\nb\"");
}

namespace {

morss::ExperimentReport sample_report() {
  morss::ExperimentReport report;
  report.study = "linear";
  report.seed = 42;
  report.config_digest = "0123456789abcdef";
  report.design = {{"kappa", "0.9"}, {"n", "3"}};
  morss::ReportCell a;
  a.scheme = "srs";
  a.estimator = "ls";
  a.replications = 100;
  a.failures = 0;
  a.mse = 0.125;
  a.median_sse = 0.0625;
  a.re = 1.0;
  a.ci_lo = 0.03125;
  a.ci_hi = 0.5;
  morss::ReportCell b;
  b.scheme = "mmrm";
  b.estimator = "srr";
  b.replications = 98;
  b.failures = 2;
  b.mse = 0.03125;
  b.median_sse = 0.015625;
  b.re = 0.25;
  b.ci_lo = 0.0078125;
  b.ci_hi = 0.125;
  report.cells = {a, b};
  return report;
}

}  // namespace

TEST_CASE("emit_csv produces the exact documented byte layout") {
  const std::string expected =
      "# morss 0.1.0 study=linear seed=42 config=0123456789abcdef\n"
      "scheme,estimator,kappa,n,re,ci_lo,ci_hi,failures,mse,median_sse,"
      "replications\n"
      "srs,ls,0.9,3,1,0.03125,0.5,0,0.125,0.0625,100\n"
      "mmrm,srr,0.9,3,0.25,0.0078125,0.125,2,0.03125,0.015625,98\n";
  REQUIRE(morss::emit_report(sample_report(), morss::ReportFormat::Csv) ==
          expected);
}

TEST_CASE("emit_csv serialises empty cells as nan") {
  morss::ExperimentReport report = sample_report();
  report.cells.resize(1);
  report.cells[0].re = std::numeric_limits<double>::quiet_NaN();
  const std::string bytes =
      morss::emit_report(report, morss::ReportFormat::Csv);
  REQUIRE_THAT(bytes, ContainsSubstring("srs,ls,0.9,3,nan,0.03125,"));
}

TEST_CASE("emit_markdown pivots estimators by scheme") {
  const std::string expected =
      "# morss 0.1.0 study=linear seed=42 config=0123456789abcdef\n"
      "\n"
      "design: kappa=0.9 n=3\n"
      "metric: relative efficiency vs ls,srs\n"
      "\n"
      "| estimator | srs | mmrm |\n"
      "|---|---|---|\n"
      "| ls | 1 | — |\n"
      "| srr | — | 0.25 |\n";
  REQUIRE(morss::emit_report(sample_report(), morss::ReportFormat::Markdown) ==
          expected);
}

TEST_CASE("emit_markdown switches to median intervals for logistic studies") {
  morss::ExperimentReport report = sample_report();
  report.study = "logistic";
  report.clamp_warnings = 7;
  report.cells.resize(1);
  report.cells[0].median_sse = 2.5;
  report.cells[0].ci_lo = 1.25;
  report.cells[0].ci_hi = 3.75;
  const std::string bytes =
      morss::emit_report(report, morss::ReportFormat::Markdown);
  REQUIRE_THAT(bytes,
               ContainsSubstring("# morss 0.1.0 study=logistic seed=42 "
                                 "config=0123456789abcdef warnings=7\n"));
  REQUIRE_THAT(bytes, ContainsSubstring("metric: median SSE (2.5%, 97.5%)\n"));
  REQUIRE_THAT(bytes, ContainsSubstring("| ls | 2.5 (1.25, 3.75) |\n"));
}

TEST_CASE("emit_json_lines writes one meta object and one row per cell") {
  morss::ExperimentReport report = sample_report();
  report.cells[0].re = 1.0 / 3.0;  // exercises the 6-digit rounding
  report.cells[1].mse = std::numeric_limits<double>::quiet_NaN();
  const std::string bytes =
      morss::emit_report(report, morss::ReportFormat::JsonLines);

  std::istringstream in(bytes);
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto meta = nlohmann::json::parse(line);
  REQUIRE(meta["artifact"] == "morss");
  REQUIRE(meta["version"] == "0.1.0");
  REQUIRE(meta["study"] == "linear");
  REQUIRE(meta["seed"] == 42);
  REQUIRE(meta["config"] == "0123456789abcdef");
  REQUIRE(meta["warnings"] == 0);
  REQUIRE(meta["design_kappa"] == "0.9");
  REQUIRE(meta["design_n"] == "3");

  REQUIRE(std::getline(in, line));
  const auto row0 = nlohmann::json::parse(line);
  REQUIRE(row0["scheme"] == "srs");
  REQUIRE(row0["estimator"] == "ls");
  REQUIRE(row0["re"] == 0.333333);
  REQUIRE(row0["failures"] == 0);
  REQUIRE(row0["replications"] == 100);

  REQUIRE(std::getline(in, line));
  const auto row1 = nlohmann::json::parse(line);
  REQUIRE(row1["mse"].is_null());  // NaN stays out of the JSON number domain
  REQUIRE(row1["median_sse"] == 0.015625);

  REQUIRE_FALSE(std::getline(in, line));
}

TEST_CASE("parse_report_format accepts the documented aliases") {
  REQUIRE(morss::parse_report_format("csv") == morss::ReportFormat::Csv);
  REQUIRE(morss::parse_report_format("markdown") ==
          morss::ReportFormat::Markdown);
  REQUIRE(morss::parse_report_format("md") == morss::ReportFormat::Markdown);
  REQUIRE(morss::parse_report_format("json-lines") ==
          morss::ReportFormat::JsonLines);
  REQUIRE(morss::parse_report_format("jsonl") ==
          morss::ReportFormat::JsonLines);
  REQUIRE_THROWS_MATCHES(morss::parse_report_format("xml"),
                         morss::ConfigError,
                         Message("unknown report format 'xml'"));
}

TEST_CASE("write_text_atomic writes, overwrites, and leaves no temp file") {
  const auto path = scratch_dir() / "atomic.txt";
  std::filesystem::remove(path);

  morss::write_text_atomic(path, "first\n");
  REQUIRE(read_all(path) == "first\n");
  morss::write_text_atomic(path, "second\n");
  REQUIRE(read_all(path) == "second\n");
  REQUIRE_FALSE(std::filesystem::exists(path.string() + ".tmp"));

  REQUIRE_THROWS_MATCHES(
      morss::write_text_atomic(scratch_dir() / "no_such_dir" / "x.txt", "x"),
      morss::DataError, MessageMatches(ContainsSubstring("cannot open")));
}

// ---------------------------------------------------------------------------
// Runner configuration and execution.
// ---------------------------------------------------------------------------

TEST_CASE("run kinds round-trip through their labels") {
  using morss::RunKind;
  for (const char* label : {"sample", "fit", "simulate-linear",
                            "simulate-restricted", "simulate-logistic"}) {
    REQUIRE(morss::run_kind_label(morss::parse_run_kind(label)) ==
            std::string(label));
  }
  REQUIRE_THROWS_AS(morss::parse_run_kind("simulate"), morss::ConfigError);
}

TEST_CASE("shrinkage parameter specs parse rules and numbers") {
  using Kind = morss::ParamSpec::Kind;
  REQUIRE(morss::ParamSpec::parse("", "[fit] k").kind == Kind::Absent);
  const morss::ParamSpec rule = morss::ParamSpec::parse("hkb", "[fit] k");
  REQUIRE(rule.kind == Kind::Rule);
  REQUIRE(rule.rule == "hkb");
  REQUIRE(morss::ParamSpec::parse("kp1", "[fit] k").kind == Kind::Rule);
  REQUIRE(morss::ParamSpec::parse("liu", "[fit] d").kind == Kind::Rule);
  const morss::ParamSpec num = morss::ParamSpec::parse("2.5e-1", "[fit] k");
  REQUIRE(num.kind == Kind::Number);
  REQUIRE(num.value == 0.25);
  REQUIRE_THROWS_MATCHES(
      morss::ParamSpec::parse("abc", "[fit] k"), morss::ConfigError,
      Message("[fit] k: expected a number or a rule name (hkb, kp1, liu), "
              "got 'abc'"));
  REQUIRE_THROWS_AS(morss::ParamSpec::parse("inf", "[fit] k"),
                    morss::ConfigError);
}

TEST_CASE("load_run_config fills a linear study from file keys") {
  const morss::KeyValueConfig kv = parse_config_text(
      "[run]\n"
      "kind = simulate-linear\n"
      "seed = 77\n"
      "output = study.md\n"
      "format = md\n"
      "threads = 3\n"
      "[simulate]\n"
      "set_size = 4\n"
      "cycles = 2\n"
      "kappa = 0.95\n"
      "sigma = 0.5\n"
      "beta0 = 1, 2, 3, 4\n"
      "correlations = 0.9, 0.85, 0.8\n"
      "tie_c = 0.25\n"
      "replications = 500\n"
      "schemes = srs, mmrm\n"
      "estimators = ls, ridge\n"
      "hkb_variant = sigma\n",
      "lin.cfg");

  const morss::RunConfig cfg = morss::load_run_config(kv);
  REQUIRE(cfg.kind == morss::RunKind::SimulateLinear);
  REQUIRE(cfg.seed.has_value());
  REQUIRE(*cfg.seed == 77);
  REQUIRE(cfg.output == std::filesystem::path("study.md"));
  REQUIRE(cfg.format == morss::ReportFormat::Markdown);
  REQUIRE(cfg.threads == 3);
  REQUIRE(cfg.linear.set_size == 4);
  REQUIRE(cfg.linear.cycles == 2);
  REQUIRE(cfg.linear.kappa == 0.95);
  REQUIRE(cfg.linear.sigma == 0.5);
  REQUIRE(cfg.linear.beta0.size() == 4);
  REQUIRE(cfg.linear.beta0[3] == 4.0);
  REQUIRE(cfg.linear.observer_rhos == std::vector<double>{0.9, 0.85, 0.8});
  REQUIRE(cfg.linear.tie_c == 0.25);
  REQUIRE(cfg.linear.replications == 500);
  REQUIRE(cfg.linear.schemes == std::vector<std::string>{"srs", "mmrm"});
  REQUIRE(cfg.linear.estimators == std::vector<std::string>{"ls", "ridge"});
  REQUIRE(cfg.linear.hkb_variant == morss::HkbVariant::Sigma);
}

TEST_CASE("load_run_config fills restriction settings for restricted studies") {
  const morss::KeyValueConfig kv = parse_config_text(
      "[run]\n"
      "kind = simulate-restricted\n"
      "seed = 5\n"
      "[simulate]\n"
      "replications = 50\n"
      "restriction = 1,-2,-2,-2\n"
      "restriction_target = 0\n"
      "restriction_omega = 2\n"
      "v = 0.5\n"
      "restriction_noise_sd = 0.1\n",
      "res.cfg");

  const morss::RunConfig cfg = morss::load_run_config(kv);
  REQUIRE(cfg.kind == morss::RunKind::SimulateRestricted);
  REQUIRE(cfg.restricted.base.replications == 50);
  REQUIRE(cfg.restricted.restriction.R.rows() == 1);
  REQUIRE(cfg.restricted.restriction.R.cols() == 4);
  REQUIRE(cfg.restricted.restriction.R(0, 0) == 1.0);
  REQUIRE(cfg.restricted.restriction.R(0, 3) == -2.0);
  REQUIRE(cfg.restricted.restriction.r.size() == 1);
  REQUIRE(cfg.restricted.restriction.r[0] == 0.0);
  REQUIRE(cfg.restricted.restriction.omega(0, 0) == 2.0);
  REQUIRE(cfg.restricted.restriction.v == 0.5);
  REQUIRE(cfg.restricted.restriction_noise_sd == 0.1);
}

TEST_CASE("load_run_config parses data mappings and thresholds") {
  const morss::KeyValueConfig kv = parse_config_text(
      "[run]\n"
      "kind = fit\n"
      "seed = 1\n"
      "[data]\n"
      "path = bones.csv\n"
      "response = bmd\n"
      "predictors = weight, bmi\n"
      "observers = obs1\n"
      "threshold = 0.95\n"
      "threshold_direction = less\n"
      "[fit]\n"
      "estimator = ridge\n"
      "k = hkb\n",
      "d.cfg");

  const morss::RunConfig cfg = morss::load_run_config(kv);
  REQUIRE(cfg.data.has_value());
  REQUIRE(cfg.data->path == std::filesystem::path("bones.csv"));
  REQUIRE(cfg.data->mapping.response == "bmd");
  REQUIRE(cfg.data->mapping.predictors ==
          std::vector<std::string>{"weight", "bmi"});
  REQUIRE(cfg.data->mapping.observers == std::vector<std::string>{"obs1"});
  REQUIRE(cfg.data->mapping.threshold.has_value());
  REQUIRE(cfg.data->mapping.threshold->value == 0.95);
  REQUIRE_FALSE(cfg.data->mapping.threshold->greater);
  REQUIRE(cfg.fit.estimator == "ridge");
  REQUIRE(cfg.fit.k.kind == morss::ParamSpec::Kind::Rule);

  REQUIRE_THROWS_MATCHES(
      morss::load_run_config(parse_config_text(
          "[run]\nkind = fit\n[data]\npath = x.csv\nresponse = y\n", "d.cfg")),
      morss::ConfigError,
      Message("d.cfg: [data] predictors must name at least one column"));
  REQUIRE_THROWS_AS(
      morss::load_run_config(parse_config_text(
          "[run]\nkind = fit\n[data]\npath = x.csv\nresponse = y\n"
          "predictors = x\nthreshold = 1\nthreshold_direction = sideways\n",
          "d.cfg")),
      morss::ConfigError);
}

TEST_CASE("load_run_config rejects keys outside the schema") {
  REQUIRE_THROWS_MATCHES(
      morss::load_run_config(parse_config_text(
          "[run]\nkind = simulate-linear\nbogus = 1\n", "s.cfg")),
      morss::ConfigError,
      Message("s.cfg:3: [run] bogus: unknown key 'bogus' in [run]"));
  REQUIRE_THROWS_AS(
      morss::load_run_config(parse_config_text(
          "[run]\nkind = simulate-linear\n[simulate]\nhkb_variant = huber\n",
          "s.cfg")),
      morss::ConfigError);
}

TEST_CASE("run refuses to start without a seed") {
  morss::RunConfig cfg;
  std::ostringstream summary;
  REQUIRE_THROWS_MATCHES(
      morss::run(cfg, summary), morss::ConfigError,
      Message("seed is mandatory: set [run] seed or --seed"));
}

TEST_CASE("run executes a small linear study end to end") {
  const auto out_path = scratch_dir() / "mini_linear.csv";
  std::filesystem::remove(out_path);
  const morss::KeyValueConfig kv = parse_config_text(
      "[run]\n"
      "kind = simulate-linear\n"
      "seed = 7\n"
      "output = " + out_path.string() + "\n"
      "[simulate]\n"
      "set_size = 2\n"
      "cycles = 4\n"
      "replications = 30\n"
      "schemes = srs, rss\n"
      "estimators = ls, ridge\n",
      "mini.cfg");

  morss::RunConfig cfg = morss::load_run_config(kv);
  std::ostringstream summary;
  const std::filesystem::path written = morss::run(cfg, summary);
  REQUIRE(written == out_path);
  const std::string bytes = read_all(out_path);
  REQUIRE_THAT(bytes,
               ContainsSubstring("# morss 0.1.0 study=linear seed=7"));
  REQUIRE_THAT(bytes, ContainsSubstring("\nscheme,estimator,"));
  REQUIRE_THAT(summary.str(),
               ContainsSubstring("linear scheme=srs estimator=ls re=1"));
  REQUIRE_THAT(summary.str(),
               ContainsSubstring("linear scheme=rss estimator=ridge"));
}

TEST_CASE("run executes a single fit against a CSV file") {
  const auto data_path = write_scratch("fit_data.csv",
                                       "y,x1,x2\n"
                                       "1.0,1.0,0.5\n"
                                       "2.0,2.0,0.1\n"
                                       "1.5,1.5,0.9\n"
                                       "3.0,3.1,0.4\n"
                                       "2.2,2.4,0.7\n"
                                       "0.8,0.9,0.2\n");
  const auto out_path = scratch_dir() / "fit_out.csv";
  std::filesystem::remove(out_path);
  const morss::KeyValueConfig kv = parse_config_text(
      "[run]\n"
      "kind = fit\n"
      "seed = 3\n"
      "output = " + out_path.string() + "\n"
      "[data]\n"
      "path = " + data_path.string() + "\n"
      "response = y\n"
      "predictors = x1, x2\n"
      "[fit]\n"
      "estimator = ridge\n"
      "k = 0.5\n",
      "fit.cfg");

  morss::RunConfig cfg = morss::load_run_config(kv);
  std::ostringstream summary;
  morss::run(cfg, summary);

  const std::string bytes = read_all(out_path);
  REQUIRE_THAT(bytes, ContainsSubstring("# morss 0.1.0 study=fit seed=3"));
  REQUIRE_THAT(bytes, ContainsSubstring("estimator,k,d,sigma2,condition,"
                                        "beta_0,beta_1"));
  REQUIRE_THAT(bytes, ContainsSubstring("\nridge,0.5,"));
  REQUIRE_THAT(summary.str(),
               ContainsSubstring("fit estimator=ridge k=0.5 "));

  // The reported coefficients must agree with the library fit on the same
  // rows, so the CSV path adds no numeric drift.
  const morss::Population pop =
      morss::load_population(data_path, [] {
        morss::PopulationCsvMapping m;
        m.response = "y";
        m.predictors = {"x1", "x2"};
        return m;
      }());
  morss::Dataset data;
  data.X = pop.predictors;
  data.y = pop.response;
  const morss::FitResult direct = morss::ridge_fit(data, 0.5);
  REQUIRE_THAT(bytes,
               ContainsSubstring("," + morss::format_real(direct.beta[0]) +
                                 "," + morss::format_real(direct.beta[1]) +
                                 "\n"));
}
