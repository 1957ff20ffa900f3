// Command-line front end: batch analysis of a test cohort against a training
// hull, k-fold cross-validation, single-query checks with scriptable exit
// codes, and synthetic table generation. Outputs are byte-reproducible under
// fixed flags and seeds; only the provenance timestamp varies between runs,
// and HULLAUDIT_TIMESTAMP pins even that.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hullaudit/hullaudit.hpp"

namespace fs = std::filesystem;
using namespace hullaudit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitOutside = 3;
constexpr int kExitIndeterminate = 4;

struct SharedOptions {
  std::string schema_path;
  std::string scaling = "minmax";
  double tau = 1e-6;
  double gap = 1e-10;
  double significance = 0.05;
  std::string out_dir;
  std::size_t jobs = 0;
  bool jobs_given = false;
  std::string variant = "corrective_fw";
  std::size_t max_iterations = 0;
};

void add_shared(CLI::App* cmd, SharedOptions* o, bool with_out = true) {
  cmd->add_option("--schema", o->schema_path,
                  "schema JSON; inferred from the training file when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--scaling", o->scaling, "feature scaling mode")
      ->check(CLI::IsMember({"minmax", "zscore", "none"}))
      ->capture_default_str();
  cmd->add_option("--tau", o->tau, "membership distance tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--gap", o->gap, "duality-gap stopping tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--significance", o->significance,
                  "share threshold for significant features")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  if (with_out)
    cmd->add_option("--out", o->out_dir, "directory for report and summary files");
  cmd->add_option("--jobs", o->jobs,
                  "worker threads; 0 uses all cores (HULLAUDIT_JOBS overrides "
                  "this default)");
  cmd->add_option("--variant", o->variant, "projection solver variant")
      ->check(CLI::IsMember({"vanilla_fw", "away_step_fw", "corrective_fw"}))
      ->capture_default_str();
  cmd->add_option("--max-iterations", o->max_iterations,
                  "solver iteration cap; 0 uses 50 per training row");
}

SolverConfig make_config(const SharedOptions& o) {
  SolverConfig cfg;
  cfg.gap_tolerance = o.gap;
  cfg.membership_tolerance = o.tau;
  cfg.max_iterations = o.max_iterations;
  cfg.variant = variant_from_string(o.variant);
  cfg.validate();
  return cfg;
}

AnalysisOptions make_analysis_options(const SharedOptions& o) {
  AnalysisOptions opts;
  opts.scaling = scaling_mode_from_string(o.scaling);
  opts.significance = o.significance;
  opts.jobs = o.jobs;
  if (!o.jobs_given) {
    if (const char* env = std::getenv("HULLAUDIT_JOBS")) {
      char* end = nullptr;
      const unsigned long parsed = std::strtoul(env, &end, 10);
      if (end && *end == '\0') opts.jobs = std::size_t(parsed);
    }
  }
  if (const char* stamp = std::getenv("HULLAUDIT_TIMESTAMP"))
    opts.timestamp = stamp;
  return opts;
}

Schema resolve_schema(const SharedOptions& o, const std::string& data_path) {
  if (!o.schema_path.empty()) return load_schema(o.schema_path);
  SchemaInference inferred = infer_schema(data_path);
  for (const auto& w : inferred.warnings) std::cerr << "warning: " << w << "\n";
  return inferred.schema;
}

void report_drop_warnings(const RawTable& table, const std::string& label) {
  for (const auto& w : table.warnings)
    std::cerr << "warning (" << label << "): " << w << "\n";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw Error("failed writing " + path.string());
}

std::string reports_jsonl(const std::vector<ExtrapolationReport>& reports) {
  std::string out;
  for (const auto& rep : reports) {
    out += to_json(rep);
    out += '\n';
  }
  return out;
}

int cmd_analyze(const SharedOptions& shared, const std::string& train_path,
                const std::string& test_path) {
  const SolverConfig cfg = make_config(shared);
  const AnalysisOptions opts = make_analysis_options(shared);

  const Schema schema = resolve_schema(shared, train_path);
  RawTable train = load_table(train_path, schema);
  RawTable test = load_table(test_path, schema);
  report_drop_warnings(train, "train");
  report_drop_warnings(test, "test");

  AnalysisResult res = run_analysis(train, test, cfg, opts);

  if (!shared.out_dir.empty()) {
    fs::create_directories(shared.out_dir);
    write_file(fs::path(shared.out_dir) / "reports.jsonl", reports_jsonl(res.reports));
    write_file(fs::path(shared.out_dir) / "summary.json", to_json(res.summary) + "\n");
  }
  std::cout << format_summary_table(res.summary);
  return kExitOk;
}

int cmd_cv(const SharedOptions& shared, const std::string& data_path,
           std::size_t k, std::uint64_t seed) {
  const SolverConfig cfg = make_config(shared);
  const AnalysisOptions opts = make_analysis_options(shared);

  const Schema schema = resolve_schema(shared, data_path);
  RawTable table = load_table(data_path, schema);
  report_drop_warnings(table, "data");

  SplitPlan plan;
  plan.mode = SplitPlan::Mode::kfold;
  plan.k = k;
  plan.seed = seed;
  CvResult res = run_cv(table, plan, cfg, opts);

  if (!shared.out_dir.empty()) {
    fs::create_directories(shared.out_dir);
    write_file(fs::path(shared.out_dir) / "reports.jsonl", reports_jsonl(res.reports));
    write_file(fs::path(shared.out_dir) / "summary.json", to_json(res.pooled) + "\n");
    for (std::size_t f = 0; f < res.folds.size(); ++f)
      write_file(fs::path(shared.out_dir) /
                     ("fold_" + std::to_string(f + 1) + "_summary.json"),
                 to_json(res.folds[f]) + "\n");
  }
  for (std::size_t f = 0; f < res.folds.size(); ++f)
    std::cout << "fold " << (f + 1) << " extrapolation fraction "
              << detail::format_double(res.folds[f].extrapolation_fraction) << "\n";
  std::cout << "pooled " << format_summary_table(res.pooled);
  return kExitOk;
}

int cmd_check(const SharedOptions& shared, const std::string& train_path,
              const std::string& query_path) {
  const SolverConfig cfg = make_config(shared);
  const AnalysisOptions opts = make_analysis_options(shared);

  const Schema schema = resolve_schema(shared, train_path);
  RawTable train = load_table(train_path, schema);
  RawTable query = load_table(query_path, schema);
  report_drop_warnings(train, "train");
  if (query.row_count != 1)
    throw Error("query file must contain exactly one data row, found " +
                std::to_string(query.row_count));

  Dataset ds = fit_transform(train, opts.scaling, UnknownPolicy::zero_vector);
  bool had_unknown = false;
  Vector q = apply(ds.transform, query, 0, &had_unknown);
  MembershipVerdict verdict = classify(ds, q, cfg);

  ReportMeta meta;
  meta.solver = cfg;
  meta.timestamp = opts.timestamp;
  meta.unknown_category = had_unknown;
  ExtrapolationReport rep =
      build_report(verdict, ds.transform, "query", opts.significance, meta);

  const std::string text = to_json(rep) + "\n";
  std::cout << text;
  if (!shared.out_dir.empty()) {
    fs::create_directories(shared.out_dir);
    write_file(fs::path(shared.out_dir) / "report.json", text);
  }
  switch (rep.status) {
    case Status::Inside: return kExitOk;
    case Status::Outside: return kExitOutside;
    case Status::Indeterminate: return kExitIndeterminate;
  }
  return kExitRuntime;
}

int cmd_synth(const std::string& out_path, std::size_t n, std::size_t d,
              const std::string& distribution, std::uint64_t seed) {
  RawTable table =
      make_synthetic(n, d, synthetic_distribution_from_string(distribution), seed);
  if (fs::path(out_path).has_parent_path())
    fs::create_directories(fs::path(out_path).parent_path());
  save_table(table, out_path);
  std::cout << "wrote " << n << " rows x " << d << " columns to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hull membership auditing: decide whether queries fall inside "
               "the convex hull of training data and report per-feature "
               "extrapolation"};
  app.require_subcommand(1);

  SharedOptions analyze_shared, cv_shared, check_shared;
  std::string analyze_train, analyze_test;
  std::string cv_data;
  std::size_t cv_k = 5;
  std::uint64_t cv_seed = 0;
  std::string check_train, check_query;
  std::string synth_out = "synthetic.csv";
  std::size_t synth_n = 1000, synth_d = 10;
  std::string synth_distribution = "uniform_box";
  std::uint64_t synth_seed = 0;

  CLI::App* analyze =
      app.add_subcommand("analyze", "classify a test table against a training hull");
  analyze->add_option("--train", analyze_train, "training CSV")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--test", analyze_test, "test CSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_shared(analyze, &analyze_shared);

  CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validated extrapolation rates");
  cv->add_option("--data", cv_data, "data CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--k", cv_k, "number of folds")
      ->check(CLI::Range(std::size_t(2), std::size_t(1) << 20))
      ->capture_default_str();
  cv->add_option("--seed", cv_seed, "shuffle seed")->capture_default_str();
  add_shared(cv, &cv_shared);

  CLI::App* check = app.add_subcommand(
      "check", "report one query; exit 0 inside, 3 outside, 4 indeterminate");
  check->add_option("--train", check_train, "training CSV")
      ->required()
      ->check(CLI::ExistingFile);
  check->add_option("--query", check_query, "single-row query CSV")
      ->required()
      ->check(CLI::ExistingFile);
  add_shared(check, &check_shared);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic numeric table");
  synth->add_option("--out", synth_out, "output CSV path")->capture_default_str();
  synth->add_option("--n", synth_n, "rows")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--d", synth_d, "columns")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--distribution", synth_distribution, "cell distribution")
      ->check(CLI::IsMember({"gaussian", "uniform_box"}))
      ->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and a pointer to --help
    std::cerr << app.help() << "\n";
    return kExitUsage;
  }

  analyze_shared.jobs_given = analyze->count("--jobs") > 0;
  cv_shared.jobs_given = cv->count("--jobs") > 0;
  check_shared.jobs_given = check->count("--jobs") > 0;

  try {
    if (analyze->parsed()) return cmd_analyze(analyze_shared, analyze_train, analyze_test);
    if (cv->parsed()) return cmd_cv(cv_shared, cv_data, cv_k, cv_seed);
    if (check->parsed()) return cmd_check(check_shared, check_train, check_query);
    if (synth->parsed())
      return cmd_synth(synth_out, synth_n, synth_d, synth_distribution, synth_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
