#pragma once

// End-to-end pipelines: fit on training rows, classify a test cohort,
// cross-validate with per-fold refitting, and generate synthetic tables for
// benchmarks. Queries with categories unseen in their training fold are
// encoded as zero blocks and flagged, so a fold never aborts on them.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hullaudit/errors.hpp"
#include "hullaudit/ingest.hpp"
#include "hullaudit/report.hpp"
#include "hullaudit/solver.hpp"
#include "hullaudit/transform.hpp"

namespace hullaudit {

struct SplitPlan {
  enum class Mode { given_split, holdout, kfold };
  Mode mode = Mode::given_split;
  double holdout_fraction = 0.2;  // holdout only
  std::size_t k = 5;              // kfold only
  std::uint64_t seed = 0;

  void validate() const {
    if (mode == Mode::holdout && !(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw Error("holdout fraction must lie strictly between 0 and 1");
    if (mode == Mode::kfold && k < 2) throw Error("k must be at least 2");
  }
};

struct AnalysisResult {
  std::vector<ExtrapolationReport> reports;
  CohortSummary summary;
};

struct AnalysisOptions {
  ScalingMode scaling = ScalingMode::minmax;
  double significance = 0.05;
  std::size_t jobs = 0;   // 0 picks the hardware thread count
  std::string timestamp;  // empty picks the current UTC time per report
};

// Fit the transform on train only, encode both tables, classify every test
// row against the training hull, and report. Queries are numbered by their
// test-table row, starting at 1.
inline AnalysisResult run_analysis(const RawTable& train, const RawTable& test,
                                   const SolverConfig& config,
                                   const AnalysisOptions& opts = {}) {
  config.validate();
  if (train.columns != test.columns)
    throw SchemaMismatch("train and test tables have different schemas");

  Dataset ds = fit_transform(train, opts.scaling, UnknownPolicy::zero_vector);
  EncodedTable encoded = apply_all(ds.transform, test);

  std::vector<BatchEntry> entries =
      batch_classify(ds, encoded.matrix, config, opts.jobs);

  ReportMeta meta;
  meta.solver = config;
  meta.timestamp = opts.timestamp.empty() ? detail::iso8601_utc_now() : opts.timestamp;

  AnalysisResult out;
  out.reports.reserve(entries.size());
  std::size_t unknown_cursor = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].error.empty())
      throw Error("query row " + std::to_string(i + 1) + " failed: " + entries[i].error);
    while (unknown_cursor < encoded.rows_with_unknown_category.size() &&
           encoded.rows_with_unknown_category[unknown_cursor] < i)
      ++unknown_cursor;
    meta.unknown_category =
        unknown_cursor < encoded.rows_with_unknown_category.size() &&
        encoded.rows_with_unknown_category[unknown_cursor] == i;
    out.reports.push_back(build_report(*entries[i].verdict, ds.transform,
                                       "row_" + std::to_string(i + 1),
                                       opts.significance, meta));
  }
  out.summary = summarize_cohort(out.reports);
  return out;
}

struct CvResult {
  std::vector<CohortSummary> folds;
  CohortSummary pooled;
  // Every fold's reports, query ids prefixed "foldN_", in fold order.
  std::vector<ExtrapolationReport> reports;
};

// k-fold cross-validation: deterministic shuffle under the plan's seed,
// fold sizes differing by at most one, transform refitted on each fold's
// training part. Pooled summary covers all folds' reports together.
inline CvResult run_cv(const RawTable& table, const SplitPlan& plan,
                       const SolverConfig& config, const AnalysisOptions& opts = {}) {
  plan.validate();
  if (plan.mode != SplitPlan::Mode::kfold)
    throw Error("run_cv requires a kfold split plan");
  if (table.row_count < plan.k)
    throw TooFewRows("need at least " + std::to_string(plan.k) + " rows for " +
                     std::to_string(plan.k) + "-fold cross-validation, have " +
                     std::to_string(table.row_count));

  std::vector<std::size_t> order(table.row_count);
  std::iota(order.begin(), order.end(), 0);
  detail::Rng rng{plan.seed};
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);

  const std::size_t k = plan.k;
  CvResult out;
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = table.row_count / k + (f < table.row_count % k ? 1 : 0);
    std::vector<std::size_t> test_rows(order.begin() + std::ptrdiff_t(cursor),
                                       order.begin() + std::ptrdiff_t(cursor + size));
    cursor += size;
    std::sort(test_rows.begin(), test_rows.end());
    std::vector<std::size_t> train_rows;
    train_rows.reserve(table.row_count - size);
    std::size_t t = 0;
    for (std::size_t r = 0; r < table.row_count; ++r) {
      if (t < test_rows.size() && test_rows[t] == r)
        ++t;
      else
        train_rows.push_back(r);
    }
    AnalysisResult fold =
        run_analysis(select_rows(table, train_rows), select_rows(table, test_rows),
                     config, opts);
    out.folds.push_back(fold.summary);
    for (auto& rep : fold.reports) {
      rep.query_id = "fold" + std::to_string(f + 1) + "_" + rep.query_id;
      out.reports.push_back(std::move(rep));
    }
  }
  out.pooled = summarize_cohort(out.reports);
  return out;
}

enum class SyntheticDistribution { gaussian, uniform_box };

inline SyntheticDistribution synthetic_distribution_from_string(const std::string& s) {
  if (s == "gaussian") return SyntheticDistribution::gaussian;
  if (s == "uniform_box") return SyntheticDistribution::uniform_box;
  throw Error("unknown distribution '" + s + "'");
}

// Deterministic numeric table with columns x1..xd: standard normal cells or
// uniform draws from the unit box.
inline RawTable make_synthetic(std::size_t n, std::size_t d,
                               SyntheticDistribution distribution,
                               std::uint64_t seed) {
  if (n < 1 || d < 1) throw Error("synthetic tables need n >= 1 and d >= 1");
  RawTable t;
  t.row_count = n;
  t.columns.reserve(d);
  t.data.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    t.columns.push_back({"x" + std::to_string(c + 1), ColumnKind::numeric, {}});
    t.data[c].numeric.resize(n);
    t.data[c].missing.assign(n, 0);
  }
  detail::Rng rng{seed};
  // Row-major fill so the stream order matches how rows are read.
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c)
      t.data[c].numeric[r] = distribution == SyntheticDistribution::gaussian
                                 ? rng.gaussian()
                                 : rng.uniform01();
  return t;
}

// Queries guaranteed inside the hull: convex combinations of `support`
// distinct training rows with positive weights.
inline Matrix interior_queries(const Matrix& rows, std::size_t count,
                               std::size_t support, std::uint64_t seed) {
  const std::size_t n = std::size_t(rows.rows());
  support = std::min(std::max<std::size_t>(support, 1), n);
  Matrix out(Eigen::Index(count), rows.cols());
  detail::Rng rng{seed};
  std::vector<std::size_t> picks(n);
  std::iota(picks.begin(), picks.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    // Partial Fisher-Yates for the support, then positive weights.
    for (std::size_t j = 0; j < support; ++j)
      std::swap(picks[j], picks[j + rng.below(n - j)]);
    Vector w(static_cast<Eigen::Index>(support));
    for (std::size_t j = 0; j < support; ++j)
      w[Eigen::Index(j)] = -std::log(1.0 - rng.uniform01());
    w /= w.sum();
    Vector q = Vector::Zero(rows.cols());
    for (std::size_t j = 0; j < support; ++j)
      q += w[Eigen::Index(j)] * rows.row(Eigen::Index(picks[j])).transpose();
    out.row(Eigen::Index(i)) = q;
  }
  return out;
}

// Wrap a plain matrix as a Dataset whose features are the identity encoding
// of columns x1..xd, for callers that start from vectors rather than tables.
inline Dataset dataset_from_matrix(Matrix m) {
  if (m.rows() < 1 || m.cols() < 1) throw EmptyTable("matrix dataset needs rows and columns");
  Dataset ds;
  ds.transform.scaling = ScalingMode::none;
  ds.transform.output_dim = std::size_t(m.cols());
  detail::Fnv1a h;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) h.f64(m(r, c));
  ds.transform.fitted_on = h.state;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    FeatureEncoding f;
    f.name = "x" + std::to_string(c + 1);
    f.encoding = NumericEncoding{0.0, 1.0};
    f.offset = std::size_t(c);
    f.width = 1;
    ds.transform.features.push_back(std::move(f));
  }
  ds.matrix = std::move(m);
  if (!ds.matrix.allFinite()) throw NonFiniteInput("matrix dataset has non-finite entries");
  return ds;
}

}  // namespace hullaudit
