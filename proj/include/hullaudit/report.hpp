#pragma once

// Extrapolation reports: the residual q - p* decomposed over the original
// features, in raw units where possible, plus the certificate summary and
// enough provenance to reproduce the run. The residual is the minimal
// displacement that returns the query to the hull, so its per-feature
// components are the directions and magnitudes of extrapolation.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hullaudit/detail/util.hpp"
#include "hullaudit/errors.hpp"
#include "hullaudit/solver.hpp"
#include "hullaudit/transform.hpp"

namespace hullaudit {

enum class Direction {
  above_range,
  below_range,
  within_range,
  category_mismatch,
  none
};

inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::above_range: return "above_range";
    case Direction::below_range: return "below_range";
    case Direction::within_range: return "within_range";
    case Direction::category_mismatch: return "category_mismatch";
    case Direction::none: return "none";
  }
  return "none";
}

struct FeatureAttribution {
  std::string feature;
  // Numeric: signed residual in raw units (transformed coordinate times the
  // feature's scale). Categorical: nonnegative norm of the one-hot block's
  // residual; per-category signs carry no disclosure meaning.
  double component = 0.0;
  double share = 0.0;  // squared block residual norm over squared distance
  Direction direction = Direction::none;
};

struct CertificateSummary {
  double margin = 0.0;
  double floor = 0.0;
  double normal_norm = 0.0;
};

struct ReportProvenance {
  std::uint64_t dataset_fingerprint = 0;    // table the transform was fitted on
  std::uint64_t transform_fingerprint = 0;  // the fitted encoding itself
  SolverConfig solver;
  double significance = 0.05;
  // Query had a category unseen at fit time, encoded as a zero block.
  bool unknown_category = false;
  std::string timestamp;
};

struct ExtrapolationReport {
  std::string query_id;
  Status status = Status::Indeterminate;
  double distance = 0.0;  // transformed space
  std::vector<FeatureAttribution> attributions;     // descending share
  std::vector<std::string> significant_features;    // share above threshold
  std::optional<CertificateSummary> certificate;    // Outside only
  ReportProvenance provenance;
};

inline std::uint64_t fingerprint(const FeatureTransform& t) {
  detail::Fnv1a h;
  h.str(to_string(t.scaling));
  h.u64(t.output_dim);
  for (const auto& f : t.features) {
    h.str(f.name);
    if (f.is_numeric()) {
      h.str("numeric");
      h.f64(f.numeric().shift);
      h.f64(f.numeric().scale);
    } else {
      h.str("categorical");
      h.str(to_string(f.categorical().unknown_policy));
      for (const auto& c : f.categorical().category_order) h.str(c);
    }
  }
  return h.state;
}

// Extra context recorded in the report's provenance block.
struct ReportMeta {
  SolverConfig solver;
  std::string timestamp;  // empty picks the current UTC time
  bool unknown_category = false;
};

inline ExtrapolationReport build_report(const MembershipVerdict& verdict,
                                        const FeatureTransform& transform,
                                        const std::string& query_id,
                                        double significance = 0.05,
                                        const ReportMeta& meta = {}) {
  const Vector& r = verdict.projection.residual;
  if (std::size_t(r.size()) != transform.output_dim)
    throw DimensionMismatch("verdict dimension " + std::to_string(r.size()) +
                            " does not match transform output dimension " +
                            std::to_string(transform.output_dim));

  ExtrapolationReport rep;
  rep.query_id = query_id;
  rep.status = verdict.status;
  rep.distance = verdict.projection.distance;

  const bool inside = verdict.status == Status::Inside;
  const double dist2 = rep.distance * rep.distance;
  for (const auto& f : transform.features) {
    FeatureAttribution att;
    att.feature = f.name;
    if (inside) {
      // Within tolerance the residual is numerical noise; a report claiming
      // directions for it would manufacture extrapolation where none is.
      att.direction = f.is_numeric() ? Direction::within_range : Direction::none;
    } else {
      const auto block = r.segment(Eigen::Index(f.offset), Eigen::Index(f.width));
      const double block2 = block.squaredNorm();
      att.share = dist2 > 0 ? block2 / dist2 : 0.0;
      if (f.is_numeric()) {
        const double coord = block[0];
        att.component = coord * f.numeric().scale;
        att.direction = coord > 0   ? Direction::above_range
                        : coord < 0 ? Direction::below_range
                                    : Direction::within_range;
      } else {
        att.component = std::sqrt(block2);
        att.direction =
            block2 > 0 ? Direction::category_mismatch : Direction::none;
      }
    }
    rep.attributions.push_back(std::move(att));
  }

  std::sort(rep.attributions.begin(), rep.attributions.end(),
            [](const FeatureAttribution& x, const FeatureAttribution& y) {
              if (x.share != y.share) return x.share > y.share;
              return x.feature < y.feature;
            });
  for (const auto& att : rep.attributions)
    if (att.share > significance) rep.significant_features.push_back(att.feature);

  if (verdict.status == Status::Outside && verdict.certificate) {
    CertificateSummary c;
    c.margin = verdict.certificate->margin;
    c.floor = verdict.certificate->floor;
    c.normal_norm = verdict.certificate->normal.norm();
    rep.certificate = c;
  }

  rep.provenance.dataset_fingerprint = transform.fitted_on;
  rep.provenance.transform_fingerprint = fingerprint(transform);
  rep.provenance.solver = meta.solver;
  rep.provenance.significance = significance;
  rep.provenance.unknown_category = meta.unknown_category;
  rep.provenance.timestamp =
      meta.timestamp.empty() ? detail::iso8601_utc_now() : meta.timestamp;
  return rep;
}

struct DistanceQuantiles {
  double min = 0.0, p25 = 0.0, median = 0.0, p75 = 0.0, p95 = 0.0, max = 0.0;
};

struct CohortSummary {
  std::size_t total = 0;
  std::size_t inside_count = 0;
  std::size_t outside_count = 0;
  std::size_t indeterminate_count = 0;
  double extrapolation_fraction = 0.0;  // outside over total
  double indeterminate_fraction = 0.0;
  DistanceQuantiles distance;
  // Fraction of reports in which each feature was significant, descending,
  // ties by name.
  std::vector<std::pair<std::string, double>> feature_significance;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

inline CohortSummary summarize_cohort(const std::vector<ExtrapolationReport>& reports) {
  if (reports.empty()) throw EmptyCohort("cohort has no reports");
  CohortSummary s;
  s.total = reports.size();
  std::vector<double> distances;
  distances.reserve(reports.size());
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (const auto& rep : reports) {
    distances.push_back(rep.distance);
    switch (rep.status) {
      case Status::Inside: ++s.inside_count; break;
      case Status::Outside: ++s.outside_count; break;
      case Status::Indeterminate: ++s.indeterminate_count; break;
    }
    for (const auto& name : rep.significant_features) {
      auto it = std::find_if(counts.begin(), counts.end(),
                             [&](const auto& c) { return c.first == name; });
      if (it == counts.end())
        counts.emplace_back(name, 1);
      else
        ++it->second;
    }
  }
  s.extrapolation_fraction = double(s.outside_count) / double(s.total);
  s.indeterminate_fraction = double(s.indeterminate_count) / double(s.total);

  std::sort(distances.begin(), distances.end());
  s.distance.min = distances.front();
  s.distance.p25 = detail::quantile_sorted(distances, 0.25);
  s.distance.median = detail::quantile_sorted(distances, 0.50);
  s.distance.p75 = detail::quantile_sorted(distances, 0.75);
  s.distance.p95 = detail::quantile_sorted(distances, 0.95);
  s.distance.max = distances.back();

  for (const auto& [name, cnt] : counts)
    s.feature_significance.emplace_back(name, double(cnt) / double(s.total));
  std::sort(s.feature_significance.begin(), s.feature_significance.end(),
            [](const auto& x, const auto& y) {
              if (x.second != y.second) return x.second > y.second;
              return x.first < y.first;
            });
  return s;
}

// JSON writers. Field order is fixed and numbers carry 17 significant
// digits, so equal reports serialize to equal bytes.

namespace detail {

class JsonWriter {
 public:
  std::string out;

  void raw(std::string_view s) { out += s; }
  void key(std::string_view k) {
    comma();
    out += '"';
    out += k;
    out += "\":";
    fresh_ = true;
  }
  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array() { open('['); }
  void end_array() { close(']'); }
  void string(std::string_view v) {
    comma();
    out += '"';
    out += json_escape(std::string(v));
    out += '"';
  }
  void number(double v) {
    comma();
    out += format_double17(v);
  }
  void integer(std::uint64_t v) {
    comma();
    out += std::to_string(v);
  }
  void boolean(bool v) {
    comma();
    out += v ? "true" : "false";
  }
  void null() {
    comma();
    out += "null";
  }

 private:
  bool fresh_ = true;
  void comma() {
    if (!fresh_) out += ',';
    fresh_ = false;
  }
  void open(char c) {
    comma();
    out += c;
    fresh_ = true;
  }
  void close(char c) {
    out += c;
    fresh_ = false;
  }
};

inline void write_solver_config(JsonWriter& w, const SolverConfig& cfg) {
  w.begin_object();
  w.key("variant");
  w.string(to_string(cfg.variant));
  w.key("gap_tolerance");
  w.number(cfg.gap_tolerance);
  w.key("membership_tolerance");
  w.number(cfg.membership_tolerance);
  w.key("max_iterations");
  w.integer(cfg.max_iterations);
  w.end_object();
}

}  // namespace detail

inline std::string to_json(const ExtrapolationReport& rep) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("query_id");
  w.string(rep.query_id);
  w.key("status");
  w.string(to_string(rep.status));
  w.key("distance");
  w.number(rep.distance);
  w.key("certificate");
  if (rep.certificate) {
    w.begin_object();
    w.key("margin");
    w.number(rep.certificate->margin);
    w.key("floor");
    w.number(rep.certificate->floor);
    w.key("normal_norm");
    w.number(rep.certificate->normal_norm);
    w.end_object();
  } else {
    w.null();
  }
  w.key("attributions");
  w.begin_array();
  for (const auto& att : rep.attributions) {
    w.begin_object();
    w.key("feature");
    w.string(att.feature);
    w.key("component");
    w.number(att.component);
    w.key("share");
    w.number(att.share);
    w.key("direction");
    w.string(to_string(att.direction));
    w.end_object();
  }
  w.end_array();
  w.key("significant_features");
  w.begin_array();
  for (const auto& name : rep.significant_features) w.string(name);
  w.end_array();
  w.key("provenance");
  w.begin_object();
  w.key("dataset_fingerprint");
  w.string(detail::hex64(rep.provenance.dataset_fingerprint));
  w.key("transform_fingerprint");
  w.string(detail::hex64(rep.provenance.transform_fingerprint));
  w.key("solver");
  detail::write_solver_config(w, rep.provenance.solver);
  w.key("significance");
  w.number(rep.provenance.significance);
  w.key("unknown_category");
  w.boolean(rep.provenance.unknown_category);
  w.key("timestamp");
  w.string(rep.provenance.timestamp);
  w.end_object();
  w.end_object();
  return w.out;
}

inline std::string to_json(const CohortSummary& s) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("total");
  w.integer(s.total);
  w.key("inside");
  w.integer(s.inside_count);
  w.key("outside");
  w.integer(s.outside_count);
  w.key("indeterminate");
  w.integer(s.indeterminate_count);
  w.key("extrapolation_fraction");
  w.number(s.extrapolation_fraction);
  w.key("indeterminate_fraction");
  w.number(s.indeterminate_fraction);
  w.key("distance_quantiles");
  w.begin_object();
  w.key("min");
  w.number(s.distance.min);
  w.key("p25");
  w.number(s.distance.p25);
  w.key("median");
  w.number(s.distance.median);
  w.key("p75");
  w.number(s.distance.p75);
  w.key("p95");
  w.number(s.distance.p95);
  w.key("max");
  w.number(s.distance.max);
  w.end_object();
  w.key("feature_significance");
  w.begin_array();
  for (const auto& [name, freq] : s.feature_significance) {
    w.begin_object();
    w.key("feature");
    w.string(name);
    w.key("frequency");
    w.number(freq);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.out;
}

// Aligned terminal rendering of a cohort summary.
inline std::string format_summary_table(const CohortSummary& s) {
  char buf[160];
  std::string out;
  auto line = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof(buf), "  %-26s %s\n", label, value.c_str());
    out += buf;
  };
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  out += "cohort summary\n";
  line("queries", std::to_string(s.total));
  line("inside", std::to_string(s.inside_count));
  line("outside", std::to_string(s.outside_count));
  line("indeterminate", std::to_string(s.indeterminate_count));
  line("extrapolation fraction", fmt(s.extrapolation_fraction));
  line("indeterminate fraction", fmt(s.indeterminate_fraction));
  line("distance min / median / max",
       fmt(s.distance.min) + " / " + fmt(s.distance.median) + " / " + fmt(s.distance.max));
  line("distance p25 / p75 / p95",
       fmt(s.distance.p25) + " / " + fmt(s.distance.p75) + " / " + fmt(s.distance.p95));
  if (!s.feature_significance.empty()) {
    out += "  significant features (fraction of queries)\n";
    for (const auto& [name, freq] : s.feature_significance) {
      std::snprintf(buf, sizeof(buf), "    %-24s %s\n", name.c_str(), fmt(freq).c_str());
      out += buf;
    }
  }
  return out;
}

}  // namespace hullaudit
