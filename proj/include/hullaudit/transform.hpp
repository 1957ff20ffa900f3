#pragma once

// Fitted feature encodings: affine scaling for numeric columns, one-hot
// expansion for categorical columns. The transform is fitted on training
// data only and then applied unchanged to queries, so training rows and
// queries land in the same space. Out-of-range numeric queries are not
// clipped; landing outside the training box is the signal being measured.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hullaudit/detail/util.hpp"
#include "hullaudit/errors.hpp"
#include "hullaudit/ingest.hpp"

namespace hullaudit {

// Row-major so that a training row is one contiguous span; the solver's
// per-row scans depend on that layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ScalingMode { minmax, zscore, none };

inline std::string to_string(ScalingMode m) {
  switch (m) {
    case ScalingMode::minmax: return "minmax";
    case ScalingMode::zscore: return "zscore";
    case ScalingMode::none: return "none";
  }
  return "minmax";
}

inline ScalingMode scaling_mode_from_string(const std::string& s) {
  if (s == "minmax") return ScalingMode::minmax;
  if (s == "zscore") return ScalingMode::zscore;
  if (s == "none") return ScalingMode::none;
  throw Error("unknown scaling mode '" + s + "'");
}

enum class UnknownPolicy { error, zero_vector };

// encoded = (raw - shift) / scale, so raw = encoded * scale + shift.
struct NumericEncoding {
  double shift = 0.0;
  double scale = 1.0;

  bool operator==(const NumericEncoding&) const = default;
};

struct CategoricalEncoding {
  std::vector<std::string> category_order;
  UnknownPolicy unknown_policy = UnknownPolicy::error;

  bool operator==(const CategoricalEncoding&) const = default;
};

struct FeatureEncoding {
  std::string name;
  std::variant<NumericEncoding, CategoricalEncoding> encoding;
  // Contiguous output columns [offset, offset + width).
  std::size_t offset = 0;
  std::size_t width = 0;

  bool is_numeric() const { return std::holds_alternative<NumericEncoding>(encoding); }
  const NumericEncoding& numeric() const { return std::get<NumericEncoding>(encoding); }
  const CategoricalEncoding& categorical() const {
    return std::get<CategoricalEncoding>(encoding);
  }

  bool operator==(const FeatureEncoding&) const = default;
};

struct FeatureTransform {
  std::vector<FeatureEncoding> features;
  std::size_t output_dim = 0;
  ScalingMode scaling = ScalingMode::minmax;
  std::uint64_t fitted_on = 0;  // fingerprint of the training table
  // Numeric features that were constant at fit time. Their scale is 1 so the
  // encoding stays invertible; any query off the constant still registers.
  std::vector<std::string> degenerate_features;

  const FeatureEncoding* find(std::string_view name) const {
    for (const auto& f : features)
      if (f.name == name) return &f;
    return nullptr;
  }

  bool operator==(const FeatureTransform&) const = default;
};

struct Dataset {
  Matrix matrix;  // n rows of transformed training points
  FeatureTransform transform;

  std::size_t n() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(matrix.cols()); }
  const std::vector<FeatureEncoding>& feature_blocks() const {
    return transform.features;
  }
};

namespace detail {

inline std::size_t require_column(const RawTable& table, const std::string& name) {
  auto idx = table.column_index(name);
  if (!idx) throw SchemaMismatch("table lacks column '" + name + "'");
  return *idx;
}

}  // namespace detail

// Encode one table row. Throws MissingValue on a missing cell and
// UnknownCategory for an unlisted label under the error policy; under
// zero_vector the feature's block stays all zero and *had_unknown (when
// given) is set.
inline Vector apply(const FeatureTransform& t, const RawTable& table, std::size_t row,
                    bool* had_unknown = nullptr) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(t.output_dim));
  for (const auto& f : t.features) {
    const std::size_t col = detail::require_column(table, f.name);
    if (table.is_missing(row, col))
      throw MissingValue("row " + std::to_string(row + 1) + " has no value for '" +
                         f.name + "'");
    if (f.is_numeric()) {
      if (table.columns[col].kind != ColumnKind::numeric)
        throw SchemaMismatch("column '" + f.name + "' is not numeric");
      const double raw = table.numeric_at(row, col);
      if (!std::isfinite(raw))
        throw NonFiniteInput("non-finite value in column '" + f.name + "'");
      out[static_cast<Eigen::Index>(f.offset)] = (raw - f.numeric().shift) / f.numeric().scale;
    } else {
      if (table.columns[col].kind == ColumnKind::numeric)
        throw SchemaMismatch("column '" + f.name + "' is not categorical");
      const std::string& label = table.label_at(row, col);
      const auto& order = f.categorical().category_order;
      auto it = std::find(order.begin(), order.end(), label);
      if (it == order.end()) {
        if (f.categorical().unknown_policy == UnknownPolicy::error)
          throw UnknownCategory("category '" + label + "' of feature '" + f.name +
                                "' was not seen at fit time");
        if (had_unknown) *had_unknown = true;  // block stays all zero
      } else {
        out[static_cast<Eigen::Index>(f.offset) + (it - order.begin())] = 1.0;
      }
    }
  }
  return out;
}

struct EncodedTable {
  Matrix matrix;
  // Rows where some categorical value was unlisted and encoded as a zero
  // block under the zero_vector policy.
  std::vector<std::size_t> rows_with_unknown_category;
};

inline EncodedTable apply_all(const FeatureTransform& t, const RawTable& table) {
  EncodedTable out;
  out.matrix.resize(static_cast<Eigen::Index>(table.row_count),
                    static_cast<Eigen::Index>(t.output_dim));
  for (std::size_t r = 0; r < table.row_count; ++r) {
    bool unknown = false;
    out.matrix.row(static_cast<Eigen::Index>(r)) = apply(t, table, r, &unknown);
    if (unknown) out.rows_with_unknown_category.push_back(r);
  }
  return out;
}

// Fit scaling and category order on the training table, then encode it.
// Fitting uses the non-ignored, non-target columns. Category order is
// first-appearance order unless the schema declared one; an observed label
// outside a declared list is an error regardless of unknown_policy, because
// a training one-hot block must carry exactly one 1.
inline Dataset fit_transform(const RawTable& train, ScalingMode scaling,
                             UnknownPolicy unknown_policy = UnknownPolicy::error) {
  if (train.row_count == 0) throw EmptyTable("cannot fit a transform on zero rows");

  FeatureTransform t;
  t.scaling = scaling;
  t.fitted_on = fingerprint(train);

  std::size_t offset = 0;
  for (std::size_t c = 0; c < train.columns.size(); ++c) {
    const ColumnSpec& spec = train.columns[c];
    if (spec.kind == ColumnKind::ignored || spec.kind == ColumnKind::target) continue;

    FeatureEncoding f;
    f.name = spec.name;
    f.offset = offset;

    if (spec.kind == ColumnKind::numeric) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < train.row_count; ++r) {
        if (train.is_missing(r, c)) continue;
        const double v = train.numeric_at(r, c);
        if (!std::isfinite(v))
          throw NonFiniteInput("non-finite value in column '" + spec.name + "'");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++count;
      }
      if (count == 0)
        throw EmptyTable("column '" + spec.name + "' has no non-missing values");

      NumericEncoding enc;
      switch (scaling) {
        case ScalingMode::minmax:
          enc.shift = lo;
          enc.scale = hi - lo;
          break;
        case ScalingMode::zscore: {
          const double mean = sum / double(count);
          double ss = 0.0;
          for (std::size_t r = 0; r < train.row_count; ++r) {
            if (train.is_missing(r, c)) continue;
            const double dv = train.numeric_at(r, c) - mean;
            ss += dv * dv;
          }
          enc.shift = mean;
          enc.scale = std::sqrt(ss / double(count));
          break;
        }
        case ScalingMode::none:
          enc.shift = 0.0;
          enc.scale = 1.0;
          break;
      }
      if (enc.scale <= 0.0) {
        enc.scale = 1.0;
        t.degenerate_features.push_back(spec.name);
      }
      f.encoding = enc;
      f.width = 1;
    } else {
      CategoricalEncoding enc;
      enc.unknown_policy = unknown_policy;
      if (!spec.declared_categories.empty()) {
        enc.category_order = spec.declared_categories;
      } else {
        for (std::size_t r = 0; r < train.row_count; ++r) {
          if (train.is_missing(r, c)) continue;
          const std::string& label = train.label_at(r, c);
          if (std::find(enc.category_order.begin(), enc.category_order.end(), label) ==
              enc.category_order.end())
            enc.category_order.push_back(label);
        }
      }
      if (enc.category_order.empty())
        throw EmptyTable("column '" + spec.name + "' has no observed categories");
      f.width = enc.category_order.size();
      f.encoding = std::move(enc);
    }

    offset += f.width;
    t.features.push_back(std::move(f));
  }

  if (t.features.empty())
    throw SchemaMismatch("no usable feature columns (all ignored or target)");
  t.output_dim = offset;

  Dataset ds;
  ds.transform = t;
  // Training rows must encode cleanly whatever the query-time policy is.
  FeatureTransform strict = t;
  for (auto& f : strict.features)
    if (!f.is_numeric())
      std::get<CategoricalEncoding>(f.encoding).unknown_policy = UnknownPolicy::error;
  ds.matrix = apply_all(strict, train).matrix;
  if (!ds.matrix.allFinite())
    throw NonFiniteInput("transformed training matrix has non-finite entries");
  return ds;
}

// Map an encoded coordinate of a numeric feature back to raw units.
inline double invert_numeric(const FeatureTransform& t, std::string_view feature,
                             double value) {
  const FeatureEncoding* f = t.find(feature);
  if (!f || !f->is_numeric())
    throw UnknownFeature("no numeric feature named '" + std::string(feature) + "'");
  return value * f->numeric().scale + f->numeric().shift;
}

inline std::string to_string(UnknownPolicy p) {
  return p == UnknownPolicy::error ? "error" : "zero_vector";
}

inline UnknownPolicy unknown_policy_from_string(const std::string& s) {
  if (s == "error") return UnknownPolicy::error;
  if (s == "zero_vector") return UnknownPolicy::zero_vector;
  throw Error("unknown category policy '" + s + "'");
}

// Transform files: JSON listing each feature's encoding plus the fingerprint
// of the table it was fitted on, for audit reproducibility.
inline void save_transform(const FeatureTransform& t, const std::string& path) {
  nlohmann::ordered_json j;
  j["scaling"] = to_string(t.scaling);
  j["output_dim"] = t.output_dim;
  j["fitted_on"] = detail::hex64(t.fitted_on);
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : t.features) {
    nlohmann::ordered_json jf;
    jf["name"] = f.name;
    if (f.is_numeric()) {
      jf["kind"] = "numeric";
      jf["shift"] = f.numeric().shift;
      jf["scale"] = f.numeric().scale;
    } else {
      jf["kind"] = "categorical";
      jf["categories"] = f.categorical().category_order;
      jf["unknown_policy"] = to_string(f.categorical().unknown_policy);
    }
    j["features"].push_back(std::move(jf));
  }
  if (!t.degenerate_features.empty()) j["degenerate_features"] = t.degenerate_features;
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline FeatureTransform load_transform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("transform file '" + path + "' is not valid JSON: " + e.what());
  }
  FeatureTransform t;
  t.scaling = scaling_mode_from_string(j.value("scaling", std::string("minmax")));
  t.fitted_on = std::stoull(j.value("fitted_on", std::string("0x0")), nullptr, 16);
  std::size_t offset = 0;
  for (const auto& jf : j.at("features")) {
    FeatureEncoding f;
    f.name = jf.at("name").get<std::string>();
    f.offset = offset;
    const std::string kind = jf.at("kind").get<std::string>();
    if (kind == "numeric") {
      NumericEncoding enc;
      enc.shift = jf.at("shift").get<double>();
      enc.scale = jf.at("scale").get<double>();
      if (!(enc.scale > 0)) throw Error("feature '" + f.name + "' has scale <= 0");
      f.encoding = enc;
      f.width = 1;
    } else if (kind == "categorical") {
      CategoricalEncoding enc;
      enc.category_order = jf.at("categories").get<std::vector<std::string>>();
      enc.unknown_policy =
          unknown_policy_from_string(jf.value("unknown_policy", std::string("error")));
      f.width = enc.category_order.size();
      f.encoding = std::move(enc);
    } else {
      throw Error("unknown feature kind '" + kind + "'");
    }
    offset += f.width;
    t.features.push_back(std::move(f));
  }
  t.output_dim = offset;
  if (j.contains("output_dim") && j["output_dim"].get<std::size_t>() != t.output_dim)
    throw Error("transform file output_dim disagrees with its feature list");
  if (j.contains("degenerate_features"))
    t.degenerate_features = j["degenerate_features"].get<std::vector<std::string>>();
  return t;
}

}  // namespace hullaudit
