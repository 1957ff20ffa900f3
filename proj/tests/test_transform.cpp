#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "hullaudit/oracle.hpp"
#include "hullaudit/transform.hpp"

using namespace hullaudit;

namespace {

std::string temp_path(const std::string& name) {
  static int counter = 0;
  auto dir = std::filesystem::path(::testing::TempDir()) / "hullaudit_transform";
  std::filesystem::create_directories(dir);
  return (dir / (std::to_string(counter++) + "_" + name)).string();
}

RawTable table_from_csv(const std::string& text, const Schema& schema,
                        bool keep_missing = false) {
  LoadOptions opts;
  opts.drop_incomplete = !keep_missing;
  return load_table_text(text, schema, opts);
}

Schema mixed_schema() {
  Schema s;
  s.columns = {{"age", ColumnKind::numeric, {}},
               {"country", ColumnKind::categorical, {}},
               {"hours", ColumnKind::numeric, {}}};
  return s;
}

}  // namespace

TEST(FitTransform, TwoPointMinMax) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto t = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  ASSERT_EQ(ds.transform.features.size(), 1u);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().shift, 3.0);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().scale, 4.0);
  ASSERT_EQ(ds.n(), 2u);
  EXPECT_DOUBLE_EQ(ds.matrix(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(ds.matrix(1, 0), 1.0);
}

TEST(FitTransform, OneHotPair) {
  Schema s;
  s.columns = {{"c", ColumnKind::categorical, {}}};
  auto t = table_from_csv("c\nA\nB\nA\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  EXPECT_EQ(ds.transform.output_dim, 2u);
  ASSERT_EQ(ds.transform.features[0].width, 2u);
  EXPECT_EQ(ds.transform.features[0].categorical().category_order,
            (std::vector<std::string>{"A", "B"}));
  EXPECT_DOUBLE_EQ(ds.matrix(0, 0), 1.0);  // "A" -> (1, 0)
  EXPECT_DOUBLE_EQ(ds.matrix(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(ds.matrix(1, 0), 0.0);  // "B" -> (0, 1)
  EXPECT_DOUBLE_EQ(ds.matrix(1, 1), 1.0);
}

TEST(FitTransform, OutputDimAddsNumericAndCategoryCounts) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n",
                          mixed_schema());
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  // 2 numeric + 3 categories
  EXPECT_EQ(ds.transform.output_dim, 5u);
  EXPECT_EQ(ds.d(), 5u);
}

TEST(FitTransform, BlocksPartitionOutputColumns) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n",
                          mixed_schema());
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  std::size_t expect_offset = 0;
  for (const auto& f : ds.feature_blocks()) {
    EXPECT_EQ(f.offset, expect_offset);
    EXPECT_GE(f.width, 1u);
    expect_offset += f.width;
  }
  EXPECT_EQ(expect_offset, ds.transform.output_dim);
}

TEST(FitTransform, OneHotBlocksRowSumToOne) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n40,US,10\n",
                          mixed_schema());
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  const auto* country = ds.transform.find("country");
  ASSERT_NE(country, nullptr);
  for (std::size_t r = 0; r < ds.n(); ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < country->width; ++j)
      sum += ds.matrix(Eigen::Index(r), Eigen::Index(country->offset + j));
    EXPECT_DOUBLE_EQ(sum, 1.0);
  }
}

TEST(FitTransform, TargetAndIgnoredColumnsExcluded) {
  Schema s;
  s.columns = {{"age", ColumnKind::numeric, {}},
               {"note", ColumnKind::ignored, {}},
               {"income", ColumnKind::target, {}}};
  auto t = table_from_csv("age,note,income\n30,a,hi\n40,b,lo\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  ASSERT_EQ(ds.transform.features.size(), 1u);
  EXPECT_EQ(ds.transform.features[0].name, "age");
  EXPECT_EQ(ds.transform.output_dim, 1u);
}

TEST(FitTransform, ConstantNumericFeatureKeptWithUnitScale) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}, {"w", ColumnKind::numeric, {}}};
  auto t = table_from_csv("v,w\n5,1\n5,2\n5,3\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().shift, 5.0);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().scale, 1.0);
  EXPECT_EQ(ds.transform.degenerate_features, std::vector<std::string>{"v"});
  for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(ds.matrix(Eigen::Index(r), 0), 0.0);
}

TEST(FitTransform, ZscoreUsesMeanAndPopulationDeviation) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto t = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(t, ScalingMode::zscore);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().shift, 5.0);
  EXPECT_DOUBLE_EQ(ds.transform.features[0].numeric().scale, 2.0);
  EXPECT_DOUBLE_EQ(ds.matrix(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(ds.matrix(1, 0), 1.0);
}

TEST(FitTransform, NoneScalingIsIdentity) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto t = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(t, ScalingMode::none);
  EXPECT_DOUBLE_EQ(ds.matrix(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(ds.matrix(1, 0), 7.0);
}

TEST(FitTransform, DeterministicAcrossRefits) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n",
                          mixed_schema());
  Dataset a = fit_transform(t, ScalingMode::minmax);
  Dataset b = fit_transform(t, ScalingMode::minmax);
  EXPECT_TRUE(a.transform == b.transform);
  EXPECT_EQ(a.matrix, b.matrix);
}

TEST(FitTransform, DeclaredCategoriesPinOrderAndRejectStrays) {
  Schema s;
  s.columns = {{"c", ColumnKind::categorical, {"B", "A"}}};
  auto t = table_from_csv("c\nA\nB\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  EXPECT_EQ(ds.transform.features[0].categorical().category_order,
            (std::vector<std::string>{"B", "A"}));
  EXPECT_DOUBLE_EQ(ds.matrix(0, 1), 1.0);  // "A" is second in declared order

  auto stray = table_from_csv("c\nA\nC\n", s);
  EXPECT_THROW(fit_transform(stray, ScalingMode::minmax), UnknownCategory);
}

TEST(FitTransform, EmptyTableAndAllIgnoredThrow) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  RawTable empty;
  empty.columns = s.columns;
  empty.data.resize(1);
  EXPECT_THROW(fit_transform(empty, ScalingMode::minmax), EmptyTable);

  Schema ignored;
  ignored.columns = {{"v", ColumnKind::ignored, {}}};
  auto t = table_from_csv("v\n1\n", ignored);
  EXPECT_THROW(fit_transform(t, ScalingMode::minmax), SchemaMismatch);
}

TEST(Apply, TrainingRowsMatchDatasetRowsBitwise) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n",
                          mixed_schema());
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  for (std::size_t r = 0; r < ds.n(); ++r) {
    Vector v = apply(ds.transform, t, r);
    for (Eigen::Index c = 0; c < v.size(); ++c)
      EXPECT_EQ(v[c], ds.matrix(Eigen::Index(r), c)) << "row " << r << " col " << c;
  }
}

TEST(Apply, NumericValueMapsThroughShiftAndScale) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto train = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(train, ScalingMode::minmax);
  auto q = table_from_csv("v\n9\n", s);
  Vector enc = apply(ds.transform, q, 0);
  EXPECT_DOUBLE_EQ(enc[0], 1.5);  // (9 - 3) / 4, beyond the box, not clipped
}

TEST(Apply, UnknownCategoryPolicies) {
  Schema s;
  s.columns = {{"c", ColumnKind::categorical, {}}};
  auto train = table_from_csv("c\nA\nB\n", s);
  auto query = table_from_csv("c\nC\n", s);

  Dataset strict = fit_transform(train, ScalingMode::minmax, UnknownPolicy::error);
  EXPECT_THROW(apply(strict.transform, query, 0), UnknownCategory);

  Dataset lax = fit_transform(train, ScalingMode::minmax, UnknownPolicy::zero_vector);
  bool flagged = false;
  Vector enc = apply(lax.transform, query, 0, &flagged);
  EXPECT_TRUE(flagged);
  EXPECT_DOUBLE_EQ(enc[0], 0.0);
  EXPECT_DOUBLE_EQ(enc[1], 0.0);

  auto encoded = apply_all(lax.transform, query);
  EXPECT_EQ(encoded.rows_with_unknown_category, std::vector<std::size_t>{0});
}

TEST(Apply, ZeroVectorEncodingLandsOutsideTheHull) {
  // A zero one-hot block cannot be a convex combination of rows whose block
  // sums to one, so the exact oracle must see the query outside.
  Schema s;
  s.columns = {{"c", ColumnKind::categorical, {}}};
  auto train = table_from_csv("c\nA\nB\nA\n", s);
  Dataset ds = fit_transform(train, ScalingMode::minmax, UnknownPolicy::zero_vector);
  auto query = table_from_csv("c\nC\n", s);
  Vector q = apply(ds.transform, query, 0);
  OracleResult result = exact_membership(ds.matrix, q);
  EXPECT_FALSE(result.inside);
  EXPECT_GT(result.exact_distance, 0.5);
}

TEST(Apply, MissingValueThrows) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto train = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(train, ScalingMode::minmax);
  auto q = table_from_csv("v\n?\n", s, /*keep_missing=*/true);
  EXPECT_THROW(apply(ds.transform, q, 0), MissingValue);
}

TEST(InvertNumeric, MapsBackToRawUnits) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto train = table_from_csv("v\n3\n7\n", s);
  Dataset ds = fit_transform(train, ScalingMode::minmax);
  EXPECT_DOUBLE_EQ(invert_numeric(ds.transform, "v", 1.5), 9.0);
  EXPECT_DOUBLE_EQ(invert_numeric(ds.transform, "v", 0.0), 3.0);
  EXPECT_THROW(invert_numeric(ds.transform, "nope", 0.0), UnknownFeature);
}

TEST(InvertNumeric, RoundTripStaysWithinRelativeTolerance) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}};
  auto train = table_from_csv("v\n-17.25\n423.75\n", s);
  Dataset ds = fit_transform(train, ScalingMode::minmax);
  const auto& enc = ds.transform.features[0].numeric();
  detail::Rng rng{7};
  double worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const double raw = (rng.uniform01() - 0.5) * std::pow(10.0, double(rng.below(9)) - 4.0);
    const double back = invert_numeric(ds.transform, "v", (raw - enc.shift) / enc.scale);
    // The subtraction against the shift fixes the error floor, so a value
    // far smaller than the shift cannot come back with that value's own
    // relative accuracy; the error is relative to the larger of the two.
    const double rel = std::abs(back - raw) / std::max(std::abs(raw), std::abs(enc.shift));
    worst = std::max(worst, rel);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(TransformFiles, SaveLoadRoundTrip) {
  auto t = table_from_csv("age,country,hours\n30,US,40\n40,DE,20\n50,JP,35\n",
                          mixed_schema());
  Dataset ds = fit_transform(t, ScalingMode::zscore, UnknownPolicy::zero_vector);
  auto path = temp_path("transform.json");
  save_transform(ds.transform, path);
  FeatureTransform back = load_transform(path);
  EXPECT_TRUE(back == ds.transform);
}

TEST(TransformFiles, DegenerateListSurvivesRoundTrip) {
  Schema s;
  s.columns = {{"v", ColumnKind::numeric, {}}, {"w", ColumnKind::numeric, {}}};
  auto t = table_from_csv("v,w\n5,1\n5,2\n", s);
  Dataset ds = fit_transform(t, ScalingMode::minmax);
  auto path = temp_path("degenerate.json");
  save_transform(ds.transform, path);
  EXPECT_EQ(load_transform(path).degenerate_features, std::vector<std::string>{"v"});
}
