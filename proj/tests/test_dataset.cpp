#include <doctest.h>

#include <mothernet/dataset.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using namespace mothernet;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream os(path);
  os << body;
  return path.string();
}

TabularDataset make_ds(const MatrixF& X, std::vector<int32_t> y, int c,
                       std::vector<uint8_t> cat = {}) {
  TabularDataset ds;
  ds.X = X;
  ds.y = std::move(y);
  ds.n_classes = c;
  ds.categorical_mask = cat.empty() ? std::vector<uint8_t>(X.cols(), 0) : std::move(cat);
  ds.missing_mask = Matrix<uint8_t>::Zero(X.rows(), X.cols());
  ds.validate();
  return ds;
}

// Independent empirical-CDF oracle: counts strictly-smaller and equal training
// points instead of walking the encoder's unique-value table.
float cdf_oracle(const std::vector<float>& train, float q) {
  const int n = static_cast<int>(train.size());
  std::vector<float> sorted = train;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) return 0.5f;
  // out-of-range queries clamp to the extreme observed values
  if (q < sorted.front()) q = sorted.front();
  if (q > sorted.back()) q = sorted.back();
  int less = 0, eq = 0;
  for (float v : sorted) {
    if (v < q) ++less;
    else if (v == q) ++eq;
  }
  if (eq > 0) {
    // average rank of the tied block, ranks 0..n-1 scaled by n-1
    const double first = less, last = less + eq - 1;
    return static_cast<float>((first + last) / 2.0 / (n - 1));
  }
  // strictly between two distinct training values: interpolate their cdfs
  float lo = sorted.front(), hi = sorted.back();
  for (float v : sorted) {
    if (v < q) lo = v;
    if (v > q) { hi = v; break; }
  }
  const float cl = cdf_oracle(train, lo), ch = cdf_oracle(train, hi);
  return cl + (ch - cl) * (q - lo) / (hi - lo);
}

}  // namespace

TEST_CASE("csv: missing numeric cell becomes zero and is flagged") {
  const auto path = write_temp("mn_csv_missing.csv",
                               "f1,f2,target\n"
                               "1.0,2.0,a\n"
                               "3.0,,b\n"
                               "5.0,6.0,a\n");
  TabularDataset ds = load_csv(path, "target");
  CHECK(ds.rows() == 3);
  CHECK(ds.cols() == 2);
  CHECK(ds.X(1, 1) == 0.0f);
  CHECK(ds.missing_mask(1, 1) == 1);
  CHECK(ds.missing_mask(0, 1) == 0);
  std::remove(path.c_str());
}

TEST_CASE("csv: labels coded by first appearance") {
  const auto path = write_temp("mn_csv_labels.csv", "x,target\n1,a\n2,b\n3,a\n");
  TabularDataset ds = load_csv(path, "target");
  CHECK(ds.y == std::vector<int32_t>{0, 1, 0});
  CHECK(ds.n_classes == 2);
  CHECK(ds.label_names == std::vector<std::string>{"a", "b"});
  std::remove(path.c_str());
}

TEST_CASE("csv: more than ten distinct labels is rejected") {
  std::string body = "x,target\n";
  for (int i = 0; i < 11; ++i) body += std::to_string(i) + ",label" + std::to_string(i) + "\n";
  const auto path = write_temp("mn_csv_11.csv", body);
  CHECK_THROWS_AS(load_csv(path, "target"), CapacityError);
  std::remove(path.c_str());
}

TEST_CASE("csv: malformed row reports its data row index") {
  const auto path = write_temp("mn_csv_bad.csv", "a,b,target\n1,2,x\n1,oops,y\n");
  try {
    load_csv(path, "target");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv: quoted cells and categorical strings") {
  const auto path = write_temp("mn_csv_quote.csv",
                               "color,size,target\n"
                               "\"red\",1.5,a\n"
                               "blue,2.5,b\n"
                               "red,3.5,a\n");
  TabularDataset ds = load_csv(path, "target", {"color"});
  CHECK(ds.categorical_mask[0] == 1);
  CHECK(ds.categorical_mask[1] == 0);
  CHECK(ds.X(0, 0) == ds.X(2, 0));  // "red" twice, same code
  CHECK(ds.X(0, 0) != ds.X(1, 0));
  std::remove(path.c_str());
}

TEST_CASE("csv: optional target yields unlabeled dataset") {
  const auto path = write_temp("mn_csv_unlabeled.csv", "a,b\n1,2\n3,4\n");
  TabularDataset ds = load_csv(path, "target", {}, /*require_target=*/false);
  CHECK(ds.y.empty());
  CHECK(ds.cols() == 2);
  CHECK_THROWS_AS(load_csv(path, "target"), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("pad_and_scale: d=4 row lands in the first four columns times 25") {
  MatrixF X(1, 4);
  X << 1.0f, 0.0f, 0.5f, 2.0f;
  MatrixF P = pad_and_scale<float>(X);
  REQUIRE(P.cols() == 100);
  CHECK(P(0, 0) == 25.0f);
  CHECK(P(0, 1) == 0.0f);
  CHECK(P(0, 2) == 12.5f);
  CHECK(P(0, 3) == 50.0f);
  for (int j = 4; j < 100; ++j) CHECK(P(0, j) == 0.0f);
}

TEST_CASE("pad_and_scale: d=100 is the identity, d=101 rejected") {
  Rng rng(3);
  std::normal_distribution<float> n;
  MatrixF X(5, 100);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 100; ++j) X(i, j) = n(rng);
  CHECK(pad_and_scale<float>(X) == X);
  MatrixF wide(1, 101);
  wide.setZero();
  CHECK_THROWS_AS(pad_and_scale<float>(wide), CapacityError);
  CHECK_THROWS_AS(pad_and_scale<float>(MatrixF(2, 0)), ShapeError);
}

TEST_CASE("pad_and_scale: dropping the zero columns recovers X*(100/d) exactly") {
  Rng rng(4);
  std::normal_distribution<float> n;
  for (int d : {1, 3, 7, 42, 99}) {
    MatrixF X(4, d);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < d; ++j) X(i, j) = n(rng);
    MatrixF P = pad_and_scale<float>(X);
    MatrixF expect = X * (100.0f / static_cast<float>(d));
    CHECK(P.leftCols(d) == expect);  // bit-exact: same expression shape
    CHECK(P.rightCols(100 - d).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("quantile: rank interpolation on [1,2,3,4]") {
  MatrixF Xtr(4, 1);
  Xtr << 1, 2, 3, 4;
  TabularDataset tr = make_ds(Xtr, {0, 1, 0, 1}, 2);
  MatrixF q(3, 1);
  q << 2.0f, 1.0f, 4.0f;
  MatrixF out = quantile_encode(tr, q);
  CHECK(out(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(out(1, 0) == 0.0f);  // the train minimum
  CHECK(out(2, 0) == 1.0f);  // the train maximum
}

TEST_CASE("quantile: constant train column maps everything to 0.5") {
  MatrixF Xtr = MatrixF::Constant(5, 1, 7.0f);
  TabularDataset tr = make_ds(Xtr, {0, 1, 0, 1, 0}, 2);
  MatrixF q(3, 1);
  q << -100.0f, 7.0f, 42.0f;
  MatrixF out = quantile_encode(tr, q);
  for (int i = 0; i < 3; ++i) CHECK(out(i, 0) == 0.5f);
}

TEST_CASE("quantile: matches the counting oracle, ties included") {
  Rng rng(11);
  std::uniform_int_distribution<int> small(-3, 3);  // forces duplicates
  std::uniform_real_distribution<float> real(-4.0f, 4.0f);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 16;
    std::vector<float> col(n);
    MatrixF Xtr(n, 1);
    for (int i = 0; i < n; ++i) Xtr(i, 0) = col[i] = static_cast<float>(small(rng));
    std::vector<int32_t> y(n);
    for (int i = 0; i < n; ++i) y[i] = i % 2;
    TabularDataset tr = make_ds(Xtr, y, 2);
    MatrixF q(8, 1);
    for (int i = 0; i < 8; ++i) q(i, 0) = i < 4 ? static_cast<float>(small(rng)) : real(rng);
    MatrixF out = quantile_encode(tr, q);
    for (int i = 0; i < 8; ++i) {
      CHECK(out(i, 0) == doctest::Approx(cdf_oracle(col, q(i, 0))).epsilon(1e-5));
      CHECK(out(i, 0) >= 0.0f);
      CHECK(out(i, 0) <= 1.0f);
    }
  }
}

TEST_CASE("quantile: monotone within a column, categorical passes through") {
  Rng rng(12);
  std::normal_distribution<float> n;
  MatrixF Xtr(20, 2);
  for (int i = 0; i < 20; ++i) {
    Xtr(i, 0) = n(rng);
    Xtr(i, 1) = static_cast<float>(i % 3);  // categorical codes
  }
  std::vector<int32_t> y(20);
  for (int i = 0; i < 20; ++i) y[i] = i % 2;
  TabularDataset tr = make_ds(Xtr, y, 2, {0, 1});
  MatrixF q(10, 2);
  for (int i = 0; i < 10; ++i) {
    q(i, 0) = -2.0f + 0.4f * i;  // increasing
    q(i, 1) = 41.0f + i;
  }
  MatrixF out = quantile_encode(tr, q);
  for (int i = 1; i < 10; ++i) CHECK(out(i, 0) >= out(i - 1, 0));
  for (int i = 0; i < 10; ++i) CHECK(out(i, 1) == q(i, 1));  // untouched
}

TEST_CASE("one-hot: three-value column expands to three indicators") {
  MatrixF X(4, 2);
  X << 0, 9.5f, 1, 8.5f, 2, 7.5f, 1, 6.5f;
  TabularDataset ds = make_ds(X, {0, 1, 0, 1}, 2, {1, 0});
  TabularDataset enc = one_hot_encode(ds);
  REQUIRE(enc.cols() == 4);  // 3 indicators + the continuous column
  // row with value 1 -> [0,1,0]
  CHECK(enc.X(1, 0) == 0.0f);
  CHECK(enc.X(1, 1) == 1.0f);
  CHECK(enc.X(1, 2) == 0.0f);
  CHECK(enc.X(1, 3) == 8.5f);
  // indicators are ordered by ascending value
  CHECK(enc.X(0, 0) == 1.0f);
  CHECK(enc.X(2, 2) == 1.0f);
  for (int i = 0; i < 4; ++i) {
    const float block = enc.X(i, 0) + enc.X(i, 1) + enc.X(i, 2);
    CHECK(block == 1.0f);
  }
  CHECK(enc.rows() == ds.rows());
}

TEST_CASE("one-hot: unseen value maps to an all-zero block") {
  MatrixF X(3, 1);
  X << 0, 1, 2;
  TabularDataset tr = make_ds(X, {0, 1, 0}, 2, {1});
  OneHotEncoder enc = OneHotEncoder::fit(tr);
  REQUIRE(enc.active());
  MatrixF q(1, 1);
  q << 5.0f;
  MatrixF out = enc.transform(q);
  REQUIRE(out.cols() == 3);
  CHECK(out(0, 0) == 0.0f);
  CHECK(out(0, 1) == 0.0f);
  CHECK(out(0, 2) == 0.0f);
}

TEST_CASE("one-hot: deactivates when the encoded width would pass 100") {
  // two categorical columns with 60 distinct values each -> 120 columns
  MatrixF X(60, 2);
  for (int i = 0; i < 60; ++i) {
    X(i, 0) = static_cast<float>(i);
    X(i, 1) = static_cast<float>(i + 100);
  }
  std::vector<int32_t> y(60);
  for (int i = 0; i < 60; ++i) y[i] = i % 2;
  TabularDataset ds = make_ds(X, y, 2, {1, 1});
  OneHotEncoder enc = OneHotEncoder::fit(ds);
  CHECK(!enc.active());
  TabularDataset out = enc.transform(ds);
  CHECK(out.X == ds.X);
  CHECK(out.cols() == 2);
}

TEST_CASE("rotation: offsets follow the circular-shift definition") {
  MatrixF X(1, 3);
  X << 10.0f, 20.0f, 30.0f;  // [a,b,c]
  CHECK(rotate_features(X, 0) == X);
  MatrixF r1 = rotate_features(X, 1);
  CHECK(r1(0, 0) == 30.0f);  // [c,a,b]
  CHECK(r1(0, 1) == 10.0f);
  CHECK(r1(0, 2) == 20.0f);
  CHECK(rotate_features(X, 3) == X);  // full cycle

  std::vector<int32_t> y{0, 1, 2};
  CHECK(rotate_labels(y, 2, 3) == std::vector<int32_t>{2, 0, 1});
  CHECK(rotate_labels(y, 0, 3) == y);
}

TEST_CASE("rotation: composing with the inverse offset is the identity") {
  Rng rng(5);
  std::normal_distribution<float> n;
  MatrixF X(6, 7);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 7; ++j) X(i, j) = n(rng);
  std::vector<int32_t> y{0, 1, 2, 3, 0, 1};
  TabularDataset ds = make_ds(X, y, 4);
  for (int fr : {1, 3, 6}) {
    for (int cr : {1, 2, 3}) {
      TabularDataset rot = rotate(ds, fr, cr);
      TabularDataset back = rotate(rot, 7 - fr, 4 - cr);
      CHECK(back.X == ds.X);
      CHECK(back.y == ds.y);
    }
  }
}

TEST_CASE("dataset container round-trips exactly") {
  Rng rng(6);
  std::normal_distribution<float> n;
  MatrixF X(9, 5);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 5; ++j) X(i, j) = n(rng);
  std::vector<int32_t> y{0, 1, 2, 0, 1, 2, 0, 1, 2};
  TabularDataset ds = make_ds(X, y, 3, {0, 1, 0, 0, 1});
  ds.missing_mask(4, 2) = 1;
  ds.missing_mask(8, 4) = 1;

  const auto path = (std::filesystem::temp_directory_path() / "mn_roundtrip.mnds").string();
  save_mnds(ds, path);
  TabularDataset back = load_mnds(path);
  CHECK(back.X == ds.X);
  CHECK(back.y == ds.y);
  CHECK(back.n_classes == 3);
  CHECK(back.categorical_mask == ds.categorical_mask);
  CHECK(Matrix<uint8_t>(back.missing_mask) == ds.missing_mask);
  std::remove(path.c_str());
}

TEST_CASE("dataset container rejects garbage") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bad = (dir / "mn_badmagic.mnds").string();
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOTIT" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(load_mnds(bad), FormatError);
  std::remove(bad.c_str());

  // truncated: write a valid file, chop its tail
  MatrixF X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  TabularDataset ds = make_ds(X, {0, 1, 0}, 2);
  const auto full = (dir / "mn_trunc.mnds").string();
  save_mnds(ds, full);
  const auto sz = std::filesystem::file_size(full);
  std::filesystem::resize_file(full, sz - 7);
  CHECK_THROWS_AS(load_mnds(full), FormatError);
  std::remove(full.c_str());
}

TEST_CASE("validate rejects inconsistent pieces") {
  MatrixF X(3, 2);
  X.setZero();
  TabularDataset ds = make_ds(X, {0, 1, 0}, 2);
  TabularDataset bad = ds;
  bad.y[1] = 5;  // out of range for c=2
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = ds;
  bad.categorical_mask.push_back(1);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = ds;
  bad.missing_mask = Matrix<uint8_t>::Zero(2, 2);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}
