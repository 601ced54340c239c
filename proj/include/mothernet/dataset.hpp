// Tabular data containers, CSV ingestion, the preprocessing steps applied
// before rows reach the encoder (padding/scaling, quantile and one-hot
// encodings, circular rotations), and the MNDS1 on-disk format.
#pragma once

#include "mothernet/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mothernet {

// Hard model limits: rows are padded to kMaxFeatures columns before entering
// the encoder, and the child network always owns kMaxClasses output units.
inline constexpr int kMaxFeatures = 100;
inline constexpr int kMaxClasses = 10;

struct TabularDataset {
  MatrixF X;  // n × d, missing cells already filled with 0
  std::vector<int32_t> y;                 // size n, values in [0, n_classes)
  std::vector<uint8_t> categorical_mask;  // size d, 1 = categorical column
  Matrix<uint8_t> missing_mask;           // n × d, 1 = cell was missing
  int n_classes = 0;

  // Original label spellings, index = code. Populated by load_csv so
  // prediction output can name probability columns after the user's labels.
  std::vector<std::string> label_names;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  // Throws ShapeError when the pieces disagree (mask shapes, label range).
  void validate() const;
};

// Parses a comma-separated file with a header row. Cells may be quoted with
// double quotes. An empty cell in a feature column counts as missing: the
// value becomes 0 and the missing mask is set. String-valued categorical
// features and labels are coded by first appearance. Throws ParseError with
// the 1-based data row index on malformed input, and CapacityError when the
// target has more than kMaxClasses distinct values. When `require_target` is
// false a missing target column yields an unlabeled dataset (y empty).
TabularDataset load_csv(const std::string& path, const std::string& target_column,
                        const std::vector<std::string>& categorical_columns = {},
                        bool require_target = true);

// Zero-pads rows to kMaxFeatures columns and multiplies the original d
// columns by 100/d, so a row's total scale is roughly independent of how many
// features carry it. d > kMaxFeatures is a CapacityError.
template <typename T>
Matrix<T> pad_and_scale(const Matrix<T>& X) {
  const Eigen::Index d = X.cols();
  if (d < 1) throw ShapeError("pad_and_scale: dataset has no feature columns");
  if (d > kMaxFeatures) {
    throw CapacityError("pad_and_scale: " + std::to_string(d) + " features exceed the limit of " +
                        std::to_string(kMaxFeatures));
  }
  Matrix<T> out = Matrix<T>::Zero(X.rows(), kMaxFeatures);
  out.leftCols(d) = X * (T(100) / T(d));
  return out;
}

// Maps each continuous column through the empirical CDF of its training
// values: sorted training points get ranks 0..n-1 scaled to [0,1], queries
// interpolate linearly between them, duplicates share their average rank, and
// a constant column maps everything to 0.5. Queries outside the observed range
// clamp to the extreme table values (so a tied minimum or maximum keeps its
// average-rank cdf; a unique one gives exactly 0 or 1). Categorical columns
// pass through.
class QuantileEncoder {
 public:
  static QuantileEncoder fit(const TabularDataset& train);

  MatrixF transform(const MatrixF& X) const;
  TabularDataset transform(const TabularDataset& ds) const;

 private:
  struct Column {
    bool encode = false;
    std::vector<float> values;  // unique, ascending
    std::vector<float> cdf;     // same length, in [0,1]
  };
  std::vector<Column> columns_;
};

// Convenience form: fit on `train`, apply to `apply`.
MatrixF quantile_encode(const TabularDataset& train, const MatrixF& apply);

// Expands each categorical column into one binary indicator column per
// distinct training value (ascending value order, in place of the source
// column). Values unseen during fit map to an all-zero block. When the
// encoded width would exceed kMaxFeatures the encoder deactivates and
// transforms become the identity.
class OneHotEncoder {
 public:
  static OneHotEncoder fit(const TabularDataset& train);

  bool active() const { return active_; }
  Eigen::Index encoded_width() const;

  TabularDataset transform(const TabularDataset& ds) const;
  MatrixF transform(const MatrixF& X) const;

 private:
  struct Column {
    bool encode = false;
    std::vector<float> values;  // distinct training values, ascending
  };
  std::vector<Column> columns_;
  bool active_ = false;
  Eigen::Index width_ = 0;
};

// Fit-and-apply on the same dataset.
TabularDataset one_hot_encode(const TabularDataset& ds);

// Circularly shifts feature columns right by `feature_rotation` (column j
// moves to (j + offset) mod d) and relabels classes y -> (y + class_rotation)
// mod c. Both offsets are reduced modulo their dimension.
MatrixF rotate_features(const MatrixF& X, int feature_rotation);
std::vector<int32_t> rotate_labels(const std::vector<int32_t>& y, int class_rotation, int n_classes);
TabularDataset rotate(const TabularDataset& ds, int feature_rotation, int class_rotation);

// MNDS1 container: magic "MNDS1"; u32 n_rows, d, n_classes; X as f32
// column-major; labels as u8; categorical bitmap (d bits); missing bitmap
// (n*d bits, column-major to match X). All integers little-endian.
void save_mnds(const TabularDataset& ds, const std::string& path);
TabularDataset load_mnds(const std::string& path);

}  // namespace mothernet
