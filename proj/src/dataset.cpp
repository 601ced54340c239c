#include "mothernet/dataset.hpp"

#include "mothernet/serialize.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mothernet {

void TabularDataset::validate() const {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n < 1) throw ShapeError("dataset has no rows");
  if (!y.empty() && static_cast<Eigen::Index>(y.size()) != n) {
    throw ShapeError("label count does not match row count");
  }
  if (static_cast<Eigen::Index>(categorical_mask.size()) != d) {
    throw ShapeError("categorical mask length does not match feature count");
  }
  if (missing_mask.rows() != n || missing_mask.cols() != d) {
    throw ShapeError("missing mask shape does not match X");
  }
  if (n_classes > kMaxClasses) {
    throw CapacityError("dataset has " + std::to_string(n_classes) +
                        " classes, limit is " + std::to_string(kMaxClasses));
  }
  for (int32_t label : y) {
    if (label < 0 || label >= n_classes) throw ShapeError("label outside [0, n_classes)");
  }
  if (!X.allFinite()) throw NumericError("dataset contains non-finite values");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Splits one CSV line. Double quotes group a field; "" inside quotes is a
// literal quote. No multi-line fields.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_float(const std::string& s, float& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

TabularDataset load_csv(const std::string& path, const std::string& target_column,
                        const std::vector<std::string>& categorical_columns,
                        bool require_target) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
  const std::vector<std::string> header_raw = split_csv_line(line);
  std::vector<std::string> header;
  header.reserve(header_raw.size());
  for (const auto& h : header_raw) header.push_back(trim(h));

  int target_idx = -1;
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == target_column) target_idx = static_cast<int>(j);
  }
  if (target_idx < 0 && require_target) {
    throw ParseError(path + ": target column '" + target_column + "' not found");
  }

  const int d = static_cast<int>(header.size()) - (target_idx >= 0 ? 1 : 0);
  if (d < 1) throw ParseError(path + ": no feature columns");

  std::vector<uint8_t> cat_mask(d, 0);
  {
    int fj = 0;
    for (size_t j = 0; j < header.size(); ++j) {
      if (static_cast<int>(j) == target_idx) continue;
      for (const auto& name : categorical_columns) {
        if (header[j] == name) cat_mask[fj] = 1;
      }
      ++fj;
    }
  }

  std::vector<std::vector<float>> rows;
  std::vector<std::vector<uint8_t>> miss_rows;
  std::vector<int32_t> labels;
  std::vector<std::string> label_names;
  std::map<std::string, int32_t> label_codes;
  // Per categorical feature column: string value -> code, by first appearance.
  std::vector<std::map<std::string, float>> cat_codes(d);

  size_t row_index = 0;  // 1-based over data rows
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_index;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ": row " + std::to_string(row_index) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    std::vector<float> row(d, 0.0f);
    std::vector<uint8_t> miss(d, 0);
    int fj = 0;
    for (size_t j = 0; j < fields.size(); ++j) {
      const std::string cell = trim(fields[j]);
      if (static_cast<int>(j) == target_idx) {
        if (cell.empty()) {
          throw ParseError(path + ": row " + std::to_string(row_index) + " has an empty label");
        }
        auto it = label_codes.find(cell);
        if (it == label_codes.end()) {
          const auto code = static_cast<int32_t>(label_names.size());
          if (code >= kMaxClasses) {
            throw CapacityError(path + ": more than " + std::to_string(kMaxClasses) +
                                " distinct labels");
          }
          it = label_codes.emplace(cell, code).first;
          label_names.push_back(cell);
        }
        labels.push_back(it->second);
        continue;
      }
      if (cell.empty()) {
        miss[fj] = 1;  // value stays 0
      } else if (cat_mask[fj]) {
        auto it = cat_codes[fj].find(cell);
        if (it == cat_codes[fj].end()) {
          it = cat_codes[fj].emplace(cell, static_cast<float>(cat_codes[fj].size())).first;
        }
        row[fj] = it->second;
      } else {
        float v = 0;
        if (!parse_float(cell, v)) {
          throw ParseError(path + ": row " + std::to_string(row_index) + ", column '" +
                           header[j] + "': cannot parse '" + cell + "' as a number");
        }
        if (!std::isfinite(v)) {
          throw ParseError(path + ": row " + std::to_string(row_index) + ", column '" +
                           header[j] + "': non-finite value");
        }
        row[fj] = v;
      }
      ++fj;
    }
    rows.push_back(std::move(row));
    miss_rows.push_back(std::move(miss));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");

  TabularDataset ds;
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.missing_mask.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      ds.X(static_cast<Eigen::Index>(i), j) = rows[i][j];
      ds.missing_mask(static_cast<Eigen::Index>(i), j) = miss_rows[i][j];
    }
  }
  ds.y = std::move(labels);
  ds.categorical_mask = std::move(cat_mask);
  ds.n_classes = static_cast<int>(label_names.size());
  ds.label_names = std::move(label_names);
  if (target_idx >= 0) ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Quantile encoding

QuantileEncoder QuantileEncoder::fit(const TabularDataset& train) {
  QuantileEncoder enc;
  const auto n = train.X.rows();
  const auto d = train.X.cols();
  enc.columns_.resize(static_cast<size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    Column& col = enc.columns_[static_cast<size_t>(j)];
    if (train.categorical_mask[static_cast<size_t>(j)]) continue;
    col.encode = true;

    std::vector<float> sorted(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<size_t>(i)] = train.X(i, j);
    std::sort(sorted.begin(), sorted.end());

    // Collapse duplicates to (value, average rank / (n-1)).
    size_t i = 0;
    while (i < sorted.size()) {
      size_t k = i;
      while (k < sorted.size() && sorted[k] == sorted[i]) ++k;
      col.values.push_back(sorted[i]);
      const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(k - 1));
      const double denom = static_cast<double>(sorted.size()) - 1.0;
      col.cdf.push_back(denom > 0 ? static_cast<float>(avg_rank / denom) : 0.5f);
      i = k;
    }
    if (col.values.size() == 1) col.cdf[0] = 0.5f;  // constant column
  }
  return enc;
}

MatrixF QuantileEncoder::transform(const MatrixF& X) const {
  if (static_cast<size_t>(X.cols()) != columns_.size()) {
    throw ShapeError("quantile transform: column count does not match fit");
  }
  MatrixF out = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const Column& col = columns_[static_cast<size_t>(j)];
    if (!col.encode) continue;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const float v = X(i, j);
      float q;
      if (col.values.size() == 1) {
        q = 0.5f;
      } else if (v <= col.values.front()) {
        q = col.cdf.front();
      } else if (v >= col.values.back()) {
        q = col.cdf.back();
      } else {
        const auto it = std::upper_bound(col.values.begin(), col.values.end(), v);
        const size_t hi = static_cast<size_t>(it - col.values.begin());
        const size_t lo = hi - 1;
        const float t = (v - col.values[lo]) / (col.values[hi] - col.values[lo]);
        q = col.cdf[lo] + t * (col.cdf[hi] - col.cdf[lo]);
      }
      out(i, j) = q;
    }
  }
  return out;
}

TabularDataset QuantileEncoder::transform(const TabularDataset& ds) const {
  TabularDataset out = ds;
  out.X = transform(ds.X);
  return out;
}

MatrixF quantile_encode(const TabularDataset& train, const MatrixF& apply) {
  return QuantileEncoder::fit(train).transform(apply);
}

// ---------------------------------------------------------------------------
// One-hot encoding

OneHotEncoder OneHotEncoder::fit(const TabularDataset& train) {
  OneHotEncoder enc;
  const auto d = train.X.cols();
  enc.columns_.resize(static_cast<size_t>(d));
  Eigen::Index width = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    Column& col = enc.columns_[static_cast<size_t>(j)];
    if (!train.categorical_mask[static_cast<size_t>(j)]) {
      width += 1;
      continue;
    }
    col.encode = true;
    std::vector<float> vals(static_cast<size_t>(train.X.rows()));
    for (Eigen::Index i = 0; i < train.X.rows(); ++i) vals[static_cast<size_t>(i)] = train.X(i, j);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    col.values = std::move(vals);
    width += static_cast<Eigen::Index>(col.values.size());
  }
  enc.width_ = width;
  enc.active_ = width <= kMaxFeatures;
  return enc;
}

Eigen::Index OneHotEncoder::encoded_width() const {
  if (!active_) {
    Eigen::Index w = 0;
    for (const auto& c : columns_) w += 1;  // identity: one column per source column
    return w;
  }
  return width_;
}

MatrixF OneHotEncoder::transform(const MatrixF& X) const {
  if (static_cast<size_t>(X.cols()) != columns_.size()) {
    throw ShapeError("one-hot transform: column count does not match fit");
  }
  if (!active_) return X;
  MatrixF out = MatrixF::Zero(X.rows(), width_);
  Eigen::Index oj = 0;
  for (size_t j = 0; j < columns_.size(); ++j) {
    const Column& col = columns_[j];
    if (!col.encode) {
      out.col(oj++) = X.col(static_cast<Eigen::Index>(j));
      continue;
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const float v = X(i, static_cast<Eigen::Index>(j));
      const auto it = std::lower_bound(col.values.begin(), col.values.end(), v);
      if (it != col.values.end() && *it == v) {
        out(i, oj + static_cast<Eigen::Index>(it - col.values.begin())) = 1.0f;
      }
      // unseen value: block stays all-zero
    }
    oj += static_cast<Eigen::Index>(col.values.size());
  }
  return out;
}

TabularDataset OneHotEncoder::transform(const TabularDataset& ds) const {
  if (!active_) return ds;
  TabularDataset out;
  out.X = transform(ds.X);
  out.y = ds.y;
  out.n_classes = ds.n_classes;
  out.label_names = ds.label_names;
  out.categorical_mask.assign(static_cast<size_t>(width_), 0);
  out.missing_mask = Matrix<uint8_t>::Zero(ds.X.rows(), width_);
  Eigen::Index oj = 0;
  for (size_t j = 0; j < columns_.size(); ++j) {
    const Column& col = columns_[j];
    const Eigen::Index block = col.encode ? static_cast<Eigen::Index>(col.values.size()) : 1;
    if (col.encode) {
      // indicator columns count as categorical; a missing source cell marks
      // the whole block
      for (Eigen::Index b = 0; b < block; ++b) out.categorical_mask[static_cast<size_t>(oj + b)] = 1;
      for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        if (ds.missing_mask(i, static_cast<Eigen::Index>(j))) {
          out.missing_mask.block(i, oj, 1, block).setConstant(1);
        }
      }
    } else {
      out.categorical_mask[static_cast<size_t>(oj)] = ds.categorical_mask[j];
      out.missing_mask.col(oj) = ds.missing_mask.col(static_cast<Eigen::Index>(j));
    }
    oj += block;
  }
  return out;
}

TabularDataset one_hot_encode(const TabularDataset& ds) {
  return OneHotEncoder::fit(ds).transform(ds);
}

// ---------------------------------------------------------------------------
// Rotations

MatrixF rotate_features(const MatrixF& X, int feature_rotation) {
  const auto d = X.cols();
  const Eigen::Index off = ((feature_rotation % d) + d) % d;
  if (off == 0) return X;
  MatrixF out(X.rows(), d);
  for (Eigen::Index j = 0; j < d; ++j) out.col((j + off) % d) = X.col(j);
  return out;
}

std::vector<int32_t> rotate_labels(const std::vector<int32_t>& y, int class_rotation,
                                   int n_classes) {
  if (n_classes < 1) throw ShapeError("rotate_labels: dataset has no classes");
  const int off = ((class_rotation % n_classes) + n_classes) % n_classes;
  std::vector<int32_t> out(y.size());
  for (size_t i = 0; i < y.size(); ++i) out[i] = (y[i] + off) % n_classes;
  return out;
}

TabularDataset rotate(const TabularDataset& ds, int feature_rotation, int class_rotation) {
  TabularDataset out = ds;
  out.X = rotate_features(ds.X, feature_rotation);
  const auto d = ds.X.cols();
  const Eigen::Index off = ((feature_rotation % d) + d) % d;
  for (Eigen::Index j = 0; j < d; ++j) {
    out.categorical_mask[static_cast<size_t>((j + off) % d)] = ds.categorical_mask[static_cast<size_t>(j)];
    out.missing_mask.col((j + off) % d) = ds.missing_mask.col(j);
  }
  if (!ds.y.empty()) {
    out.y = rotate_labels(ds.y, class_rotation, ds.n_classes);
    // label_names would be misleading after relabeling
    if (((class_rotation % ds.n_classes) + ds.n_classes) % ds.n_classes != 0) out.label_names.clear();
  }
  return out;
}

// ---------------------------------------------------------------------------
// MNDS1 container

void save_mnds(const TabularDataset& ds, const std::string& path) {
  ds.validate();
  if (ds.y.size() != static_cast<size_t>(ds.X.rows())) {
    throw FormatError("MNDS1 stores labeled datasets only");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("MNDS1", 5);
  const auto n = ds.X.rows();
  const auto d = ds.X.cols();
  write_u32(os, static_cast<uint32_t>(n));
  write_u32(os, static_cast<uint32_t>(d));
  write_u32(os, static_cast<uint32_t>(ds.n_classes));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) write_f32(os, ds.X(i, j));
  }
  for (Eigen::Index i = 0; i < n; ++i) os.put(static_cast<char>(ds.y[static_cast<size_t>(i)]));
  os.write(reinterpret_cast<const char*>(pack_bits(ds.categorical_mask).data()),
           static_cast<std::streamsize>((ds.categorical_mask.size() + 7) / 8));
  std::vector<uint8_t> miss(static_cast<size_t>(n) * static_cast<size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      miss[static_cast<size_t>(j) * static_cast<size_t>(n) + static_cast<size_t>(i)] =
          ds.missing_mask(i, j);
    }
  }
  const auto packed = pack_bits(miss);
  os.write(reinterpret_cast<const char*>(packed.data()),
           static_cast<std::streamsize>(packed.size()));
  if (!os) throw FormatError("write failed for " + path);
}

TabularDataset load_mnds(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  expect_magic(is, "MNDS1");
  const uint32_t n = read_u32(is, "n_rows");
  const uint32_t d = read_u32(is, "n_features");
  const uint32_t c = read_u32(is, "n_classes");
  if (n < 1 || d < 1 || c < 1) throw FormatError(path + ": empty dataset");
  if (c > static_cast<uint32_t>(kMaxClasses)) throw FormatError(path + ": class count exceeds limit");

  TabularDataset ds;
  ds.X.resize(n, d);
  for (uint32_t j = 0; j < d; ++j) {
    for (uint32_t i = 0; i < n; ++i) ds.X(i, j) = read_f32(is, "X");
  }
  ds.y.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t b = 0;
    read_bytes(is, &b, 1, "labels");
    ds.y[i] = b;
  }
  ds.n_classes = static_cast<int>(c);

  std::vector<uint8_t> cat_bytes((d + 7) / 8);
  read_bytes(is, cat_bytes.data(), cat_bytes.size(), "categorical bitmap");
  ds.categorical_mask = unpack_bits(cat_bytes, d);

  const size_t cells = static_cast<size_t>(n) * d;
  std::vector<uint8_t> miss_bytes((cells + 7) / 8);
  read_bytes(is, miss_bytes.data(), miss_bytes.size(), "missing bitmap");
  const auto bits = unpack_bits(miss_bytes, cells);
  ds.missing_mask.resize(n, d);
  for (uint32_t j = 0; j < d; ++j) {
    for (uint32_t i = 0; i < n; ++i) {
      ds.missing_mask(i, j) = bits[static_cast<size_t>(j) * n + i];
    }
  }
  ds.validate();
  return ds;
}

}  // namespace mothernet
