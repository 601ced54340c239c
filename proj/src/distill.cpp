#include "mothernet/distill.hpp"

#include <fstream>

#include "mothernet/serialize.hpp"

namespace mothernet {

namespace {

void write_tensor(std::ostream& os, const MatrixF& m) {
  write_u32(os, static_cast<uint32_t>(m.rows()));
  write_u32(os, static_cast<uint32_t>(m.cols()));
  write_bytes(os, m.data(), sizeof(float) * static_cast<size_t>(m.size()));
}

MatrixF read_tensor(std::istream& is, const char* what) {
  const uint32_t rows = read_u32(is, what);
  const uint32_t cols = read_u32(is, what);
  if (rows < 1 || cols < 1 || static_cast<uint64_t>(rows) * cols > (1u << 26)) {
    throw FormatError(std::string("dense container: implausible shape for ") + what);
  }
  MatrixF m(rows, cols);
  read_bytes(is, m.data(), sizeof(float) * static_cast<size_t>(m.size()), what);
  return m;
}

}  // namespace

void export_dense(const DenseMlpF& mlp, const std::string& path) {
  if (mlp.w.empty() || mlp.w.size() != mlp.b.size()) {
    throw ShapeError("dense container: malformed network");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("MNCH1", 5);
  os.put(static_cast<char>(1));  // kind 1: dense distilled MLP
  write_u32(os, static_cast<uint32_t>(mlp.w.size()));
  for (size_t l = 0; l < mlp.w.size(); ++l) {
    write_tensor(os, mlp.w[l]);
    MatrixF bcol = mlp.b[l];
    write_tensor(os, bcol);
  }
  if (!os) throw FormatError("write failed for " + path);
}

DenseMlpF import_dense(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  expect_magic(is, "MNCH1");
  uint8_t kind = 0;
  read_bytes(is, &kind, 1, "model kind");
  if (kind != 1) {
    throw FormatError(path + ": container holds model kind " + std::to_string(kind) +
                      ", expected a dense distilled MLP (1)");
  }
  const uint32_t n_layers = read_u32(is, "layer count");
  if (n_layers < 1 || n_layers > 64) throw FormatError(path + ": implausible layer count");
  DenseMlpF mlp;
  for (uint32_t l = 0; l < n_layers; ++l) {
    MatrixF w = read_tensor(is, "weights");
    MatrixF b = read_tensor(is, "bias");
    if (b.cols() != 1 || b.rows() != w.rows()) {
      throw FormatError(path + ": bias shape does not match its layer");
    }
    if (!mlp.w.empty() && w.cols() != mlp.w.back().rows()) {
      throw FormatError(path + ": layer widths do not chain");
    }
    mlp.w.push_back(std::move(w));
    mlp.b.push_back(b.col(0));
  }
  return mlp;
}

}  // namespace mothernet
