// Inference benchmark: compares the amortized path (fit the child once, then
// push prediction batches through it) with the naive path that re-runs the
// full encoder for every prediction batch. A forward-pass counter proves the
// child path never touches the transformer.
#pragma once

#include <cstdint>
#include <string>

#include "mothernet/dataset.hpp"
#include "mothernet/encoder.hpp"

namespace mothernet {

struct BenchReport {
  int n_rows = 0;
  int batch_size = 0;
  int repeats = 0;
  double fit_seconds = 0.0;            // one in-context fit
  double child_seconds = 0.0;          // median over repeats, all rows
  double encoder_path_seconds = 0.0;   // median over repeats, all rows
  double child_rows_per_sec = 0.0;
  double encoder_path_rows_per_sec = 0.0;
  double speedup = 0.0;
  uint64_t encoder_passes_child_path = 0;  // stays 0 when the child path is honest
};

BenchReport bench_inference(const TransformerWeights<float>& w, const TabularDataset& train,
                            int n_rows, int batch_size, int repeats, uint64_t seed);

std::string bench_report_json(const BenchReport& report);

}  // namespace mothernet
