#pragma once

// Weight checkpoints. Binary container, magic "MNCK1":
//   u32 format_version (1)
//   u32 embed_dim, layers, heads, ff_hidden, decoder_hidden
//   u32 child_hidden, child_rank, child_d_max, child_class_slots
//   u32 tensor_count, then per tensor: name (u64 len + bytes),
//   u32 rows, u32 cols, f32 row-major data.
// Tensors are stored in the canonical enumeration order and the loader
// insists on exactly that order; a renamed or reshaped tensor is a
// format error, not a silent partial load.

#include <string>

#include "mothernet/encoder.hpp"

namespace mothernet {

void save_checkpoint(const TransformerWeights<float>& w, const std::string& path);
TransformerWeights<float> load_checkpoint(const std::string& path);

}  // namespace mothernet
