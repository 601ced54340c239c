#include "mothernet/encoder.hpp"

namespace mothernet {

std::atomic<uint64_t>& transformer_forward_count() {
  static std::atomic<uint64_t> count{0};
  return count;
}

}  // namespace mothernet
