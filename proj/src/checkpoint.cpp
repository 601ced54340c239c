#include "mothernet/checkpoint.hpp"

#include <fstream>

#include "mothernet/serialize.hpp"

namespace mothernet {

namespace {
constexpr char kMagic[] = "MNCK1";
constexpr uint32_t kFormatVersion = 1;

void write_tensor(std::ostream& os, const std::string& name, const MatrixF& t) {
  write_string(os, name);
  write_u32(os, static_cast<uint32_t>(t.rows()));
  write_u32(os, static_cast<uint32_t>(t.cols()));
  write_bytes(os, t.data(), sizeof(float) * static_cast<size_t>(t.size()));
}
}  // namespace

void save_checkpoint(const TransformerWeights<float>& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os.write(kMagic, 5);
  write_u32(os, kFormatVersion);
  write_u32(os, static_cast<uint32_t>(w.enc.embed_dim));
  write_u32(os, static_cast<uint32_t>(w.enc.layers));
  write_u32(os, static_cast<uint32_t>(w.enc.heads));
  write_u32(os, static_cast<uint32_t>(w.enc.ff_hidden));
  write_u32(os, static_cast<uint32_t>(w.enc.decoder_hidden));
  write_u32(os, static_cast<uint32_t>(w.child.hidden));
  write_u32(os, static_cast<uint32_t>(w.child.rank));
  write_u32(os, static_cast<uint32_t>(w.child.d_max));
  write_u32(os, static_cast<uint32_t>(w.child.n_class_slots));
  const auto named = w.named_tensors();
  write_u32(os, static_cast<uint32_t>(named.size()));
  for (const auto& [name, t] : named) write_tensor(os, name, *t);
  if (!os) throw FormatError("short write to '" + path + "'");
}

TransformerWeights<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  expect_magic(is, kMagic);
  const uint32_t version = read_u32(is, "format version");
  if (version != kFormatVersion) {
    throw FormatError("checkpoint format version " + std::to_string(version) + ", expected " +
                      std::to_string(kFormatVersion));
  }
  EncoderConfig enc;
  enc.embed_dim = static_cast<int>(read_u32(is, "embed_dim"));
  enc.layers = static_cast<int>(read_u32(is, "layers"));
  enc.heads = static_cast<int>(read_u32(is, "heads"));
  enc.ff_hidden = static_cast<int>(read_u32(is, "ff_hidden"));
  enc.decoder_hidden = static_cast<int>(read_u32(is, "decoder_hidden"));
  ChildConfig child;
  child.hidden = static_cast<int>(read_u32(is, "child hidden"));
  child.rank = static_cast<int>(read_u32(is, "child rank"));
  child.d_max = static_cast<int>(read_u32(is, "child d_max"));
  child.n_class_slots = static_cast<int>(read_u32(is, "child class slots"));
  enc.validate();
  child.validate();

  auto w = TransformerWeights<float>::zeros(enc, child);
  auto named = w.named_tensors();
  const uint32_t count = read_u32(is, "tensor count");
  if (count != named.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                      std::to_string(named.size()));
  }
  for (auto& [name, t] : named) {
    const std::string got = read_string(is, "tensor name");
    if (got != name) {
      throw FormatError("checkpoint tensor '" + got + "' where '" + name + "' expected");
    }
    const uint32_t rows = read_u32(is, "tensor rows");
    const uint32_t cols = read_u32(is, "tensor cols");
    if (rows != static_cast<uint32_t>(t->rows()) || cols != static_cast<uint32_t>(t->cols())) {
      throw FormatError("tensor '" + name + "' is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(t->rows()) + "x" +
                        std::to_string(t->cols()));
    }
    read_bytes(is, t->data(), sizeof(float) * static_cast<size_t>(t->size()), name.c_str());
  }
  return w;
}

}  // namespace mothernet
