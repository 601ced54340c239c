#include "mothernet/childnet.hpp"

#include "mothernet/serialize.hpp"

#include <json.hpp>

#include <fstream>

namespace mothernet {

namespace {

void write_tensor(std::ostream& os, const MatrixF& m) {
  write_u32(os, static_cast<uint32_t>(m.rows()));
  write_u32(os, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_f32(os, m(i, j));
  }
}

MatrixF read_tensor(std::istream& is, const char* what, Eigen::Index rows, Eigen::Index cols) {
  const uint32_t r = read_u32(is, what);
  const uint32_t cc = read_u32(is, what);
  if (r != static_cast<uint32_t>(rows) || cc != static_cast<uint32_t>(cols)) {
    throw FormatError(std::string("child container: tensor ") + what + " has shape " +
                      std::to_string(r) + "x" + std::to_string(cc) + ", expected " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_f32(is, what);
  }
  return m;
}

}  // namespace

void export_child(const ChildNetwork<float>& net, const std::string& path) {
  net.cfg.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("MNCH1", 5);
  os.put(static_cast<char>(0));  // kind 0: low-rank child
  write_u32(os, static_cast<uint32_t>(net.cfg.hidden));
  write_u32(os, static_cast<uint32_t>(net.cfg.rank));
  write_u32(os, static_cast<uint32_t>(net.cfg.d_max));
  write_u32(os, static_cast<uint32_t>(net.cfg.n_class_slots));
  write_u32(os, static_cast<uint32_t>(net.f));
  write_u32(os, static_cast<uint32_t>(net.c));
  write_tensor(os, net.wp1);
  write_tensor(os, net.b1);
  write_tensor(os, net.wp2);
  write_tensor(os, net.b2);
  write_tensor(os, net.wp3);
  write_tensor(os, net.b3);
  write_tensor(os, net.wf1);
  write_tensor(os, net.wf2);
  if (!os) throw FormatError("write failed for " + path);
}

ChildNetwork<float> import_child(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  expect_magic(is, "MNCH1");
  uint8_t kind = 0;
  read_bytes(is, &kind, 1, "model kind");
  if (kind != 0) {
    throw FormatError(path + ": container holds model kind " + std::to_string(kind) +
                      ", expected a low-rank child (0)");
  }
  ChildNetwork<float> net;
  net.cfg.hidden = static_cast<int>(read_u32(is, "hidden"));
  net.cfg.rank = static_cast<int>(read_u32(is, "rank"));
  net.cfg.d_max = static_cast<int>(read_u32(is, "d_max"));
  net.cfg.n_class_slots = static_cast<int>(read_u32(is, "n_class_slots"));
  net.cfg.validate();
  net.f = static_cast<int>(read_u32(is, "f"));
  net.c = static_cast<int>(read_u32(is, "c"));
  if (net.f < 1 || net.f > net.cfg.d_max || net.c < 1 || net.c > net.cfg.n_class_slots) {
    throw FormatError(path + ": active slice out of range");
  }
  const int h = net.cfg.hidden, r = net.cfg.rank;
  net.wp1 = read_tensor(is, "wp1", h, r);
  net.b1 = read_tensor(is, "b1", h, 1);
  net.wp2 = read_tensor(is, "wp2", h, r);
  net.b2 = read_tensor(is, "b2", h, 1);
  net.wp3 = read_tensor(is, "wp3", net.c, r);
  net.b3 = read_tensor(is, "b3", net.c, 1);
  net.wf1 = read_tensor(is, "wf1", r, net.f);
  net.wf2 = read_tensor(is, "wf2", r, h);
  return net;
}

namespace {

nlohmann::json tensor_json(const MatrixF& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string child_debug_json(const ChildNetwork<float>& net) {
  nlohmann::json j;
  j["kind"] = "low_rank_child";
  j["hidden"] = net.cfg.hidden;
  j["rank"] = net.cfg.rank;
  j["d_max"] = net.cfg.d_max;
  j["n_class_slots"] = net.cfg.n_class_slots;
  j["f"] = net.f;
  j["c"] = net.c;
  j["wp1"] = tensor_json(net.wp1);
  j["b1"] = tensor_json(net.b1);
  j["wp2"] = tensor_json(net.wp2);
  j["b2"] = tensor_json(net.b2);
  j["wp3"] = tensor_json(net.wp3);
  j["b3"] = tensor_json(net.b3);
  j["wf1"] = tensor_json(net.wf1);
  j["wf2"] = tensor_json(net.wf2);
  return j.dump(2);
}

uint8_t peek_child_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  expect_magic(is, "MNCH1");
  uint8_t kind = 0;
  read_bytes(is, &kind, 1, "model kind");
  return kind;
}

}  // namespace mothernet
