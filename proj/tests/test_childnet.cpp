#include <doctest.h>

#include <mothernet/childnet.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

using namespace mothernet;

namespace {

template <typename T>
ChildNetwork<T> random_child(const ChildConfig& cfg, int f, int c, Rng& rng, T scale = T(0.5)) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * static_cast<T>(n(rng));
  };
  Vector<T> phi(cfg.phi_len());
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = scale * static_cast<T>(n(rng));
  Matrix<T> wf1(cfg.rank, cfg.d_max), wf2(cfg.rank, cfg.hidden);
  fill(wf1);
  fill(wf2);
  return assemble_child(phi, wf1, wf2, f, c, cfg);
}

// Plain dense two-hidden-layer MLP, no factorization: the oracle the low-rank
// net must agree with once its factors are multiplied out.
template <typename T>
Vector<T> dense_oracle_logits(const ChildNetwork<T>& net, const Vector<T>& x) {
  const Matrix<T> W1 = net.wp1 * net.wf1;  // h×f
  const Matrix<T> W2 = net.wp2 * net.wf2;  // h×h
  const Matrix<T> W3 = net.wp3 * net.wf2;  // c×h
  Vector<T> h1(W1.rows());
  for (Eigen::Index i = 0; i < W1.rows(); ++i) {
    T s = net.b1(i);
    for (Eigen::Index j = 0; j < x.size(); ++j) s += W1(i, j) * x(j);
    h1(i) = s > T(0) ? s : T(0);
  }
  Vector<T> h2(W2.rows());
  for (Eigen::Index i = 0; i < W2.rows(); ++i) {
    T s = net.b2(i);
    for (Eigen::Index j = 0; j < h1.size(); ++j) s += W2(i, j) * h1(j);
    h2(i) = s > T(0) ? s : T(0);
  }
  Vector<T> out(W3.rows());
  for (Eigen::Index i = 0; i < W3.rows(); ++i) {
    T s = net.b3(i);
    for (Eigen::Index j = 0; j < h2.size(); ++j) s += W3(i, j) * h2(j);
    out(i) = s;
  }
  return out;
}

}  // namespace

TEST_CASE("zero phi predicts the uniform distribution exactly") {
  ChildConfig cfg;
  cfg.hidden = 16;
  cfg.rank = 4;
  Rng rng(1);
  std::normal_distribution<double> n;
  Matrix<float> wf1(cfg.rank, cfg.d_max), wf2(cfg.rank, cfg.hidden);
  for (Eigen::Index i = 0; i < wf1.size(); ++i) wf1.data()[i] = static_cast<float>(n(rng));
  for (Eigen::Index i = 0; i < wf2.size(); ++i) wf2.data()[i] = static_cast<float>(n(rng));
  VectorF phi = VectorF::Zero(cfg.phi_len());
  ChildNetwork<float> net = assemble_child(phi, wf1, wf2, 7, 4, cfg);
  VectorF x(7);
  x << 3.0f, -1.0f, 2.0f, 0.5f, -2.0f, 1.0f, 4.0f;
  VectorF p = net.forward(x);
  REQUIRE(p.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(p(k) == 0.25f);
}

TEST_CASE("assembly slices the task-active blocks") {
  ChildConfig cfg;
  cfg.hidden = 64;
  cfg.rank = 4;
  Rng rng(2);
  ChildNetwork<float> net = random_child<float>(cfg, 5, 3, rng);
  CHECK(net.wp1.rows() == 64);
  CHECK(net.wp1.cols() == 4);
  CHECK(net.wp3.rows() == 3);
  CHECK(net.wp3.cols() == 4);
  CHECK(net.b3.size() == 3);
  CHECK(net.wf1.rows() == 4);
  CHECK(net.wf1.cols() == 5);
  CHECK(net.wf2.rows() == 4);
  CHECK(net.wf2.cols() == 64);

  VectorF phi = VectorF::Zero(cfg.phi_len());
  MatrixF wf1 = MatrixF::Zero(cfg.rank, cfg.d_max), wf2 = MatrixF::Zero(cfg.rank, cfg.hidden);
  CHECK_THROWS_AS(assemble_child(phi, wf1, wf2, 0, 3, cfg), ShapeError);
  CHECK_THROWS_AS(assemble_child(phi, wf1, wf2, 101, 3, cfg), ShapeError);
  CHECK_THROWS_AS(assemble_child(phi, wf1, wf2, 5, 11, cfg), ShapeError);
  CHECK_THROWS_AS(assemble_child(VectorF(VectorF::Zero(3)), wf1, wf2, 5, 3, cfg), ShapeError);
}

TEST_CASE("phi pack/unpack round-trips bit-exactly and the layout is flat row-major") {
  ChildConfig cfg;
  cfg.hidden = 6;
  cfg.rank = 3;
  cfg.n_class_slots = 5;
  Rng rng(3);
  std::normal_distribution<double> n;
  VectorF phi(cfg.phi_len());
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = static_cast<float>(n(rng));
  PhiParts<float> p = unpack_phi(phi, cfg);
  CHECK(pack_phi(p, cfg) == phi);
  // first h*r entries are wp1 rows in order
  CHECK(p.wp1(0, 0) == phi(0));
  CHECK(p.wp1(0, 2) == phi(2));
  CHECK(p.wp1(1, 0) == phi(3));
  // b1 follows immediately
  CHECK(p.b1(0) == phi(6 * 3));
  // b3 is the tail
  CHECK(p.b3(4) == phi(cfg.phi_len() - 1));
  CHECK(phi.size() == 2 * 6 * 3 + 5 * 3 + 2 * 6 + 5);
}

TEST_CASE("low-rank forward equals the densified oracle") {
  ChildConfig cfg;
  cfg.hidden = 24;
  cfg.rank = 6;
  Rng rng(4);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> fdist(1, 100), cdist(2, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const int f = fdist(rng), c = cdist(rng);
    ChildNetwork<float> net = random_child<float>(cfg, f, c, rng, 0.3f);
    VectorF x(f);
    for (int j = 0; j < f; ++j) x(j) = static_cast<float>(n(rng));
    VectorF lr = net.forward_logits(x);
    VectorF dense = dense_oracle_logits(net, x);
    REQUIRE(lr.size() == c);
    for (int k = 0; k < c; ++k) CHECK(lr(k) == doctest::Approx(dense(k)).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("slicing a net equals feeding the unsliced net zero-padded rows, bit for bit") {
  ChildConfig cfg;
  cfg.hidden = 32;
  cfg.rank = 8;
  Rng rng(5);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> fdist(1, 100), cdist(2, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const int f = fdist(rng), c = cdist(rng);
    VectorF phi(cfg.phi_len());
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = 0.4f * static_cast<float>(n(rng));
    MatrixF wf1(cfg.rank, cfg.d_max), wf2(cfg.rank, cfg.hidden);
    for (Eigen::Index i = 0; i < wf1.size(); ++i) wf1.data()[i] = 0.4f * static_cast<float>(n(rng));
    for (Eigen::Index i = 0; i < wf2.size(); ++i) wf2.data()[i] = 0.4f * static_cast<float>(n(rng));
    ChildNetwork<float> sliced = assemble_child(phi, wf1, wf2, f, c, cfg);
    ChildNetwork<float> full = assemble_child(phi, wf1, wf2, cfg.d_max, cfg.n_class_slots, cfg);
    VectorF x(f);
    for (int j = 0; j < f; ++j) x(j) = static_cast<float>(n(rng));
    VectorF padded = VectorF::Zero(cfg.d_max);
    padded.head(f) = x;
    VectorF a = sliced.forward_logits(x);
    VectorF b = full.forward_logits(padded);
    for (int k = 0; k < c; ++k) CHECK(a(k) == b(k));  // exact float equality
  }
}

TEST_CASE("forward rejects bad inputs") {
  ChildConfig cfg;
  cfg.hidden = 8;
  cfg.rank = 2;
  Rng rng(6);
  ChildNetwork<float> net = random_child<float>(cfg, 4, 3, rng);
  VectorF wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(net.forward(wrong), ShapeError);
  VectorF bad(4);
  bad << 1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f, 0.0f;
  CHECK_THROWS_AS(net.forward(bad), NumericError);
}

TEST_CASE("predict_proba rows are distributions") {
  ChildConfig cfg;
  cfg.hidden = 16;
  cfg.rank = 4;
  Rng rng(7);
  std::normal_distribution<double> n;
  ChildNetwork<float> net = random_child<float>(cfg, 6, 5, rng);
  MatrixF X(40, 6);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = 2.0f * static_cast<float>(n(rng));
  MatrixF P = net.predict_proba(X);
  REQUIRE(P.rows() == 40);
  REQUIRE(P.cols() == 5);
  for (int i = 0; i < 40; ++i) {
    CHECK(P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(P.row(i).minCoeff() >= 0.0f);
  }
}

TEST_CASE("loss gradients match central finite differences") {
  ChildConfig cfg;
  cfg.hidden = 10;
  cfg.rank = 3;
  cfg.d_max = 12;
  cfg.n_class_slots = 6;
  Rng rng(8);
  std::normal_distribution<double> n;
  const int f = 5, c = 3, rows = 9;
  ChildNetwork<double> net = random_child<double>(cfg, f, c, rng, 0.6);
  Matrix<double> X(rows, f);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  std::vector<int32_t> y(rows);
  for (int i = 0; i < rows; ++i) y[i] = i % c;

  ChildGrads<double> g;
  child_loss_and_grads(net, X, y, &g);

  const double eps = 1e-6;
  auto fd_check = [&](auto& param, const auto& grad, const char* name) {
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      for (Eigen::Index j = 0; j < param.cols(); ++j) {
        const double orig = param(i, j);
        param(i, j) = orig + eps;
        const double lp = child_loss_and_grads<double>(net, X, y, nullptr);
        param(i, j) = orig - eps;
        const double lm = child_loss_and_grads<double>(net, X, y, nullptr);
        param(i, j) = orig;
        const double numeric = (lp - lm) / (2 * eps);
        INFO(name, "(", i, ",", j, ")");
        CHECK(grad(i, j) == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
      }
    }
  };
  fd_check(net.wp1, g.wp1, "wp1");
  fd_check(net.b1, g.b1, "b1");
  fd_check(net.wp2, g.wp2, "wp2");
  fd_check(net.b2, g.b2, "b2");
  fd_check(net.wp3, g.wp3, "wp3");
  fd_check(net.b3, g.b3, "b3");
  fd_check(net.wf1, g.wf1, "wf1");
  fd_check(net.wf2, g.wf2, "wf2");
}

TEST_CASE("loss validates its inputs") {
  ChildConfig cfg;
  cfg.hidden = 8;
  cfg.rank = 2;
  Rng rng(9);
  ChildNetwork<float> net = random_child<float>(cfg, 4, 3, rng);
  MatrixF X = MatrixF::Zero(3, 4);
  CHECK_THROWS_AS(child_loss_and_grads<float>(net, MatrixF(0, 4), {}, nullptr), ShapeError);
  CHECK_THROWS_AS(child_loss_and_grads<float>(net, X, {0, 1}, nullptr), ShapeError);
  CHECK_THROWS_AS(child_loss_and_grads<float>(net, X, {0, 1, 3}, nullptr), ShapeError);
}

TEST_CASE("finetune with zero epochs is the identity") {
  ChildConfig cfg;
  cfg.hidden = 12;
  cfg.rank = 3;
  Rng rng(10);
  std::normal_distribution<double> n;
  ChildNetwork<float> net = random_child<float>(cfg, 4, 3, rng);
  ChildNetwork<float> before = net;
  MatrixF X(6, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = static_cast<float>(n(rng));
  std::vector<int32_t> y{0, 1, 2, 0, 1, 2};
  FinetuneConfig fc;
  fc.epochs = 0;
  std::vector<float> losses = finetune_child(net, X, y, fc);
  CHECK(losses.empty());
  CHECK(net.wp1 == before.wp1);
  CHECK(net.b1 == before.b1);
  CHECK(net.wp2 == before.wp2);
  CHECK(net.b2 == before.b2);
  CHECK(net.wp3 == before.wp3);
  CHECK(net.b3 == before.b3);
  CHECK(net.wf1 == before.wf1);
  CHECK(net.wf2 == before.wf2);
}

TEST_CASE("one finetune step moves each parameter by -lr times the numeric gradient") {
  ChildConfig cfg;
  cfg.hidden = 8;
  cfg.rank = 3;
  cfg.d_max = 10;
  cfg.n_class_slots = 4;
  Rng rng(11);
  std::normal_distribution<double> n;
  const int f = 4, c = 3;
  ChildNetwork<double> net = random_child<double>(cfg, f, c, rng, 0.6);
  Matrix<double> X(1, f);  // single example
  for (int j = 0; j < f; ++j) X(0, j) = n(rng);
  std::vector<int32_t> y{1};

  // finite-difference gradient oracle for a handful of coordinates
  const double eps = 1e-6;
  auto fd_grad = [&](auto& param, Eigen::Index i, Eigen::Index j) {
    const double orig = param(i, j);
    param(i, j) = orig + eps;
    const double lp = child_loss_and_grads<double>(net, X, y, nullptr);
    param(i, j) = orig - eps;
    const double lm = child_loss_and_grads<double>(net, X, y, nullptr);
    param(i, j) = orig;
    return (lp - lm) / (2 * eps);
  };
  const double g_wp1 = fd_grad(net.wp1, 2, 1);
  const double g_b3 = fd_grad(net.b3, 1, 0);
  const double g_wp3 = fd_grad(net.wp3, 0, 2);

  ChildNetwork<double> stepped = net;
  FinetuneConfig fc;
  fc.epochs = 1;
  fc.lr = 1e-3;
  finetune_child(stepped, X, y, fc);
  CHECK(stepped.wp1(2, 1) - net.wp1(2, 1) == doctest::Approx(-fc.lr * g_wp1).epsilon(1e-4));
  CHECK(stepped.b3(1) - net.b3(1) == doctest::Approx(-fc.lr * g_b3).epsilon(1e-4));
  CHECK(stepped.wp3(0, 2) - net.wp3(0, 2) == doctest::Approx(-fc.lr * g_wp3).epsilon(1e-4));
  // fixed factors stay frozen
  CHECK(stepped.wf1 == net.wf1);
  CHECK(stepped.wf2 == net.wf2);
}

TEST_CASE("finetune descends on a separable toy problem") {
  ChildConfig cfg;
  cfg.hidden = 16;
  cfg.rank = 4;
  Rng rng(12);
  ChildNetwork<float> net = random_child<float>(cfg, 2, 2, rng, 0.3f);
  MatrixF X(20, 2);
  std::vector<int32_t> y(20);
  std::normal_distribution<double> n(0.0, 0.25);
  for (int i = 0; i < 20; ++i) {
    const int cls = i % 2;
    X(i, 0) = static_cast<float>(n(rng)) + (cls == 0 ? -2.0f : 2.0f);
    X(i, 1) = static_cast<float>(n(rng));
    y[i] = cls;
  }
  FinetuneConfig fc;
  fc.epochs = 200;
  fc.lr = 5e-3;
  std::vector<float> losses = finetune_child(net, X, y, fc);
  REQUIRE(losses.size() == 200);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("finetune config validation and dropout gradient scaling") {
  ChildConfig cfg;
  cfg.hidden = 8;
  cfg.rank = 2;
  Rng rng(13);
  ChildNetwork<float> net = random_child<float>(cfg, 3, 2, rng);
  MatrixF X = MatrixF::Ones(4, 3);
  std::vector<int32_t> y{0, 1, 0, 1};
  FinetuneConfig fc;
  fc.epochs = -1;
  CHECK_THROWS_AS(finetune_child(net, X, y, fc), ShapeError);
  fc = FinetuneConfig{};
  fc.dropout = 1.0;
  CHECK_THROWS_AS(finetune_child(net, X, y, fc), ShapeError);
  // dropout runs and still descends on average
  fc = FinetuneConfig{};
  fc.epochs = 100;
  fc.lr = 5e-3;
  fc.dropout = 0.2;
  fc.seed = 42;
  std::vector<float> losses = finetune_child(net, X, y, fc);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("child container round-trips and rejects damage") {
  ChildConfig cfg;
  cfg.hidden = 12;
  cfg.rank = 3;
  Rng rng(14);
  ChildNetwork<float> net = random_child<float>(cfg, 7, 4, rng);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "mn_child.mnch").string();
  export_child(net, path);
  CHECK(peek_child_kind(path) == 0);
  ChildNetwork<float> back = import_child(path);
  CHECK(back.f == 7);
  CHECK(back.c == 4);
  CHECK(back.wp1 == net.wp1);
  CHECK(back.b1 == net.b1);
  CHECK(back.wp2 == net.wp2);
  CHECK(back.b2 == net.b2);
  CHECK(back.wp3 == net.wp3);
  CHECK(back.b3 == net.b3);
  CHECK(back.wf1 == net.wf1);
  CHECK(back.wf2 == net.wf2);

  const auto sz = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, sz - 11);
  CHECK_THROWS_AS(import_child(path), FormatError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "WRONG" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(import_child(path), FormatError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(import_child(path), FormatError);
}

TEST_CASE("debug dump carries shapes and the active slice") {
  ChildConfig cfg;
  cfg.hidden = 6;
  cfg.rank = 2;
  Rng rng(15);
  ChildNetwork<float> net = random_child<float>(cfg, 3, 2, rng);
  const std::string js = child_debug_json(net);
  CHECK(js.find("\"f\"") != std::string::npos);
  CHECK(js.find("\"c\"") != std::string::npos);
  CHECK(js.find("wp1") != std::string::npos);
}
