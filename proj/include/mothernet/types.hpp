// Core scalar/matrix aliases and the error taxonomy shared by every module.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mothernet {

// Samples are rows everywhere. Row-major storage keeps per-sample access and
// the serialization code straightforward.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using VectorF = Vector<float>;
using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

using Rng = std::mt19937_64;

// Every recoverable failure is an Error; the CLI maps them to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
// Serialized container is corrupt or of the wrong kind.
struct FormatError : Error {
  using Error::Error;
};
// Dataset exceeds a hard model limit (feature or class budget).
struct CapacityError : Error {
  using Error::Error;
};
// A sampler could not produce a usable task (e.g. a class never appears).
struct DegenerateTaskError : Error {
  using Error::Error;
};
// Metric is undefined on the given inputs (e.g. AUC with one class).
struct UndefinedMetricError : Error {
  using Error::Error;
};
struct StratificationError : Error {
  using Error::Error;
};
// Training produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mothernet
