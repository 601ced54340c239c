// Synthetic task distributions: the random-teacher prior used for
// meta-training, plus the step-function and boolean-formula families and a
// Gaussian-blob toy generator used by evaluation suites.
#pragma once

#include "mothernet/dataset.hpp"
#include "mothernet/types.hpp"

#include <functional>
#include <vector>

namespace mothernet {

struct PriorConfig {
  int max_features = 10;  // d ~ U[1, max_features]
  int max_classes = 10;   // c ~ U[2, max_classes]
  int max_rows = 128;     // n ~ U[32, max_rows]
  int teacher_hidden = 16;
  float noise_scale = 0.1f;  // stddev of Gaussian noise added to teacher logits

  void validate() const;
};

// One-hidden-layer tanh network whose noisy argmax labels the sampled rows.
struct TeacherMlp {
  MatrixF w1;  // hidden × d
  VectorF b1;
  MatrixF w2;  // c × hidden
  VectorF b2;

  MatrixF logits(const MatrixF& X) const;  // n × c
};

TeacherMlp sample_teacher(int d, int c, int hidden, Rng& rng);

struct SyntheticTask {
  TabularDataset train;
  TabularDataset test;
};

// Draws (d, c, n), fills X with standard normals, labels rows by a random
// teacher's noisy argmax and splits 50/50. Labelings that leave some class
// out of the training half are redrawn (fresh teacher and noise) up to 100
// times before DegenerateTaskError. The factory overload exists so tests can
// inject a pathological teacher.
using TeacherFactory = std::function<TeacherMlp(int d, int c, Rng& rng)>;
SyntheticTask sample_task(const PriorConfig& cfg, Rng& rng);
SyntheticTask sample_task(const PriorConfig& cfg, Rng& rng, const TeacherFactory& teacher_factory);

// Labels a scalar feature by parity of how many cutoffs lie strictly below
// it, starting from class 0 below everything.
std::vector<int32_t> step_labels(const std::vector<float>& x, const std::vector<float>& cutoffs);

// Single uniform feature on [0,1] with n_steps-1 uniform cutoffs; the label
// flips at each cutoff. Cutoff sets are redrawn until every cutoff is
// realized as a distinct transition in the sampled points, so the sorted
// feature shows exactly n_steps-1 label changes.
TabularDataset gen_step_dataset(int n_steps, int n, Rng& rng);

// Disjunction of conjunctions over 10 boolean inputs. Each term picks `rank`
// distinct features, each negated with probability 1/2.
struct BooleanTerm {
  std::vector<int> features;
  std::vector<uint8_t> negated;
};
struct BooleanFormula {
  std::vector<BooleanTerm> terms;
  bool eval(const float* row) const;
};
BooleanTerm sample_boolean_term(int rank, int n_features, Rng& rng);

// All 1024 rows of {0,1}^10; terms are appended until at least one third of
// the rows satisfy the formula. Pass `out_formula` to inspect the sampled
// formula.
TabularDataset gen_boolean_dataset(int rank, Rng& rng, BooleanFormula* out_formula = nullptr);

// Gaussian clusters: c centers drawn from N(0, center_scale^2 I) in d
// dimensions, n points assigned round-robin to centers with isotropic noise,
// then shuffled.
TabularDataset gen_blob_dataset(int n, int d, int c, float center_scale, float noise, Rng& rng);

}  // namespace mothernet
