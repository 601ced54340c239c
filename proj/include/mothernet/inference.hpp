// In-context fitting: one encoder pass turns a labeled training set into a
// ready child classifier. The ensembled variant fits several children on
// transformed views of the same data (circular feature/class rotations,
// optional one-hot and quantile encodings), un-rotates their probability
// columns and averages.
#pragma once

#include <cstdint>
#include <vector>

#include "mothernet/dataset.hpp"
#include "mothernet/encoder.hpp"

namespace mothernet {

// One forward pass; no gradients, no iteration. The returned child is sliced
// to the task's feature count and class count.
ChildNetwork<float> icl_fit(const TransformerWeights<float>& w, const TabularDataset& train);

// Probabilities for raw feature rows (applies the 100/f training-time input
// scale, then the child forward pass). Never touches the encoder.
MatrixF predict_proba_raw(const ChildNetwork<float>& net, const MatrixF& X);

struct EnsembleMemberConfig {
  int feature_rotation = 0;  // columns shift right by this, mod encoded width
  int class_rotation = 0;    // labels shift by this, mod n_classes
  bool use_one_hot = false;
  bool use_quantile = false;
  uint64_t seed = 0;
};

// Uniform rotations, fair-coin encoder choices; one config per member.
std::vector<EnsembleMemberConfig> sample_member_configs(const TabularDataset& train, int k,
                                                        uint64_t seed);

// Recovers original-class columns from a member trained on rotated labels:
// original class k sits in member column (k + rot) mod c.
MatrixF invert_class_rotation(const MatrixF& probs, int class_rotation);

struct FittedMember {
  EnsembleMemberConfig cfg;
  OneHotEncoder one_hot;      // fitted when cfg.use_one_hot
  QuantileEncoder quantile;   // fitted when cfg.use_quantile
  int effective_rotation = 0; // cfg.feature_rotation mod the encoded width
  int n_classes = 0;
  ChildNetwork<float> child;

  // Probabilities in the original class order.
  MatrixF predict_proba(const MatrixF& X) const;
};

struct EnsembleModel {
  std::vector<FittedMember> members;

  // Arithmetic mean of the members' (un-rotated) probabilities.
  MatrixF predict_proba(const MatrixF& X) const;
};

EnsembleModel fit_ensemble(const TransformerWeights<float>& w, const TabularDataset& train,
                           const std::vector<EnsembleMemberConfig>& members);
EnsembleModel fit_ensemble(const TransformerWeights<float>& w, const TabularDataset& train, int k,
                           uint64_t seed);

}  // namespace mothernet
