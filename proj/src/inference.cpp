#include "mothernet/inference.hpp"

namespace mothernet {

ChildNetwork<float> icl_fit(const TransformerWeights<float>& w, const TabularDataset& train) {
  train.validate();
  if (train.X.rows() < 1) throw ShapeError("icl_fit: empty training set");
  if (train.n_classes > w.child.n_class_slots) {
    throw CapacityError("icl_fit: " + std::to_string(train.n_classes) +
                        " classes exceed the child's " +
                        std::to_string(w.child.n_class_slots) + " output slots");
  }
  const MatrixF xp = pad_and_scale<float>(train.X);
  const VectorF phi = encode_phi(w, xp, train.y);
  return assemble_child(phi, w.wf1, w.wf2, static_cast<int>(train.X.cols()), train.n_classes,
                        w.child);
}

MatrixF predict_proba_raw(const ChildNetwork<float>& net, const MatrixF& X) {
  if (X.cols() != net.f) {
    throw ShapeError("predict: expected " + std::to_string(net.f) + " features, got " +
                     std::to_string(X.cols()));
  }
  const MatrixF scaled = X * (100.f / static_cast<float>(net.f));
  return net.predict_proba(scaled);
}

std::vector<EnsembleMemberConfig> sample_member_configs(const TabularDataset& train, int k,
                                                        uint64_t seed) {
  if (k < 1) throw ShapeError("ensemble: member count must be positive");
  train.validate();
  Rng rng(seed);
  std::uniform_int_distribution<int> feat(0, static_cast<int>(train.X.cols()) - 1);
  std::uniform_int_distribution<int> cls(0, train.n_classes - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<EnsembleMemberConfig> out(static_cast<size_t>(k));
  for (auto& cfg : out) {
    cfg.feature_rotation = feat(rng);
    cfg.class_rotation = cls(rng);
    cfg.use_one_hot = coin(rng) == 1;
    cfg.use_quantile = coin(rng) == 1;
    cfg.seed = rng();
  }
  return out;
}

MatrixF invert_class_rotation(const MatrixF& probs, int class_rotation) {
  const int c = static_cast<int>(probs.cols());
  const int rot = ((class_rotation % c) + c) % c;
  if (rot == 0) return probs;
  MatrixF out(probs.rows(), probs.cols());
  for (int k = 0; k < c; ++k) out.col(k) = probs.col((k + rot) % c);
  return out;
}

MatrixF FittedMember::predict_proba(const MatrixF& X) const {
  MatrixF Xt = X;
  if (cfg.use_one_hot) Xt = one_hot.transform(Xt);
  if (cfg.use_quantile) Xt = quantile.transform(Xt);
  Xt = rotate_features(Xt, effective_rotation);
  const MatrixF rotated = predict_proba_raw(child, Xt);
  return invert_class_rotation(rotated, cfg.class_rotation);
}

MatrixF EnsembleModel::predict_proba(const MatrixF& X) const {
  if (members.empty()) throw ShapeError("ensemble: no fitted members");
  MatrixF sum = members.front().predict_proba(X);
  for (size_t i = 1; i < members.size(); ++i) sum += members[i].predict_proba(X);
  return sum / static_cast<float>(members.size());
}

EnsembleModel fit_ensemble(const TransformerWeights<float>& w, const TabularDataset& train,
                           const std::vector<EnsembleMemberConfig>& members) {
  if (members.empty()) throw ShapeError("ensemble: no member configurations");
  train.validate();
  EnsembleModel model;
  model.members.reserve(members.size());
  for (const EnsembleMemberConfig& cfg : members) {
    FittedMember member;
    member.cfg = cfg;
    member.n_classes = train.n_classes;
    TabularDataset view = train;
    if (cfg.use_one_hot) {
      member.one_hot = OneHotEncoder::fit(view);
      view = member.one_hot.transform(view);
    }
    if (cfg.use_quantile) {
      member.quantile = QuantileEncoder::fit(view);
      view = member.quantile.transform(view);
    }
    const int width = static_cast<int>(view.X.cols());
    member.effective_rotation = ((cfg.feature_rotation % width) + width) % width;
    view = rotate(view, member.effective_rotation, cfg.class_rotation);
    member.child = icl_fit(w, view);
    model.members.push_back(std::move(member));
  }
  return model;
}

EnsembleModel fit_ensemble(const TransformerWeights<float>& w, const TabularDataset& train, int k,
                           uint64_t seed) {
  return fit_ensemble(w, train, sample_member_configs(train, k, seed));
}

}  // namespace mothernet
