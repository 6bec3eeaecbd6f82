#pragma once

#include <random>
#include <stdexcept>
#include <string>

#include "asn/nn/layers.hpp"
#include "asn/nn/tensor.hpp"

namespace asn::nn {

/// Three hidden fully connected layers with rectifier, one sigmoid output.
struct ClassifierConfig {
  int feature_dim{64};
  int n_bins{1025};
  int proj_dim{64};   // learned projection of each pooled spectrum
  int hidden_dim{128};

  void validate() const {
    if (feature_dim < 1 || n_bins < 1 || proj_dim < 1 || hidden_dim < 1)
      throw std::invalid_argument("ClassifierConfig: dims must be positive");
  }
};

/// Correspondence classifier. The two spectrogram inputs are mean-pooled over
/// frames, sent through one shared learned projection, and concatenated after
/// the pooled features in (features, a, b) order; that order carries the
/// correct-vs-swapped signal.
template <typename T>
class Classifier {
 public:
  using Vec = Eigen::Vector<T, Eigen::Dynamic>;

  Classifier() = default;
  Classifier(const ClassifierConfig& cfg, std::mt19937& rng) : cfg_(cfg) {
    cfg.validate();
    proj_ = Linear<T>(cfg.n_bins, cfg.proj_dim, rng);
    const int in = cfg.feature_dim + 2 * cfg.proj_dim;
    fc1_ = Linear<T>(in, cfg.hidden_dim, rng);
    fc2_ = Linear<T>(cfg.hidden_dim, cfg.hidden_dim, rng);
    fc3_ = Linear<T>(cfg.hidden_dim, cfg.hidden_dim, rng);
    out_ = Linear<T>(cfg.hidden_dim, 1, rng);
  }

  const ClassifierConfig& config() const { return cfg_; }

  /// P(the (a, b) pair is in correct left/right order). spec_a and spec_b are
  /// log-compressed magnitude matrices, frames x bins.
  T forward(const Vec& features_pooled, const MatX<T>& spec_a, const MatX<T>& spec_b) {
    if (spec_a.rows() != spec_b.rows() || spec_a.cols() != spec_b.cols())
      throw std::invalid_argument("Classifier: spectrogram shape mismatch");
    if (static_cast<int>(spec_a.cols()) != cfg_.n_bins)
      throw std::invalid_argument("Classifier: bin count does not match config");
    if (static_cast<int>(features_pooled.size()) != cfg_.feature_dim)
      throw std::invalid_argument("Classifier: feature dim does not match config");

    frames_ = static_cast<int>(spec_a.rows());
    const Vec a_bar = spec_a.colwise().mean();
    const Vec b_bar = spec_b.colwise().mean();

    // shared projection; the single cache ends up holding b_bar, backward
    // compensates by re-running the a pass
    pa_ = proj_.forward(a_bar);
    a_bar_ = a_bar;
    pb_ = proj_.forward(b_bar);

    Vec z(cfg_.feature_dim + 2 * cfg_.proj_dim);
    z << features_pooled, pa_, pb_;
    h1_ = relu(fc1_.forward(z));
    h2_ = relu(fc2_.forward(h1_.act));
    h3_ = relu(fc3_.forward(h2_.act));
    logit_ = out_.forward(h3_.act)(0);
    prob_ = sigmoid(logit_);
    return prob_;
  }

  /// dL/dprob in; returns gradients w.r.t. the two spectrogram inputs.
  /// Parameter gradients accumulate; the features_pooled gradient is dropped.
  std::pair<MatX<T>, MatX<T>> backward(T gprob) {
    const T gz = gprob * prob_ * (T(1) - prob_);
    Vec g = out_.backward(Vec::Constant(1, gz));
    g = fc3_.backward(relu_back(h3_, g));
    g = fc2_.backward(relu_back(h2_, g));
    g = fc1_.backward(relu_back(h1_, g));

    const Vec gpa = g.segment(cfg_.feature_dim, cfg_.proj_dim);
    const Vec gpb = g.segment(cfg_.feature_dim + cfg_.proj_dim, cfg_.proj_dim);
    // proj_ cache currently holds b_bar (it ran second); backprop b first
    const Vec gb_bar = proj_.backward(gpb);
    proj_.forward(a_bar_);  // restore cache for the a pass
    const Vec ga_bar = proj_.backward(gpa);

    const T inv_frames = T(1) / static_cast<T>(frames_);
    MatX<T> ga(frames_, cfg_.n_bins), gb(frames_, cfg_.n_bins);
    for (int i = 0; i < frames_; ++i) {
      ga.row(i) = ga_bar.transpose() * inv_frames;
      gb.row(i) = gb_bar.transpose() * inv_frames;
    }
    return {ga, gb};
  }

  void collect_params(ParamList<T>& out, const std::string& prefix = "cls") {
    proj_.collect(out, prefix + ".proj");
    fc1_.collect(out, prefix + ".fc1");
    fc2_.collect(out, prefix + ".fc2");
    fc3_.collect(out, prefix + ".fc3");
    out_.collect(out, prefix + ".out");
  }

 private:
  struct ReluCache {
    Vec pre, act;
  };
  static ReluCache relu(const Vec& z) {
    ReluCache c;
    c.pre = z;
    c.act = z.cwiseMax(T(0));
    return c;
  }
  static Vec relu_back(const ReluCache& c, const Vec& g) {
    Vec out = g;
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (c.pre(i) < T(0)) out(i) = T(0);
    return out;
  }

  ClassifierConfig cfg_;
  Linear<T> proj_, fc1_, fc2_, fc3_, out_;
  ReluCache h1_, h2_, h3_;
  Vec pa_, pb_, a_bar_;
  T logit_{0}, prob_{0};
  int frames_{0};
};

}  // namespace asn::nn
