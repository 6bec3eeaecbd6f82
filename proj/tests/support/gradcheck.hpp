#pragma once

// Double-precision composite-objective gradient check used by both the unit
// suite and the acceptance runner. The analytic path runs the hand-wired
// backward passes; the reference is a central finite difference of the loss.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "asn/model.hpp"
#include "asn/nn/classifier.hpp"
#include "asn/nn/unet.hpp"

namespace gradcheck {

struct Problem {
  asn::nn::UNet<double> unet;
  asn::nn::Classifier<double> cls;
  Eigen::MatrixXd logmag, feats, tgt_left, tgt_right, mag;
  double lambda_cls{0.1};
};

inline Problem make_tiny_problem(unsigned seed, int frames = 8, int bins = 9,
                                 int feature_dim = 6) {
  asn::nn::UNetConfig ucfg;
  ucfg.depth = 2;
  ucfg.base_channels = 2;
  ucfg.feature_dim = feature_dim;
  ucfg.use_norm = true;
  ucfg.init_std = 0.2;  // keep units alive so finite differences stay clean

  asn::nn::ClassifierConfig ccfg;
  ccfg.feature_dim = feature_dim;
  ccfg.n_bins = bins;
  ccfg.proj_dim = 4;
  ccfg.hidden_dim = 8;

  std::mt19937 rng(seed);
  Problem p{asn::nn::UNet<double>(ucfg, rng), asn::nn::Classifier<double>(ccfg, rng),
            {}, {}, {}, {}, {}, 0.1};

  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_real_distribution<double> mags(0.1, 3.0);
  p.logmag.resize(frames, bins);
  p.feats.resize(frames, feature_dim);
  p.tgt_left.resize(frames, bins);
  p.tgt_right.resize(frames, bins);
  p.mag.resize(frames, bins);
  for (int i = 0; i < frames; ++i) {
    for (int j = 0; j < bins; ++j) {
      p.logmag(i, j) = mags(rng);
      p.mag(i, j) = mags(rng);
      p.tgt_left(i, j) = unit(rng);
      p.tgt_right(i, j) = unit(rng);
    }
    for (int d = 0; d < feature_dim; ++d) p.feats(i, d) = 2.0 * unit(rng) - 1.0;
  }
  return p;
}

/// total_loss = recon + lambda * bce(classifier(pred pair), 1)
inline double forward_loss(Problem& p) {
  auto [pl, pr] = p.unet.forward(p.logmag, p.feats);
  const double recon = asn::recon_loss(pl, pr, p.tgt_left, p.tgt_right);
  const Eigen::MatrixXd la = (pl.array() * p.mag.array()).log1p().matrix();
  const Eigen::MatrixXd lb = (pr.array() * p.mag.array()).log1p().matrix();
  const Eigen::VectorXd fbar = p.feats.colwise().mean();
  const double prob = p.cls.forward(fbar, la, lb);
  return asn::total_loss(recon, asn::cls_loss(prob, 1), p.lambda_cls);
}

/// One analytic forward+backward; parameter gradients land in the lists.
inline double backward_pass(Problem& p) {
  auto [pl, pr] = p.unet.forward(p.logmag, p.feats);
  const double recon = asn::recon_loss(pl, pr, p.tgt_left, p.tgt_right);
  Eigen::MatrixXd gl = asn::recon_loss_grad(pl, p.tgt_left);
  Eigen::MatrixXd gr = asn::recon_loss_grad(pr, p.tgt_right);

  const Eigen::MatrixXd ml = (pl.array() * p.mag.array()).matrix();
  const Eigen::MatrixXd mr = (pr.array() * p.mag.array()).matrix();
  const Eigen::MatrixXd la = ml.array().log1p().matrix();
  const Eigen::MatrixXd lb = mr.array().log1p().matrix();
  const Eigen::VectorXd fbar = p.feats.colwise().mean();
  const double prob = p.cls.forward(fbar, la, lb);
  auto [ga, gb] = p.cls.backward(p.lambda_cls * asn::cls_loss_grad(prob, 1));
  gl.array() += ga.array() / (1.0 + ml.array()) * p.mag.array();
  gr.array() += gb.array() / (1.0 + mr.array()) * p.mag.array();

  p.unet.backward(gl, gr);
  return asn::total_loss(recon, asn::cls_loss(prob, 1), p.lambda_cls);
}

struct Report {
  double max_rel_err{0.0};
  std::string worst_param;
  std::int64_t n_params{0};
};

/// Central finite differences at the given step against the analytic
/// gradients, every parameter of both networks. Relative error uses a 1e-6
/// floor so dead-zero gradients compare absolutely.
inline Report run(Problem& p, double step = 1e-3) {
  asn::nn::ParamList<double> params;
  p.unet.collect_params(params, "synth");
  p.cls.collect_params(params, "cls");
  asn::nn::zero_grads(params);
  backward_pass(p);

  std::vector<std::vector<double>> analytic;
  for (auto& pr : params) analytic.push_back(*pr.grad);

  Report rep;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& w = *params[t].value;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double keep = w[k];
      w[k] = keep + step;
      const double lp = forward_loss(p);
      w[k] = keep - step;
      const double lm = forward_loss(p);
      w[k] = keep;
      const double fd = (lp - lm) / (2.0 * step);
      const double an = analytic[t][k];
      const double rel = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = params[t].name + "[" + std::to_string(k) + "]";
      }
      ++rep.n_params;
    }
  }
  return rep;
}

}  // namespace gradcheck
