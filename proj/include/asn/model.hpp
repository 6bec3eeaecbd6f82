#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "asn/dataset.hpp"
#include "asn/nn/classifier.hpp"
#include "asn/nn/unet.hpp"

namespace asn {

using SynthesizerConfig = nn::UNetConfig;
using ClassifierConfig = nn::ClassifierConfig;

/// Learned state: synthesizer and classifier parameters plus bookkeeping.
struct ModelState {
  SynthesizerConfig synth_cfg;
  ClassifierConfig cls_cfg;
  nn::UNet<float> synth;
  nn::Classifier<float> cls;
  std::int64_t step{0};
  std::uint64_t seed{0};

  ModelState() = default;
  ModelState(const SynthesizerConfig& sc, const ClassifierConfig& cc, std::uint64_t seed_)
      : synth_cfg(sc), cls_cfg(cc), seed(seed_) {
    std::mt19937 rng(static_cast<unsigned>(seed_ * 0x9E3779B97F4A7C15ull >> 32) + static_cast<unsigned>(seed_));
    synth = nn::UNet<float>(sc, rng);
    cls = nn::Classifier<float>(cc, rng);
  }

  nn::ParamList<float> synth_params() {
    nn::ParamList<float> p;
    synth.collect_params(p);
    return p;
  }
  nn::ParamList<float> cls_params() {
    nn::ParamList<float> p;
    cls.collect_params(p);
    return p;
  }
};

/// Predict a mask pair for one chunk.
inline MaskPairF synthesizer_forward(const Eigen::MatrixXf& mix_logmag,
                                     const Eigen::MatrixXf& features_aligned, ModelState& state) {
  auto [l, r] = state.synth.forward(mix_logmag, features_aligned);
  return MaskPairF{std::move(l), std::move(r)};
}

/// P(pair in correct order) for pooled features and two log-magnitude specs.
inline float classifier_forward(const Eigen::VectorXf& features_pooled,
                                const Eigen::MatrixXf& spec_a, const Eigen::MatrixXf& spec_b,
                                ModelState& state) {
  return state.cls.forward(features_pooled, spec_a, spec_b);
}

// ---------------------------------------------------------------------------
// Losses. Reduction convention: mean over elements per mask, summed over the
// two masks; batch averaging is the trainer's job.
// ---------------------------------------------------------------------------

template <typename Mat>
inline double recon_loss(const Mat& pred_left, const Mat& pred_right, const Mat& tgt_left,
                         const Mat& tgt_right) {
  if (pred_left.rows() != tgt_left.rows() || pred_left.cols() != tgt_left.cols() ||
      pred_right.rows() != tgt_right.rows() || pred_right.cols() != tgt_right.cols())
    throw std::invalid_argument("recon_loss: shape mismatch");
  const double n = static_cast<double>(pred_left.size());
  const double l = (pred_left - tgt_left).template cast<double>().cwiseAbs().sum() / n;
  const double r = (pred_right - tgt_right).template cast<double>().cwiseAbs().sum() / n;
  return l + r;
}

inline double recon_loss(const MaskPairF& pred, const MaskPairF& target) {
  return recon_loss(pred.left, pred.right, target.left, target.right);
}

/// d(recon_loss)/d(pred): elementwise sign / n.
template <typename Mat>
inline Mat recon_loss_grad(const Mat& pred, const Mat& tgt) {
  using S = typename Mat::Scalar;
  const S inv_n = S(1) / static_cast<S>(pred.size());
  Mat g = (pred - tgt).unaryExpr([inv_n](S d) {
    if (d > S(0)) return inv_n;
    if (d < S(0)) return -inv_n;
    return S(0);
  });
  return g;
}

/// Binary cross-entropy with the probability clamped at 1e-7.
inline double cls_loss(double prob, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("cls_loss: label must be 0 or 1");
  const double p = std::clamp(prob, 1e-7, 1.0 - 1e-7);
  return -(label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

inline double cls_loss_grad(double prob, int label) {
  const double p = std::clamp(prob, 1e-7, 1.0 - 1e-7);
  return -(static_cast<double>(label) / p) + (1.0 - label) / (1.0 - p);
}

/// Composite objective L = L_recon + lambda_cls * L_cls.
inline double total_loss(double recon, double cls, double lambda_cls = 0.1) {
  return recon + lambda_cls * cls;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, JSON header (configs + tensor manifest), raw float
// payload. Self-describing and versioned.
// ---------------------------------------------------------------------------

struct AdamSnapshot {
  std::int64_t t{0};
  std::vector<std::vector<float>> m, v;
};

struct Checkpoint {
  ModelState state;
  AdamSnapshot adam_synth, adam_cls;
  int epochs_done{0};
  double best_val{0.0};
  int best_epoch{-1};
  bool has_optimizer{false};
  nlohmann::json train_config_echo;
};

namespace detail {

constexpr char kCkptMagic[9] = "ASNCKPT1";

inline nlohmann::json synth_cfg_json(const SynthesizerConfig& c) {
  return {{"depth", c.depth},         {"base_channels", c.base_channels},
          {"feature_dim", c.feature_dim}, {"use_norm", c.use_norm},
          {"max_channels", c.max_channels}, {"init_std", c.init_std}};
}
inline SynthesizerConfig synth_cfg_from_json(const nlohmann::json& j) {
  SynthesizerConfig c;
  c.depth = j.at("depth").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.use_norm = j.at("use_norm").get<bool>();
  c.max_channels = j.at("max_channels").get<int>();
  c.init_std = j.at("init_std").get<double>();
  return c;
}
inline nlohmann::json cls_cfg_json(const ClassifierConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"n_bins", c.n_bins},
          {"proj_dim", c.proj_dim},
          {"hidden_dim", c.hidden_dim}};
}
inline ClassifierConfig cls_cfg_from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.n_bins = j.at("n_bins").get<int>();
  c.proj_dim = j.at("proj_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  return c;
}

inline void write_blob(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}
inline void read_blob(std::ifstream& in, std::vector<float>& v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint: payload truncated");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
  nn::ParamList<float> sp = ckpt.state.synth_params();
  nn::ParamList<float> cp = ckpt.state.cls_params();

  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : sp) tensors.push_back({{"name", p.name}, {"size", p.value->size()}});
  for (const auto& p : cp) tensors.push_back({{"name", p.name}, {"size", p.value->size()}});

  nlohmann::json header{{"version", 1},
                        {"scalar", "f32"},
                        {"step", ckpt.state.step},
                        {"seed", ckpt.state.seed},
                        {"epochs_done", ckpt.epochs_done},
                        {"best_val", ckpt.best_val},
                        {"best_epoch", ckpt.best_epoch},
                        {"has_optimizer", ckpt.has_optimizer},
                        {"synth_config", detail::synth_cfg_json(ckpt.state.synth_cfg)},
                        {"cls_config", detail::cls_cfg_json(ckpt.state.cls_cfg)},
                        {"adam_t", {{"synth", ckpt.adam_synth.t}, {"cls", ckpt.adam_cls.t}}},
                        {"tensors", tensors}};
  if (!ckpt.train_config_echo.is_null()) header["train_config"] = ckpt.train_config_echo;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(detail::kCkptMagic, 8);
  const std::string h = header.dump();
  const std::uint64_t hlen = h.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& p : sp) detail::write_blob(out, *p.value);
  for (const auto& p : cp) detail::write_blob(out, *p.value);
  if (ckpt.has_optimizer) {
    for (const auto& mv : ckpt.adam_synth.m) detail::write_blob(out, mv);
    for (const auto& mv : ckpt.adam_synth.v) detail::write_blob(out, mv);
    for (const auto& mv : ckpt.adam_cls.m) detail::write_blob(out, mv);
    for (const auto& mv : ckpt.adam_cls.v) detail::write_blob(out, mv);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hstr(hlen, '\0');
  in.read(hstr.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path);
  const auto header = nlohmann::json::parse(hstr);
  if (header.at("version").get<int>() != 1)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);

  Checkpoint ckpt;
  ckpt.state = ModelState(detail::synth_cfg_from_json(header.at("synth_config")),
                          detail::cls_cfg_from_json(header.at("cls_config")),
                          header.at("seed").get<std::uint64_t>());
  ckpt.state.step = header.at("step").get<std::int64_t>();
  ckpt.epochs_done = header.at("epochs_done").get<int>();
  ckpt.best_val = header.at("best_val").get<double>();
  if (header.contains("best_epoch")) ckpt.best_epoch = header["best_epoch"].get<int>();
  ckpt.has_optimizer = header.at("has_optimizer").get<bool>();
  if (header.contains("train_config")) ckpt.train_config_echo = header["train_config"];

  nn::ParamList<float> sp = ckpt.state.synth_params();
  nn::ParamList<float> cp = ckpt.state.cls_params();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != sp.size() + cp.size())
    throw std::runtime_error("load_checkpoint: tensor manifest mismatch in " + path);
  std::size_t ti = 0;
  for (auto* list : {&sp, &cp})
    for (auto& p : *list) {
      const auto& t = tensors.at(ti++);
      if (t.at("name").get<std::string>() != p.name ||
          t.at("size").get<std::size_t>() != p.value->size())
        throw std::runtime_error("load_checkpoint: tensor mismatch at " + p.name);
    }
  for (auto& p : sp) detail::read_blob(in, *p.value);
  for (auto& p : cp) detail::read_blob(in, *p.value);

  ckpt.adam_synth.t = header.at("adam_t").at("synth").get<std::int64_t>();
  ckpt.adam_cls.t = header.at("adam_t").at("cls").get<std::int64_t>();
  if (ckpt.has_optimizer) {
    auto read_mv = [&](const nn::ParamList<float>& list, AdamSnapshot& snap) {
      snap.m.resize(list.size());
      snap.v.resize(list.size());
      for (std::size_t i = 0; i < list.size(); ++i) snap.m[i].resize(list[i].value->size());
      for (std::size_t i = 0; i < list.size(); ++i) detail::read_blob(in, snap.m[i]);
      for (std::size_t i = 0; i < list.size(); ++i) snap.v[i].resize(list[i].value->size());
      for (std::size_t i = 0; i < list.size(); ++i) detail::read_blob(in, snap.v[i]);
    };
    read_mv(sp, ckpt.adam_synth);
    read_mv(cp, ckpt.adam_cls);
  }
  return ckpt;
}

}  // namespace asn
