#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "asn/eval_distances.hpp"
#include "asn/model.hpp"

namespace asn {

/// Optimization settings. Defaults are the desk-scale profile; paper_scale()
/// restores batch 44 / 64 base channels.
struct TrainConfig {
  double learning_rate{5e-5};
  double beta1{0.9};
  double beta2{0.999};
  double weight_decay{1e-4};
  double adam_eps{1e-8};
  int batch_size{8};
  int epochs{4};
  std::uint64_t seed{1};
  double lambda_cls{0.1};
  double augment_p{0.5};
  double chunk_seconds{1.0};
  int depth{5};
  int base_channels{16};
  int feature_dim{64};
  bool use_norm{true};
  int cls_proj_dim{64};
  int cls_hidden_dim{128};
  int num_threads{2};
  int val_chunk_cap{64};

  static TrainConfig paper_scale() {
    TrainConfig c;
    c.batch_size = 44;
    c.base_channels = 64;
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
    if (!(augment_p >= 0.0 && augment_p <= 1.0))
      throw std::invalid_argument("TrainConfig: augment_p outside [0, 1]");
  }

  SynthesizerConfig synth_config() const {
    SynthesizerConfig c;
    c.depth = depth;
    c.base_channels = base_channels;
    c.feature_dim = feature_dim;
    c.use_norm = use_norm;
    return c;
  }
  ClassifierConfig cls_config(int n_bins) const {
    ClassifierConfig c;
    c.feature_dim = feature_dim;
    c.n_bins = n_bins;
    c.proj_dim = cls_proj_dim;
    c.hidden_dim = cls_hidden_dim;
    return c;
  }

  // flat key = value document, mirroring the field names
  std::string to_kv() const;
  static TrainConfig from_kv_file(const std::string& path);
  void apply_kv_line(const std::string& key, const std::string& value);
};

inline std::string TrainConfig::to_kv() const {
  std::ostringstream o;
  o.precision(17);
  o << "learning_rate = " << learning_rate << '\n'
    << "beta1 = " << beta1 << '\n'
    << "beta2 = " << beta2 << '\n'
    << "weight_decay = " << weight_decay << '\n'
    << "adam_eps = " << adam_eps << '\n'
    << "batch_size = " << batch_size << '\n'
    << "epochs = " << epochs << '\n'
    << "seed = " << seed << '\n'
    << "lambda_cls = " << lambda_cls << '\n'
    << "augment_p = " << augment_p << '\n'
    << "chunk_seconds = " << chunk_seconds << '\n'
    << "depth = " << depth << '\n'
    << "base_channels = " << base_channels << '\n'
    << "feature_dim = " << feature_dim << '\n'
    << "use_norm = " << (use_norm ? 1 : 0) << '\n'
    << "cls_proj_dim = " << cls_proj_dim << '\n'
    << "cls_hidden_dim = " << cls_hidden_dim << '\n'
    << "num_threads = " << num_threads << '\n'
    << "val_chunk_cap = " << val_chunk_cap << '\n';
  return o.str();
}

inline void TrainConfig::apply_kv_line(const std::string& key, const std::string& value) {
  auto d = [&] { return std::stod(value); };
  auto i = [&] { return std::stoi(value); };
  if (key == "learning_rate") learning_rate = d();
  else if (key == "beta1") beta1 = d();
  else if (key == "beta2") beta2 = d();
  else if (key == "weight_decay") weight_decay = d();
  else if (key == "adam_eps") adam_eps = d();
  else if (key == "batch_size") batch_size = i();
  else if (key == "epochs") epochs = i();
  else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "lambda_cls") lambda_cls = d();
  else if (key == "augment_p") augment_p = d();
  else if (key == "chunk_seconds") chunk_seconds = d();
  else if (key == "depth") depth = i();
  else if (key == "base_channels") base_channels = i();
  else if (key == "feature_dim") feature_dim = i();
  else if (key == "use_norm") use_norm = i() != 0;
  else if (key == "cls_proj_dim") cls_proj_dim = i();
  else if (key == "cls_hidden_dim") cls_hidden_dim = i();
  else if (key == "num_threads") num_threads = i();
  else if (key == "val_chunk_cap") val_chunk_cap = i();
  else throw std::invalid_argument("TrainConfig: unknown key '" + key + "'");
}

inline TrainConfig TrainConfig::from_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("TrainConfig: cannot open " + path);
  TrainConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) cfg.apply_kv_line(key, value);
  }
  return cfg;
}

/// Adam with decoupled-from-nothing classic L2 (decay folded into the
/// gradient), one moment pair per parameter tensor.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double b1, double b2, double eps, double wd)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps), wd_(wd) {}

  void step(nn::ParamList<float>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i].value->size(), 0.0f);
        v_[i].assign(params[i].value->size(), 0.0f);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = *params[i].value;
      auto& g = *params[i].grad;
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double grad = static_cast<double>(g[k]) + wd_ * static_cast<double>(w[k]);
        const double mk = b1_ * m[k] + (1.0 - b1_) * grad;
        const double vk = b2_ * v[k] + (1.0 - b2_) * grad * grad;
        m[k] = static_cast<float>(mk);
        v[k] = static_cast<float>(vk);
        const double mhat = mk / bc1;
        const double vhat = vk / bc2;
        w[k] = static_cast<float>(w[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::int64_t t() const { return t_; }

  AdamSnapshot snapshot() const {
    AdamSnapshot s;
    s.t = t_;
    s.m = m_;
    s.v = v_;
    return s;
  }
  void restore(const AdamSnapshot& s) {
    t_ = s.t;
    m_ = s.m;
    v_ = s.v;
  }

 private:
  double lr_{5e-5}, b1_{0.9}, b2_{0.999}, eps_{1e-8}, wd_{1e-4};
  std::int64_t t_{0};
  std::vector<std::vector<float>> m_, v_;
};

struct StepMetrics {
  double recon{0.0};
  double cls_on_gt{0.0};
  double cls_on_pred{0.0};
  double total{0.0};
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xC2B2AE3D27D4EB4Full);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  return x;
}

inline Eigen::MatrixXf masked_logmag(const Eigen::MatrixXf& mask, const Eigen::MatrixXf& mag) {
  return (mask.array() * mag.array()).log1p().matrix();
}

}  // namespace detail

/// Two-phase trainer. Phase A fits the classifier on ground-truth masked
/// pairs (correct and swapped); phase B updates the synthesizer on the
/// composite objective with the classifier frozen, gradients flowing through
/// it into the masks.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, int n_bins)
      : cfg_(cfg),
        state_(cfg.synth_config(), cfg.cls_config(n_bins), cfg.seed),
        opt_synth_(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay),
        opt_cls_(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay) {
    cfg.validate();
  }

  ModelState& state() { return state_; }
  const TrainConfig& config() const { return cfg_; }
  Adam& opt_synth() { return opt_synth_; }
  Adam& opt_cls() { return opt_cls_; }

  StepMetrics train_step(const std::vector<TrainingSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    StepMetrics m;
    m.cls_on_gt = phase_a(batch);
    phase_b(batch, m);
    m.total = total_loss(m.recon, m.cls_on_pred, cfg_.lambda_cls);
    if (!std::isfinite(m.total) || !std::isfinite(m.cls_on_gt))
      throw std::runtime_error("train_step: non-finite loss at step " + std::to_string(state_.step) +
                               " (recon=" + std::to_string(m.recon) +
                               ", cls_on_gt=" + std::to_string(m.cls_on_gt) +
                               ", cls_on_pred=" + std::to_string(m.cls_on_pred) + ")");
    ++state_.step;
    return m;
  }

  // The two halves are callable on their own so the phase-separation
  // invariant is observable from outside.

  // classifier on ground-truth masked magnitudes, each pair presented in
  // correct order (label 1) and swapped (label 0)
  double phase_a(const std::vector<TrainingSample>& batch) {
    nn::ParamList<float> cp = state_.cls_params();
    nn::zero_grads(cp);
    const float scale = 1.0f / (2.0f * static_cast<float>(batch.size()));
    double loss = 0.0;
    for (const auto& s : batch) {
      const Eigen::MatrixXf mag = s.mix_spec.cwiseAbs();
      const Eigen::MatrixXf gl = detail::masked_logmag(s.target_masks.left, mag);
      const Eigen::MatrixXf gr = detail::masked_logmag(s.target_masks.right, mag);
      const Eigen::VectorXf fbar = s.features_aligned.colwise().mean();

      const float p1 = state_.cls.forward(fbar, gl, gr);
      loss += cls_loss(p1, 1);
      state_.cls.backward(static_cast<float>(cls_loss_grad(p1, 1)) * scale);

      const float p0 = state_.cls.forward(fbar, gr, gl);
      loss += cls_loss(p0, 0);
      state_.cls.backward(static_cast<float>(cls_loss_grad(p0, 0)) * scale);
    }
    opt_cls_.step(cp);
    nn::zero_grads(cp);
    return loss / (2.0 * static_cast<double>(batch.size()));
  }

  // synthesizer on recon + lambda * cls(predicted pair, label 1); classifier
  // parameters frozen, per-sample gradients reduced in sample order so the
  // result is independent of the thread count
  void phase_b(const std::vector<TrainingSample>& batch, StepMetrics& metrics) {
    const int b = static_cast<int>(batch.size());
    nn::ParamList<float> sp = state_.synth_params();
    const std::int64_t psize = nn::total_size(sp);

    std::vector<std::vector<float>> slot(static_cast<std::size_t>(b));
    std::vector<double> recon_i(static_cast<std::size_t>(b), 0.0);
    std::vector<double> clsp_i(static_cast<std::size_t>(b), 0.0);

    const int workers = std::max(1, std::min(cfg_.num_threads, b));
    ensure_replicas(workers);
    auto run_range = [&](int w) {
      // worker-local replica; parameters copied from the master each batch
      ModelState& local = *replicas_[static_cast<std::size_t>(w)];
      nn::ParamList<float> lsp = local.synth_params();
      nn::ParamList<float> lcp = local.cls_params();
      {
        nn::ParamList<float> msp = state_.synth_params();
        nn::ParamList<float> mcp = state_.cls_params();
        nn::copy_values(msp, lsp);
        nn::copy_values(mcp, lcp);
      }
      for (int i = w; i < b; i += workers) {
        const auto& s = batch[static_cast<std::size_t>(i)];
        nn::zero_grads(lsp);
        nn::zero_grads(lcp);

        auto [pl, pr] = local.synth.forward(s.mix_logmag, s.features_aligned);
        recon_i[static_cast<std::size_t>(i)] =
            recon_loss(pl, pr, s.target_masks.left, s.target_masks.right);
        Eigen::MatrixXf gl = recon_loss_grad(pl, s.target_masks.left);
        Eigen::MatrixXf gr = recon_loss_grad(pr, s.target_masks.right);

        if (cfg_.lambda_cls != 0.0) {
          const Eigen::MatrixXf mag = s.mix_spec.cwiseAbs();
          const Eigen::MatrixXf ml = (pl.array() * mag.array()).matrix();
          const Eigen::MatrixXf mr = (pr.array() * mag.array()).matrix();
          const Eigen::MatrixXf la = ml.array().log1p().matrix();
          const Eigen::MatrixXf lb = mr.array().log1p().matrix();
          const Eigen::VectorXf fbar = s.features_aligned.colwise().mean();
          const float p = local.cls.forward(fbar, la, lb);
          clsp_i[static_cast<std::size_t>(i)] = cls_loss(p, 1);
          auto [ga, gb] = local.cls.backward(static_cast<float>(cls_loss_grad(p, 1)));
          const float lam = static_cast<float>(cfg_.lambda_cls);
          // chain through log1p and the mask-times-magnitude product
          gl.array() += lam * ga.array() / (1.0f + ml.array()) * mag.array();
          gr.array() += lam * gb.array() / (1.0f + mr.array()) * mag.array();
        }

        const float inv_b = 1.0f / static_cast<float>(b);
        gl *= inv_b;
        gr *= inv_b;
        local.synth.backward(gl, gr);
        nn::flatten_grads(lsp, slot[static_cast<std::size_t>(i)]);
      }
    };

    if (workers == 1) {
      run_range(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
      for (auto& th : pool) th.join();
    }

    nn::zero_grads(sp);
    std::vector<float> acc(static_cast<std::size_t>(psize), 0.0f);
    for (int i = 0; i < b; ++i)
      for (std::int64_t k = 0; k < psize; ++k)
        acc[static_cast<std::size_t>(k)] += slot[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    std::size_t off = 0;
    for (auto& p : sp) {
      for (std::size_t k = 0; k < p.grad->size(); ++k) (*p.grad)[k] = acc[off + k];
      off += p.grad->size();
    }
    opt_synth_.step(sp);
    nn::zero_grads(sp);

    for (int i = 0; i < b; ++i) {
      metrics.recon += recon_i[static_cast<std::size_t>(i)] / b;
      metrics.cls_on_pred += clsp_i[static_cast<std::size_t>(i)] / b;
    }
  }

 private:
  void ensure_replicas(int workers) {
    while (static_cast<int>(replicas_.size()) < workers)
      replicas_.push_back(std::make_unique<ModelState>(state_.synth_cfg, state_.cls_cfg, state_.seed));
  }

  TrainConfig cfg_;
  ModelState state_;
  Adam opt_synth_, opt_cls_;
  std::vector<std::unique_ptr<ModelState>> replicas_;
};

// ---------------------------------------------------------------------------
// fit: epoch loop with seeded shuffling, per-epoch checkpoints, metrics CSV,
// and best-state selection by validation STFT distance.
// ---------------------------------------------------------------------------

struct FitResult {
  ModelState best_state;
  double best_val{0.0};
  int best_epoch{-1};
  std::vector<double> val_history;
};

namespace detail {

/// Mean per-chunk STFT distance of reconstructed chunks versus ground truth.
inline double validation_stft_distance(ModelState& state, const std::vector<TrainingSample>& val,
                                       const std::vector<const ClipRecord*>& val_clips,
                                       const StftConfig& cfg) {
  double acc = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const TrainingSample& s = val[i];
    auto [pl, pr] = state.synth.forward(s.mix_logmag, s.features_aligned);
    Spectrogram mix;
    mix.config = s.config;
    mix.sample_rate = s.sample_rate;
    mix.origin_length = s.chunk_length_samples;
    mix.values = s.mix_spec.cast<std::complex<double>>();
    MaskPair masks{pl.cast<double>().array(), pr.cast<double>().array()};
    const Waveform pred = reconstruct_stereo(masks, mix, cfg);

    const ClipRecord& clip = *val_clips[i];
    const std::int64_t off = s.chunk_offset_samples;
    const std::int64_t len = pred.num_samples();
    Waveform gt = Waveform::stereo(
        std::vector<double>(clip.stereo.channels[0].begin() + off, clip.stereo.channels[0].begin() + off + len),
        std::vector<double>(clip.stereo.channels[1].begin() + off, clip.stereo.channels[1].begin() + off + len),
        clip.stereo.sample_rate);
    acc += stft_distance(gt, pred, cfg);
  }
  return val.empty() ? 0.0 : acc / static_cast<double>(val.size());
}

}  // namespace detail

inline FitResult fit(std::vector<ClipRecord>& corpus, const TrainConfig& cfg,
                     const std::string& checkpoint_dir, const StftConfig& stft_cfg = {},
                     const std::string& resume_from = "") {
  cfg.validate();
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].split == ClipRecord::Split::train) train_idx.push_back(i);
    if (corpus[i].split == ClipRecord::Split::test) test_idx.push_back(i);
  }
  if (train_idx.empty()) throw std::invalid_argument("fit: empty train split");

  // materialize chunks; clip order is deterministic
  std::vector<TrainingSample> samples;
  for (std::size_t i : train_idx) {
    auto s = make_samples(corpus[i], stft_cfg, cfg.chunk_seconds);
    for (auto& x : s) samples.push_back(std::move(x));
  }
  if (samples.empty()) throw std::invalid_argument("fit: no usable training chunks");

  std::vector<TrainingSample> val;
  std::vector<const ClipRecord*> val_clips;
  for (std::size_t i : test_idx) {
    auto s = make_samples(corpus[i], stft_cfg, cfg.chunk_seconds);
    for (auto& x : s) {
      if (static_cast<int>(val.size()) >= cfg.val_chunk_cap) break;
      val_clips.push_back(&corpus[i]);
      val.push_back(std::move(x));
    }
  }

  const FeatureProviderSpec provider = corpus[train_idx[0]].provider;
  const bool can_flip = provider.flip_supported;

  std::filesystem::create_directories(checkpoint_dir);
  const std::string metrics_path = checkpoint_dir + "/metrics.csv";

  Trainer trainer(cfg, stft_cfg.num_bins());
  int start_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  FitResult result;
  if (!resume_from.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_from);
    nn::ParamList<float> dst_s = trainer.state().synth_params();
    nn::ParamList<float> src_s = ckpt.state.synth_params();
    nn::copy_values(src_s, dst_s);
    nn::ParamList<float> dst_c = trainer.state().cls_params();
    nn::ParamList<float> src_c = ckpt.state.cls_params();
    nn::copy_values(src_c, dst_c);
    trainer.state().step = ckpt.state.step;
    if (ckpt.has_optimizer) {
      trainer.opt_synth().restore(ckpt.adam_synth);
      trainer.opt_cls().restore(ckpt.adam_cls);
    }
    start_epoch = ckpt.epochs_done;
    best_val = ckpt.best_val;
    best_epoch = ckpt.best_epoch;
    // the running best lives in checkpoint_best.ckpt next to the resume point
    const std::string best_path = checkpoint_dir + "/checkpoint_best.ckpt";
    if (best_epoch >= 0 && std::filesystem::exists(best_path))
      result.best_state = load_checkpoint(best_path).state;
    else
      result.best_state = ckpt.state;
  }

  std::ofstream metrics(metrics_path, start_epoch == 0 ? std::ios::trunc : std::ios::app);
  if (start_epoch == 0) metrics << "step,recon,cls_on_gt,cls_on_pred,total,wall_time\n";
  const auto t0 = std::chrono::steady_clock::now();

  result.best_val = best_val;
  result.best_epoch = best_epoch;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 shuffle_rng(static_cast<unsigned>(detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0xA11CEull)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainingSample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        if (can_flip && cfg.augment_p > 0.0) {
          std::mt19937 rng(static_cast<unsigned>(
              detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) << 32 | idx, 0xF11Bull)));
          batch.push_back(augment_swap_flip(samples[idx], provider, cfg.augment_p, rng));
        } else {
          batch.push_back(samples[idx]);
        }
      }
      const StepMetrics m = trainer.train_step(batch);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics.precision(10);
      metrics << trainer.state().step << ',' << m.recon << ',' << m.cls_on_gt << ','
              << m.cls_on_pred << ',' << m.total << ',' << wall << '\n';
    }
    metrics.flush();

    double val_dist = 0.0;
    if (!val.empty())
      val_dist = detail::validation_stft_distance(trainer.state(), val, val_clips, stft_cfg);
    result.val_history.push_back(val_dist);

    if (val.empty() || val_dist <= best_val) {
      best_val = val_dist;
      best_epoch = epoch;
      Checkpoint best;
      best.state = trainer.state();
      best.epochs_done = epoch + 1;
      best.best_val = best_val;
      best.best_epoch = best_epoch;
      save_checkpoint(checkpoint_dir + "/checkpoint_best.ckpt", best);
      result.best_state = trainer.state();
      result.best_val = best_val;
      result.best_epoch = best_epoch;
    }

    Checkpoint ckpt;
    ckpt.state = trainer.state();
    ckpt.adam_synth = trainer.opt_synth().snapshot();
    ckpt.adam_cls = trainer.opt_cls().snapshot();
    ckpt.has_optimizer = true;
    ckpt.epochs_done = epoch + 1;
    ckpt.best_val = best_val;
    ckpt.best_epoch = best_epoch;
    save_checkpoint(checkpoint_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) + ".ckpt", ckpt);
  }

  if (result.best_epoch < 0 && resume_from.empty()) {
    // no epochs ran and nothing was resumed: hand back the fresh state
    result.best_state = trainer.state();
    result.best_val = 0.0;
  }
  return result;
}

}  // namespace asn
