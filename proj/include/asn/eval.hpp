#pragma once

#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asn/eval_distances.hpp"
#include "asn/model.hpp"

namespace asn {

/// Keep clips whose interaural energy ratio |10 log10(E_L / E_R)| reaches the
/// threshold. A silent channel counts as infinitely lateral; fully silent
/// clips are dropped. Returns indices into `clips`.
inline std::vector<std::size_t> filter_clips(const std::vector<ClipRecord>& clips,
                                             double threshold_db = 3.0) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const double el = channel_energy(clips[i].stereo, 0);
    const double er = channel_energy(clips[i].stereo, 1);
    if (el == 0.0 && er == 0.0) continue;
    if (el == 0.0 || er == 0.0) {
      kept.push_back(i);
      continue;
    }
    if (std::abs(10.0 * std::log10(el / er)) >= threshold_db) kept.push_back(i);
  }
  return kept;
}

/// Run the synthesizer over a mono clip in non-overlapping ~chunk_s chunks
/// and stitch the reconstructed stereo back together. The tail shorter than a
/// chunk is processed at its natural length.
inline Waveform spatialize_clip(ModelState& state, const Waveform& mono,
                                const FeatureTrack& features, const StftConfig& cfg,
                                double chunk_s = 1.0,
                                std::vector<double>* lateralization = nullptr) {
  if (mono.num_channels() != 1)
    throw std::invalid_argument("spatialize_clip: mono input required");
  const double sr = mono.sample_rate;
  const std::int64_t chunk_len = std::llround(chunk_s * sr);
  const std::int64_t n = mono.num_samples();

  std::vector<double> out_l, out_r;
  out_l.reserve(static_cast<std::size_t>(n));
  out_r.reserve(static_cast<std::size_t>(n));

  for (std::int64_t off = 0; off < n; off += chunk_len) {
    const std::int64_t len = std::min(chunk_len, n - off);
    if (len < cfg.hop_length) {  // degenerate tail: fall back to centered mono
      for (std::int64_t i = 0; i < len; ++i) {
        const double half = 0.5 * mono.channels[0][static_cast<std::size_t>(off + i)];
        out_l.push_back(half);
        out_r.push_back(half);
      }
      break;
    }
    Waveform chunk = Waveform::mono(
        std::vector<double>(mono.channels[0].begin() + off, mono.channels[0].begin() + off + len), sr);
    const Spectrogram spec = stft(chunk, cfg);
    const Eigen::MatrixXf logmag = log_compress(magnitude(spec)).cast<float>().matrix();

    std::vector<double> times(static_cast<std::size_t>(spec.n_frames()));
    for (std::int64_t t = 0; t < spec.n_frames(); ++t)
      times[static_cast<std::size_t>(t)] =
          (static_cast<double>(off) + static_cast<double>(t * cfg.hop_length)) / sr;
    const Eigen::MatrixXf feats = sample_at_times(features, times);

    auto [pl, pr] = state.synth.forward(logmag, feats);
    if (lateralization)
      lateralization->push_back(static_cast<double>(pl.mean()) - static_cast<double>(pr.mean()));
    MaskPair masks{pl.cast<double>().array(), pr.cast<double>().array()};
    const Waveform stereo = reconstruct_stereo(masks, spec, cfg);
    out_l.insert(out_l.end(), stereo.channels[0].begin(), stereo.channels[0].end());
    out_r.insert(out_r.end(), stereo.channels[1].begin(), stereo.channels[1].end());
  }
  return Waveform::stereo(std::move(out_l), std::move(out_r), sr);
}

struct MethodScores {
  double stft{0.0};
  double env{0.0};
  std::vector<double> per_clip_stft, per_clip_env;
};

struct ProtocolBlock {
  int clip_count{0};
  // insertion order fixed: MONO, ASN_no_cls, ASN
  std::vector<std::pair<std::string, MethodScores>> methods;
};

/// Per-clip and aggregate distances for each method under each protocol.
struct EvalReport {
  double filter_threshold_db{3.0};
  std::optional<ProtocolBlock> all;
  std::optional<ProtocolBlock> filtered;
};

enum class EvalProtocol { all, filtered, both };

inline EvalProtocol protocol_from_name(const std::string& s) {
  if (s == "all") return EvalProtocol::all;
  if (s == "filtered") return EvalProtocol::filtered;
  if (s == "both") return EvalProtocol::both;
  throw std::invalid_argument("protocol must be one of all|filtered|both");
}

/// Evaluate MONO plus any provided model states over a test corpus.
/// `states` maps a method name to a model; rows appear in Table order.
inline EvalReport evaluate(const std::vector<ClipRecord>& test_clips,
                           std::vector<std::pair<std::string, ModelState*>> states,
                           const StftConfig& cfg, double threshold_db = 3.0,
                           EvalProtocol protocol = EvalProtocol::both, double chunk_s = 1.0,
                           double env_smooth_hz = 20.0) {
  if (test_clips.empty()) throw std::invalid_argument("evaluate: empty test corpus");

  // per-clip distances for every method on every clip
  std::vector<std::pair<std::string, MethodScores>> table;
  table.emplace_back("MONO", MethodScores{});
  for (auto& [name, state] : states) table.emplace_back(name, MethodScores{});

  for (const auto& clip : test_clips) {
    const Waveform& gt = clip.stereo;
    {
      const Waveform pred = mono_baseline(gt);
      table[0].second.per_clip_stft.push_back(stft_distance(gt, pred, cfg));
      table[0].second.per_clip_env.push_back(env_distance(gt, pred, env_smooth_hz));
    }
    const Waveform mix = mixdown(gt);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const Waveform pred = spatialize_clip(*states[s].second, mix, clip.features, cfg, chunk_s);
      table[s + 1].second.per_clip_stft.push_back(stft_distance(gt, pred, cfg));
      table[s + 1].second.per_clip_env.push_back(env_distance(gt, pred, env_smooth_hz));
    }
  }

  auto block_for = [&](const std::vector<std::size_t>& idx) {
    ProtocolBlock blk;
    blk.clip_count = static_cast<int>(idx.size());
    for (const auto& [name, scores] : table) {
      MethodScores m;
      for (std::size_t i : idx) {
        m.per_clip_stft.push_back(scores.per_clip_stft[i]);
        m.per_clip_env.push_back(scores.per_clip_env[i]);
      }
      if (!idx.empty()) {
        for (double v : m.per_clip_stft) m.stft += v;
        for (double v : m.per_clip_env) m.env += v;
        m.stft /= static_cast<double>(idx.size());
        m.env /= static_cast<double>(idx.size());
      }
      blk.methods.emplace_back(name, std::move(m));
    }
    return blk;
  };

  EvalReport report;
  report.filter_threshold_db = threshold_db;
  if (protocol == EvalProtocol::all || protocol == EvalProtocol::both) {
    std::vector<std::size_t> every(test_clips.size());
    std::iota(every.begin(), every.end(), 0);
    report.all = block_for(every);
  }
  if (protocol == EvalProtocol::filtered || protocol == EvalProtocol::both)
    report.filtered = block_for(filter_clips(test_clips, threshold_db));
  return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
  auto block_json = [](const ProtocolBlock& blk) {
    nlohmann::json methods = nlohmann::json::object();
    nlohmann::json order = nlohmann::json::array();
    for (const auto& [name, m] : blk.methods) {
      order.push_back(name);
      methods[name] = {{"stft_distance", m.stft},
                       {"env_distance", m.env},
                       {"per_clip_stft", m.per_clip_stft},
                       {"per_clip_env", m.per_clip_env}};
    }
    return nlohmann::json{{"clip_count", blk.clip_count}, {"method_order", order}, {"methods", methods}};
  };
  nlohmann::json j{{"filter_threshold_db", report.filter_threshold_db}};
  if (report.all) j["all"] = block_json(*report.all);
  if (report.filtered) j["filtered"] = block_json(*report.filtered);
  return j;
}

inline std::string to_text_table(const EvalReport& report) {
  std::ostringstream o;
  auto print_block = [&](const char* title, const ProtocolBlock& blk) {
    o << title << " (" << blk.clip_count << " clips)\n";
    o << std::left << std::setw(22) << "method" << std::right << std::setw(12) << "STFT"
      << std::setw(12) << "ENV" << '\n';
    for (const auto& [name, m] : blk.methods) {
      o << std::left << std::setw(22) << name << std::right << std::setw(12) << std::fixed
        << std::setprecision(4) << m.stft << std::setw(12) << m.env << '\n';
    }
    o << '\n';
  };
  if (report.all) print_block("Results on all testing clips", *report.all);
  if (report.filtered) {
    std::ostringstream t;
    t << "Results on filtered testing clips (threshold " << std::setprecision(1) << std::fixed
      << report.filter_threshold_db << " dB)";
    print_block(t.str().c_str(), *report.filtered);
  }
  return o.str();
}

}  // namespace asn
