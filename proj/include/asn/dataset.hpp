#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "asn/masks.hpp"
#include "asn/resample.hpp"
#include "asn/scene.hpp"
#include "asn/stft.hpp"
#include "asn/tensor_file.hpp"
#include "asn/wav_io.hpp"

namespace asn {

/// Float variant of MaskPair used inside training samples.
struct MaskPairF {
  Eigen::MatrixXf left, right;
};

/// One ~1 s chunk ready for the synthesizer: mixture log-magnitude, features
/// aligned to the spectrogram frame rate, and the target masks.
struct TrainingSample {
  Eigen::MatrixXf mix_logmag;        // frames x bins
  Eigen::MatrixXf features_aligned;  // frames x dim
  MaskPairF target_masks;
  Eigen::MatrixXcf mix_spec;  // frames x bins, mixture complex spectrum
  StftConfig config;
  std::string clip_id;
  int chunk_index{0};
  std::int64_t chunk_offset_samples{0};
  std::int64_t chunk_length_samples{0};
  double sample_rate{44100.0};
};

namespace detail {
inline Eigen::MatrixXf to_f(const Eigen::ArrayXXd& a) { return a.cast<float>().matrix(); }
}  // namespace detail

/// Cut a clip into non-overlapping ~chunk_s chunks and derive the training
/// tensors for each. Near-silent chunks (mixture below silent_floor_dbfs) are
/// dropped; their mask targets are noise.
inline std::vector<TrainingSample> make_samples(const ClipRecord& clip, const StftConfig& cfg,
                                                double chunk_s = 1.0, bool drop_silent = true,
                                                double silent_floor_dbfs = -60.0) {
  clip.validate();
  cfg.validate();
  const double sr = clip.stereo.sample_rate;
  const std::int64_t chunk_len = std::llround(chunk_s * sr);
  const std::int64_t n = clip.stereo.num_samples();
  if (n < chunk_len) throw std::invalid_argument("make_samples: clip shorter than one chunk");
  const std::int64_t n_chunks = n / chunk_len;

  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(n_chunks));
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t off = c * chunk_len;
    auto slice = [&](int ch) {
      const auto& src = clip.stereo.channels[static_cast<std::size_t>(ch)];
      return std::vector<double>(src.begin() + off, src.begin() + off + chunk_len);
    };
    Waveform left = Waveform::mono(slice(0), sr);
    Waveform right = Waveform::mono(slice(1), sr);
    Waveform mix = Waveform::mono(std::vector<double>(chunk_len), sr);
    for (std::int64_t i = 0; i < chunk_len; ++i)
      mix.channels[0][static_cast<std::size_t>(i)] =
          left.channels[0][static_cast<std::size_t>(i)] + right.channels[0][static_cast<std::size_t>(i)];

    if (drop_silent && energy_dbfs(mix) < silent_floor_dbfs) continue;

    const Spectrogram mix_spec = stft(mix, cfg);
    const MaskPair irm = compute_irm(stft(left, cfg), stft(right, cfg));

    TrainingSample s;
    s.config = cfg;
    s.clip_id = clip.id;
    s.chunk_index = static_cast<int>(c);
    s.chunk_offset_samples = off;
    s.chunk_length_samples = chunk_len;
    s.sample_rate = sr;
    s.mix_logmag = detail::to_f(log_compress(magnitude(mix_spec)));
    s.target_masks.left = detail::to_f(irm.left);
    s.target_masks.right = detail::to_f(irm.right);
    s.mix_spec = mix_spec.values.cast<std::complex<float>>();

    // features at the spectrogram frame times, nearest neighbor in clip time
    std::vector<double> times(static_cast<std::size_t>(mix_spec.n_frames()));
    for (std::int64_t t = 0; t < mix_spec.n_frames(); ++t)
      times[static_cast<std::size_t>(t)] =
          (static_cast<double>(off) + static_cast<double>(t * cfg.hop_length)) / sr;
    s.features_aligned = sample_at_times(clip.features, times);
    out.push_back(std::move(s));
  }
  return out;
}

/// With probability p, swap the target masks and flip the features through
/// the provider's transform. The mixture is swap-invariant and untouched.
inline TrainingSample augment_swap_flip(const TrainingSample& sample,
                                        const FeatureProviderSpec& provider, double p,
                                        std::mt19937& rng) {
  if (p <= 0.0) return sample;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  if (dist(rng) >= p) return sample;
  if (!provider.flip_supported)
    throw std::invalid_argument("augment_swap_flip: provider does not support flips");
  TrainingSample out = sample;
  std::swap(out.target_masks.left, out.target_masks.right);
  out.features_aligned = flip_features(provider, sample.features_aligned);
  return out;
}

/// Deterministic 90/10-style split at the video level. Returns (train, test)
/// index lists and stamps each clip's split field.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_video(
    std::vector<ClipRecord>& clips, double ratio = 0.9, std::uint64_t seed = 0) {
  if (clips.size() < 2) throw std::invalid_argument("split_by_video: need at least 2 videos");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split_by_video: bad ratio");
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(static_cast<unsigned>(seed ^ (seed >> 32)));
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(clips.size()) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, clips.size() - 1);

  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  for (std::size_t i : train) clips[i].split = ClipRecord::Split::train;
  for (std::size_t i : test) clips[i].split = ClipRecord::Split::test;
  return {train, test};
}

/// Load a stereo recording: resample to 44.1 kHz, peak-normalize with one
/// joint gain (interaural level differences survive), attach any precomputed
/// feature tracks in the order given.
inline ClipRecord ingest_stereo(const std::string& audio_path, const std::string& id,
                                const std::vector<std::string>& feature_paths = {},
                                double target_sr = 44100.0) {
  Waveform w = read_wav(audio_path);
  if (w.num_channels() != 2) throw std::invalid_argument("ingest_stereo: stereo required");
  if (w.sample_rate != target_sr) {
    for (auto& ch : w.channels) ch = resample(ch, w.sample_rate, target_sr);
    w.sample_rate = target_sr;
  }
  const double peak = peak_abs(w);
  if (peak > 0.0)
    for (auto& ch : w.channels)
      for (double& v : ch) v /= peak;

  ClipRecord clip;
  clip.id = id;
  clip.near_silent = energy_dbfs(w) < -60.0;
  clip.stereo = std::move(w);

  if (!feature_paths.empty()) {
    FeatureTrack track;
    bool first = true;
    for (const auto& fp : feature_paths) {
      if (!std::filesystem::exists(fp))
        throw std::runtime_error("ingest_stereo: missing feature file " + fp);
      FeatureTrack part = load_feature_file(fp);
      track = first ? std::move(part) : concat_tracks(track, part);
      first = false;
    }
    clip.provider = FeatureProviderSpec::precomputed(track.dim());
    clip.features = std::move(track);
  }
  return clip;
}

// ---------------------------------------------------------------------------
// Corpus manifest: JSON lines, one record per clip.
// {"id", "audio_path", "feature_paths", "split", "provider",
//  "oracle" (optional {fps, pan}), "near_silent"}
// ---------------------------------------------------------------------------

inline const char* split_name(ClipRecord::Split s) {
  switch (s) {
    case ClipRecord::Split::train: return "train";
    case ClipRecord::Split::test: return "test";
    default: return "unassigned";
  }
}

inline ClipRecord::Split split_from_name(const std::string& s) {
  if (s == "train") return ClipRecord::Split::train;
  if (s == "test") return ClipRecord::Split::test;
  return ClipRecord::Split::unassigned;
}

struct ManifestEntry {
  std::string id;
  std::string audio_path;
  std::vector<std::string> feature_paths;
  ClipRecord::Split split{ClipRecord::Split::unassigned};
  std::string provider{"synthetic_position"};
  std::optional<std::pair<double, std::vector<double>>> oracle;  // fps, pan
  bool near_silent{false};
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& e : entries) {
    nlohmann::json j{{"id", e.id},
                     {"audio_path", e.audio_path},
                     {"feature_paths", e.feature_paths},
                     {"split", split_name(e.split)},
                     {"provider", e.provider},
                     {"near_silent", e.near_silent}};
    if (e.oracle) j["oracle"] = {{"fps", e.oracle->first}, {"pan", e.oracle->second}};
    out << j.dump() << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error("read_manifest: bad JSON on line " + std::to_string(lineno));
    }
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.audio_path = j.at("audio_path").get<std::string>();
    if (j.contains("feature_paths")) e.feature_paths = j["feature_paths"].get<std::vector<std::string>>();
    if (j.contains("split")) e.split = split_from_name(j["split"].get<std::string>());
    if (j.contains("provider")) e.provider = j["provider"].get<std::string>();
    if (j.contains("near_silent")) e.near_silent = j["near_silent"].get<bool>();
    if (j.contains("oracle"))
      e.oracle = {j["oracle"].at("fps").get<double>(),
                  j["oracle"].at("pan").get<std::vector<double>>()};
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Materialize manifest entries into clips, resolving paths against the
/// manifest's directory.
inline std::vector<ClipRecord> load_corpus(const std::string& manifest_path) {
  const auto entries = read_manifest(manifest_path);
  const std::filesystem::path root = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (root / fp).string();
  };

  std::vector<ClipRecord> clips;
  clips.reserve(entries.size());
  for (const auto& e : entries) {
    std::vector<std::string> fpaths;
    fpaths.reserve(e.feature_paths.size());
    for (const auto& fp : e.feature_paths) fpaths.push_back(resolve(fp));
    ClipRecord clip = ingest_stereo(resolve(e.audio_path), e.id, fpaths);
    clip.split = e.split;
    clip.near_silent = clip.near_silent || e.near_silent;
    if (e.oracle) {
      clip.oracle_pan = e.oracle->second;
      if (clip.features.frames() > 0) clip.features.fps = e.oracle->first;
    }
    if (e.provider == "synthetic_position")
      clip.provider = FeatureProviderSpec::synthetic(clip.features.dim());
    else
      clip.provider = FeatureProviderSpec::precomputed(clip.features.dim());
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace asn
