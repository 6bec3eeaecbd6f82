#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "asn/features.hpp"

// Tensor file: one-line JSON header {"frames":N,"dim":D,"fps":F} followed by
// N*D little-endian float32 values, row-major. One file per video per stream.

namespace asn {

inline void save_feature_file(const std::string& path, const FeatureTrack& track) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_feature_file: cannot open " + path);
  nlohmann::json header{{"frames", track.frames()}, {"dim", track.dim()}, {"fps", track.fps}};
  out << header.dump() << '\n';
  // Eigen is column-major; emit rows explicitly
  for (int i = 0; i < track.frames(); ++i)
    for (int j = 0; j < track.dim(); ++j) {
      const float v = track.vectors(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  if (!out) throw std::runtime_error("save_feature_file: write failed for " + path);
}

inline FeatureTrack load_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_feature_file: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("load_feature_file: malformed header in " + path);

  std::int64_t frames = 0, dim = 0;
  double fps = 0.0;
  try {
    const auto header = nlohmann::json::parse(header_line);
    frames = header.at("frames").get<std::int64_t>();
    dim = header.at("dim").get<std::int64_t>();
    fps = header.at("fps").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("load_feature_file: malformed header in " + path);
  }
  if (frames < 1 || dim < 1 || !(fps > 0.0))
    throw std::runtime_error("load_feature_file: malformed header in " + path);

  const std::streampos payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::int64_t payload_bytes = static_cast<std::int64_t>(in.tellg() - payload_start);
  if (payload_bytes != frames * dim * static_cast<std::int64_t>(sizeof(float)))
    throw std::runtime_error("load_feature_file: payload size mismatch in " + path);
  in.seekg(payload_start);

  FeatureTrack track;
  track.fps = fps;
  track.vectors.resize(frames, dim);
  for (std::int64_t i = 0; i < frames; ++i)
    for (std::int64_t j = 0; j < dim; ++j) {
      float v;
      in.read(reinterpret_cast<char*>(&v), sizeof(float));
      if (!in) throw std::runtime_error("load_feature_file: payload size mismatch in " + path);
      if (!std::isfinite(v))
        throw std::runtime_error("load_feature_file: non-finite payload in " + path);
      track.vectors(i, j) = v;
    }
  return track;
}

}  // namespace asn
