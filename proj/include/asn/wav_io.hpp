#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asn/waveform.hpp"

namespace asn {

enum class WavEncoding { pcm16, float32 };

namespace detail {

inline void write_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u16(std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); }

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

/// RIFF/WAVE reader for PCM 16-bit and IEEE float 32-bit, 1 or 2 channels.
inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: corrupt audio (not a RIFF/WAVE file): " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = detail::read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size())
      throw std::runtime_error("read_wav: corrupt audio (truncated chunk): " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error("read_wav: corrupt audio (short fmt): " + path);
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      sample_rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 40)  // extensible: subformat GUID starts with the code
        format = detail::read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);  // chunks are word-aligned
  }
  if (format == 0 || data == nullptr)
    throw std::runtime_error("read_wav: corrupt audio (missing fmt/data): " + path);
  if (channels < 1 || channels > 2)
    throw std::runtime_error("read_wav: unsupported channel count in " + path);

  Waveform w;
  w.sample_rate = static_cast<double>(sample_rate);
  if (format == 1 && bits == 16) {
    const std::uint32_t n = data_len / 2 / channels;
    w.channels.assign(channels, std::vector<double>(n));
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint16_t c = 0; c < channels; ++c) {
        std::int16_t s;
        std::memcpy(&s, data + (static_cast<std::size_t>(i) * channels + c) * 2, 2);
        w.channels[c][i] = static_cast<double>(s) / 32768.0;
      }
  } else if (format == 3 && bits == 32) {
    const std::uint32_t n = data_len / 4 / channels;
    w.channels.assign(channels, std::vector<double>(n));
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint16_t c = 0; c < channels; ++c) {
        float s;
        std::memcpy(&s, data + (static_cast<std::size_t>(i) * channels + c) * 4, 4);
        w.channels[c][i] = static_cast<double>(s);
      }
  } else {
    throw std::runtime_error("read_wav: unsupported encoding in " + path);
  }
  if (w.num_samples() == 0) throw std::runtime_error("read_wav: empty data chunk in " + path);
  return w;
}

inline void write_wav(const std::string& path, const Waveform& w,
                      WavEncoding enc = WavEncoding::float32) {
  const int channels = w.num_channels();
  if (channels < 1 || channels > 2) throw std::invalid_argument("write_wav: 1 or 2 channels");
  const std::int64_t n = w.num_samples();
  const int bytes_per = enc == WavEncoding::pcm16 ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(n * channels * bytes_per);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, enc == WavEncoding::pcm16 ? 1 : 3);
  detail::write_u16(out, static_cast<std::uint16_t>(channels));
  detail::write_u32(out, static_cast<std::uint32_t>(std::lround(w.sample_rate)));
  detail::write_u32(out, static_cast<std::uint32_t>(std::lround(w.sample_rate)) *
                             static_cast<std::uint32_t>(channels * bytes_per));
  detail::write_u16(out, static_cast<std::uint16_t>(channels * bytes_per));
  detail::write_u16(out, static_cast<std::uint16_t>(bytes_per * 8));
  out.write("data", 4);
  detail::write_u32(out, data_len);

  for (std::int64_t i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c) {
      const double v = w.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
      if (enc == WavEncoding::pcm16) {
        double q = std::lround(v * 32768.0);
        q = std::max(-32768.0, std::min(32767.0, q));
        const std::int16_t s = static_cast<std::int16_t>(q);
        out.write(reinterpret_cast<const char*>(&s), 2);
      } else {
        const float s = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&s), 4);
      }
    }
  if (!out) throw std::runtime_error("write_wav: write failed for " + path);
}

}  // namespace asn
