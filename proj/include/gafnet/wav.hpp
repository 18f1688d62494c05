#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gafnet/error.hpp"
#include "gafnet/stft.hpp"

namespace gafnet {

enum class SampleFormat { pcm16, float32 };

// Decoded WAV contents, one vector per channel.
struct WavData {
  int sample_rate = 0;
  SampleFormat format = SampleFormat::float32;
  std::vector<std::vector<double>> channels;

  std::size_t n_samples() const { return channels.empty() ? 0 : channels[0].size(); }
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) fail(Errc::io_error, "read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

}  // namespace detail

// Accepts 16-bit PCM and 32-bit IEEE float (plain or WAVE_FORMAT_EXTENSIBLE).
inline WavData decode_wav(const std::vector<unsigned char>& bytes, const std::string& label = "wav") {
  using detail::read_u16le;
  using detail::read_u32le;
  auto unsupported = [&](const std::string& why) { fail(Errc::unsupported_format, label + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    unsupported("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t fmt_tag = 0, n_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || len > avail) unsupported("malformed fmt chunk");
      fmt_tag = read_u16le(chunk + 8);
      n_channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      if (fmt_tag == 0xFFFE) {
        if (len < 40) unsupported("malformed extensible fmt chunk");
        fmt_tag = read_u16le(chunk + 32);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<std::size_t>(len, avail);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) unsupported("missing fmt chunk");
  if (!data) unsupported("missing data chunk");

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  if (fmt_tag == 1 && bits == 16) {
    out.format = SampleFormat::pcm16;
  } else if (fmt_tag == 3 && bits == 32) {
    out.format = SampleFormat::float32;
  } else {
    unsupported("only 16-bit PCM and 32-bit float are supported (tag " + std::to_string(fmt_tag) +
                ", " + std::to_string(bits) + " bits)");
  }
  if (n_channels == 0) unsupported("zero channels");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * n_channels;
  const std::size_t n = data_len / frame_bytes;
  out.channels.assign(n_channels, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      if (out.format == SampleFormat::pcm16) {
        out.channels[c][i] = static_cast<std::int16_t>(read_u16le(p)) / 32768.0;
      } else {
        out.channels[c][i] = std::bit_cast<float>(read_u32le(p));
      }
    }
  }
  return out;
}

inline WavData read_wav(const std::filesystem::path& path) {
  return decode_wav(detail::read_file_bytes(path), path.string());
}

inline std::vector<unsigned char> encode_wav(const WavData& wav) {
  using detail::put_u16le;
  using detail::put_u32le;
  require(!wav.channels.empty(), Errc::invalid_argument, "no channels to write");
  const std::size_t n = wav.channels[0].size();
  for (const auto& ch : wav.channels)
    require(ch.size() == n, Errc::shape_mismatch, "channels differ in length");

  const bool is_float = wav.format == SampleFormat::float32;
  const std::uint16_t n_ch = static_cast<std::uint16_t>(wav.channels.size());
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint32_t block_align = n_ch * bits / 8;
  const std::uint32_t data_len = static_cast<std::uint32_t>(n * block_align);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, is_float ? 3 : 1);
  put_u16le(out, n_ch);
  put_u32le(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(wav.sample_rate) * block_align);
  put_u16le(out, static_cast<std::uint16_t>(block_align));
  put_u16le(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_len);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : wav.channels) {
      if (is_float) {
        put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(ch[i])));
      } else {
        const double clipped = std::clamp(ch[i], -1.0, 32767.0 / 32768.0);
        const auto q = static_cast<std::int16_t>(std::lround(clipped * 32768.0));
        put_u16le(out, static_cast<std::uint16_t>(q));
      }
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const WavData& wav) {
  detail::write_file_bytes(path, encode_wav(wav));
}

// Model-facing I/O: exactly two channels at the analysis rate, no resampling.
inline Waveform read_stereo_wav(const std::filesystem::path& path, int expected_rate = 16000) {
  WavData wav = read_wav(path);
  require(wav.channels.size() == 2, Errc::unsupported_format,
          path.string() + ": expected 2 channels, found " + std::to_string(wav.channels.size()));
  require(wav.sample_rate == expected_rate, Errc::unsupported_format,
          path.string() + ": expected " + std::to_string(expected_rate) + " Hz, found " +
              std::to_string(wav.sample_rate) + " Hz");
  return Waveform(wav.sample_rate, std::move(wav.channels[0]), std::move(wav.channels[1]));
}

inline std::vector<double> read_mono_wav(const std::filesystem::path& path, int expected_rate = 16000) {
  WavData wav = read_wav(path);
  require(wav.channels.size() == 1, Errc::unsupported_format,
          path.string() + ": expected 1 channel, found " + std::to_string(wav.channels.size()));
  require(wav.sample_rate == expected_rate, Errc::unsupported_format,
          path.string() + ": expected " + std::to_string(expected_rate) + " Hz, found " +
              std::to_string(wav.sample_rate) + " Hz");
  return std::move(wav.channels[0]);
}

inline void write_stereo_wav(const std::filesystem::path& path, const Waveform& w,
                             SampleFormat format = SampleFormat::float32) {
  WavData wav;
  wav.sample_rate = w.sample_rate;
  wav.format = format;
  wav.channels = {w.ears[0], w.ears[1]};
  write_wav(path, wav);
}

}  // namespace gafnet
