#include "anclab/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace anclab {

namespace {

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

MultichannelSignal read_wav(const std::string& path, int expected_rate) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);

  char tag[4];
  is.read(tag, 4);
  require(is && std::memcmp(tag, "RIFF", 4) == 0, ErrorCode::IoError, "not a RIFF file: " + path);
  read_u32(is);  // riff size
  is.read(tag, 4);
  require(is && std::memcmp(tag, "WAVE", 4) == 0, ErrorCode::IoError, "not a WAVE file: " + path);

  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> data;
  while (is.read(tag, 4)) {
    std::uint32_t chunk = read_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      audio_format = read_u16(is);
      channels = read_u16(is);
      rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      bits = read_u16(is);
      if (chunk > 16) is.seekg(chunk - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk);
      is.read(data.data(), chunk);
      break;
    } else {
      is.seekg(chunk + (chunk & 1), std::ios::cur);
    }
  }
  require(channels > 0 && !data.empty(), ErrorCode::IoError, "no audio data in " + path);
  require(static_cast<int>(rate) == expected_rate, ErrorCode::ConfigError,
          path + ": sample rate " + std::to_string(rate) + " does not match expected " +
              std::to_string(expected_rate) + " (no resampling)");

  const bool pcm16 = audio_format == 1 && bits == 16;
  const bool f32 = audio_format == 3 && bits == 32;
  require(pcm16 || f32, ErrorCode::IoError, path + ": only 16-bit PCM or 32-bit float supported");

  const std::size_t bytes_per = bits / 8;
  const std::size_t num_frames = data.size() / (bytes_per * channels);
  MultichannelSignal out;
  out.sample_rate = expected_rate;
  out.samples.assign(channels, std::vector<double>(num_frames));
  const char* p = data.data();
  for (std::size_t n = 0; n < num_frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        out.samples[c][n] = static_cast<double>(v) / 32768.0;
        p += 2;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        out.samples[c][n] = static_cast<double>(v);
        p += 4;
      }
    }
  }
  return out;
}

void write_wav(const std::string& path, const MultichannelSignal& signal, WavFormat format) {
  signal.validate();
  require(signal.channels() > 0, ErrorCode::EmptyInput, "no channels to write");
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);

  const int channels = signal.channels();
  const std::size_t frames = signal.length();
  const bool pcm = format == WavFormat::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(frames * channels * (bits / 8));

  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, pcm ? 1 : 3);
  write_u16(os, static_cast<std::uint16_t>(channels));
  write_u32(os, static_cast<std::uint32_t>(signal.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(signal.sample_rate * channels * (bits / 8)));
  write_u16(os, static_cast<std::uint16_t>(channels * (bits / 8)));
  write_u16(os, bits);
  os.write("data", 4);
  write_u32(os, data_bytes);

  for (std::size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double v = signal.samples[c][n];
      if (pcm) {
        const double clipped = std::clamp(v, -1.0, 1.0);
        auto q = static_cast<std::int16_t>(std::lrint(clipped * 32767.0));
        char b[2];
        std::memcpy(b, &q, 2);
        os.write(b, 2);
      } else {
        write_f32(os, static_cast<float>(v));
      }
    }
  }
}

}  // namespace anclab
