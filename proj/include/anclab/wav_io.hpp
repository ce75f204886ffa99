// Little-endian RIFF WAV reader/writer, 16-bit PCM and 32-bit float.
// The loader rejects files whose rate differs from the expected one;
// there is no resampling.
#ifndef ANCLAB_WAV_IO_HPP
#define ANCLAB_WAV_IO_HPP

#include <string>

#include "anclab/signal_core.hpp"

namespace anclab {

enum class WavFormat { Pcm16, Float32 };

MultichannelSignal read_wav(const std::string& path, int expected_rate = kSampleRate);

void write_wav(const std::string& path, const MultichannelSignal& signal,
               WavFormat format = WavFormat::Float32);

}  // namespace anclab

#endif  // ANCLAB_WAV_IO_HPP
