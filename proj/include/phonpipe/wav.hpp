#ifndef PHONPIPE_WAV_HPP
#define PHONPIPE_WAV_HPP

#include <string>
#include <vector>

namespace phonpipe {

// Mono audio. Stereo inputs are downmixed at load; samples are finite.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 0.0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

// Reads RIFF WAV: PCM 16/24-bit or 32-bit float, mono or stereo (averaged
// to mono), any sample rate. Throws WavError on malformed or unsupported
// files and on non-finite samples.
AudioBuffer read_wav(const std::string& path);

AudioBuffer parse_wav(const std::vector<unsigned char>& bytes);

// 16-bit PCM writer, used for fixtures and track inspection.
void write_wav(const AudioBuffer& a, const std::string& path);

}  // namespace phonpipe

#endif  // PHONPIPE_WAV_HPP
