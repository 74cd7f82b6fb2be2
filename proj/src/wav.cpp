#include "phonpipe/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "phonpipe/error.hpp"

namespace phonpipe {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& o, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  o.write(reinterpret_cast<char*>(b), 4);
}

void wr_u16(std::ofstream& o, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>(v >> 8)};
  o.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioBuffer parse_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError("not a RIFF WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t len = rd_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size()) {
      throw WavError("truncated chunk in WAV file");
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw WavError("fmt chunk too small");
      format = rd_u16(bytes.data() + body);
      channels = rd_u16(bytes.data() + body + 2);
      sample_rate = rd_u32(bytes.data() + body + 4);
      bits = rd_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the real format sits in the GUID.
        format = rd_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw WavError("missing fmt chunk");
  if (data_off == 0) throw WavError("missing data chunk");
  if (channels < 1 || channels > 2) {
    throw WavError("unsupported channel count: " + std::to_string(channels));
  }
  if (sample_rate == 0) throw WavError("zero sample rate");

  const unsigned char* d = bytes.data() + data_off;
  AudioBuffer a;
  a.sample_rate = static_cast<double>(sample_rate);

  size_t bytes_per_sample;
  if (format == 1 && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == 1 && bits == 24) {
    bytes_per_sample = 3;
  } else if (format == 3 && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw WavError("unsupported WAV encoding: format " +
                   std::to_string(format) + ", " + std::to_string(bits) +
                   " bits");
  }
  const size_t frame_size = bytes_per_sample * channels;
  const size_t n_frames = data_len / frame_size;
  a.samples.resize(n_frames);

  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; ++c) {
      const unsigned char* p = d + i * frame_size + c * bytes_per_sample;
      double v;
      if (bytes_per_sample == 2) {
        const int16_t s = static_cast<int16_t>(p[0] | (p[1] << 8));
        v = static_cast<double>(s) / 32768.0;
      } else if (bytes_per_sample == 3) {
        int32_t s = static_cast<int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s |= static_cast<int32_t>(0xFF000000);
        v = static_cast<double>(s) / 8388608.0;
      } else {
        float f;
        std::memcpy(&f, p, 4);
        v = static_cast<double>(f);
      }
      acc += v;
    }
    const double s = acc / channels;
    if (!std::isfinite(s)) {
      throw WavError("non-finite sample at frame " + std::to_string(i));
    }
    a.samples[i] = s;
  }
  return a;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const WavError& e) {
    throw WavError(path + ": " + e.what());
  }
}

void write_wav(const AudioBuffer& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WavError("cannot write WAV file: " + path);
  const uint32_t n = static_cast<uint32_t>(a.samples.size());
  const uint32_t rate = static_cast<uint32_t>(std::lround(a.sample_rate));
  out.write("RIFF", 4);
  wr_u32(out, 36 + n * 2);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, rate);
  wr_u32(out, rate * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out.write("data", 4);
  wr_u32(out, n * 2);
  for (double s : a.samples) {
    double v = s;
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    const int16_t q = static_cast<int16_t>(std::lround(v * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(q & 0xFF),
                          static_cast<unsigned char>((q >> 8) & 0xFF)};
    out.write(reinterpret_cast<char*>(b), 2);
  }
}

}  // namespace phonpipe
