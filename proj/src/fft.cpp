#include "phonpipe/fft.hpp"

#include <cmath>

#include "phonpipe/error.hpp"

namespace phonpipe {

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw DspError("fft size must be a power of two");
  }
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) *
                       (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& z : a) z /= static_cast<double>(n);
  }
}

std::vector<double> autocorrelation(const std::vector<double>& x,
                                    size_t max_lag) {
  const size_t n = x.size();
  if (n == 0) return {};
  const size_t m = next_pow2(2 * n);
  std::vector<std::complex<double>> buf(m, {0.0, 0.0});
  for (size_t i = 0; i < n; ++i) buf[i] = {x[i], 0.0};
  fft(buf);
  for (auto& z : buf) z = z * std::conj(z);
  fft(buf, /*inverse=*/true);
  const size_t lags = std::min(max_lag, n - 1) + 1;
  std::vector<double> r(lags);
  for (size_t k = 0; k < lags; ++k) r[k] = buf[k].real();
  return r;
}

}  // namespace phonpipe
