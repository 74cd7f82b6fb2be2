#ifndef PHONPIPE_FFT_HPP
#define PHONPIPE_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace phonpipe {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

size_t next_pow2(size_t n);

// Autocorrelation of x for lags 0..max_lag via zero-padded FFT.
std::vector<double> autocorrelation(const std::vector<double>& x,
                                    size_t max_lag);

}  // namespace phonpipe

#endif  // PHONPIPE_FFT_HPP
