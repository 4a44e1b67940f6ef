#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace beamsim::fft {

namespace detail {
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using Buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
Buffer<T> alloc(std::size_t n) {
  return Buffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n))));
}

struct PlanDeleter {
  void operator()(fftw_plan p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;
}  // namespace detail

/// Unnormalized half-spectrum inverse: x[n] = sum_k X[k] e^{+2 pi i k n / N}
/// over the Hermitian extension of `half` (size N/2 + 1).
inline std::vector<double> inverse_real(std::span<const std::complex<double>> half, std::size_t n) {
  auto in = detail::alloc<fftw_complex>(n / 2 + 1);
  auto out = detail::alloc<double>(n);
  // FFTW_ESTIMATE on fftw_malloc'd buffers picks the same codelets every call.
  detail::Plan plan(fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  for (std::size_t k = 0; k <= n / 2; ++k) {
    in[k][0] = half[k].real();
    in[k][1] = half[k].imag();
  }
  fftw_execute(plan.get());
  return std::vector<double>(out.get(), out.get() + n);
}

/// Unnormalized forward transform, returning the N/2 + 1 non-negative bins.
inline std::vector<std::complex<double>> forward_real(std::span<const double> x) {
  const std::size_t n = x.size();
  auto in = detail::alloc<double>(n);
  auto out = detail::alloc<fftw_complex>(n / 2 + 1);
  detail::Plan plan(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan.get());
  std::vector<std::complex<double>> res(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) res[k] = {out[k][0], out[k][1]};
  return res;
}

}  // namespace beamsim::fft
