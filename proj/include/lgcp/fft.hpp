#ifndef LGCP_FFT_HPP
#define LGCP_FFT_HPP

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <utility>

#include <fftw3.h>

namespace lgcp {

namespace detail {
// FFTW's planner is not reentrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real 2-D transform pair on a rows-by-cols torus (cols contiguous), with
/// its own aligned scratch buffers. One instance per worker.
class FftWorkspace {
 public:
  FftWorkspace(int rows, int cols) : rows_(rows), cols_(cols) {
    real_ = fftw_alloc_real(real_size());
    spec_ = fftw_alloc_complex(spectrum_size());
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(rows_, cols_, real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(rows_, cols_, spec_, real_, FFTW_ESTIMATE);
  }

  FftWorkspace(const FftWorkspace& other) : FftWorkspace(other.rows_, other.cols_) {}
  FftWorkspace& operator=(const FftWorkspace&) = delete;
  FftWorkspace(FftWorkspace&& other) noexcept { swap(other); }
  FftWorkspace& operator=(FftWorkspace&& other) noexcept {
    swap(other);
    return *this;
  }

  ~FftWorkspace() {
    if (forward_ || backward_) {
      std::lock_guard lock(detail::fftw_planner_mutex());
      if (forward_) fftw_destroy_plan(forward_);
      if (backward_) fftw_destroy_plan(backward_);
    }
    if (real_) fftw_free(real_);
    if (spec_) fftw_free(spec_);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t real_size() const { return static_cast<std::size_t>(rows_) * cols_; }
  /// Half spectrum: rows x (cols/2 + 1).
  std::size_t spectrum_size() const {
    return static_cast<std::size_t>(rows_) * (cols_ / 2 + 1);
  }
  int half_cols() const { return cols_ / 2 + 1; }

  std::span<double> real() { return {real_, real_size()}; }
  std::span<std::complex<double>> spectrum() {
    return {reinterpret_cast<std::complex<double>*>(spec_), spectrum_size()};
  }

  /// real() -> spectrum(), unnormalised.
  void forward() { fftw_execute(forward_); }
  /// spectrum() -> real(), unnormalised (a round trip multiplies by rows*cols).
  /// Destroys the contents of spectrum().
  void backward() { fftw_execute(backward_); }

 private:
  FftWorkspace() = default;

  void swap(FftWorkspace& o) noexcept {
    std::swap(rows_, o.rows_);
    std::swap(cols_, o.cols_);
    std::swap(real_, o.real_);
    std::swap(spec_, o.spec_);
    std::swap(forward_, o.forward_);
    std::swap(backward_, o.backward_);
  }

  int rows_ = 0, cols_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace lgcp

#endif  // LGCP_FFT_HPP
