#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include "drd/classic.hpp"

namespace drd::classic {

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftwf_alloc_complex(n)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftwf_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftwf_complex* ptr;
};

// The FFTW planner is not thread-safe; execution of a finished plan on new
// arrays is. Plans are created once per shape and kept for the process.
class PlanCache {
 public:
  fftwf_plan get(int rows, int cols) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find({rows, cols});
    if (it != plans_.end()) return it->second;
    FftwBuffer scratch(static_cast<std::size_t>(rows) * cols);
    fftwf_plan plan = fftwf_plan_dft_2d(rows, cols, scratch.ptr, scratch.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_.emplace(std::make_pair(rows, cols), plan);
    return plan;
  }
  ~PlanCache() {
    for (auto& [_, plan] : plans_) fftwf_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftwf_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::vector<float> make_window(WindowKind kind, std::size_t n) {
  std::vector<float> w(n, 1.0f);
  if (kind == WindowKind::kHamming && n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = static_cast<float>(0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n - 1)));
    }
  }
  return w;
}

RDMap rd_transform(const RawFrame& frame, WindowKind window) {
  const auto& data = frame.data();
  const std::size_t ns = data.dim0(), nc = data.dim1(), na = data.dim2();
  const auto w_range = make_window(window, ns);
  const auto w_doppler = make_window(window, nc);
  fftwf_plan plan = plan_cache().get(static_cast<int>(ns), static_cast<int>(nc));

  FftwBuffer buf(ns * nc);
  ComplexCube out(ns, nc, na);
  const std::size_t half = nc / 2;
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t n = 0; n < ns; ++n) {
      for (std::size_t c = 0; c < nc; ++c) {
        const cfloat v = data(n, c, a) * (w_range[n] * w_doppler[c]);
        buf.ptr[n * nc + c][0] = v.real();
        buf.ptr[n * nc + c][1] = v.imag();
      }
    }
    fftwf_execute_dft(plan, buf.ptr, buf.ptr);
    for (std::size_t r = 0; r < ns; ++r) {
      for (std::size_t k = 0; k < nc; ++k) {
        // Doppler bin k of the unshifted spectrum lands at (k + nc/2) mod nc.
        const std::size_t shifted = (k + half) % nc;
        out(r, shifted, a) = {buf.ptr[r * nc + k][0], buf.ptr[r * nc + k][1]};
      }
    }
  }
  return RDMap(std::move(out));
}

}  // namespace drd::classic
