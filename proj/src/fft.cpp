#include "fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace nft::fft {

namespace {

// The FFTW planner is not re-entrant; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void run(std::vector<std::complex<double>>& x, int sign) {
  if (x.empty()) return;
  auto* data = reinterpret_cast<fftw_complex*>(x.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(x.size()), data, data, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

void forward(std::vector<std::complex<double>>& x) { run(x, FFTW_FORWARD); }
void backward(std::vector<std::complex<double>>& x) { run(x, FFTW_BACKWARD); }

}  // namespace nft::fft
