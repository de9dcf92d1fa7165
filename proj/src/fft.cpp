#include "pnpmrf/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace pnp {

namespace {
std::mutex planner_mutex; // the FFTW planner is not re-entrant
}

struct Fft2::Plans
{
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

Fft2::Fft2(Grid g)
  : grid_(g)
  , scale_(1.0 / std::sqrt(double(g.size())))
  , plans_(std::make_unique<Plans>())
{
  if (g.width < 1 || g.height < 1) { throw ShapeError("FFT grid must be non-empty"); }
  std::lock_guard lock(planner_mutex);
  auto *scratch = fftw_alloc_complex(std::size_t(g.size()));
  unsigned const flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft_2d(int(g.height), int(g.width), scratch, scratch, FFTW_FORWARD, flags);
  plans_->inverse = fftw_plan_dft_2d(int(g.height), int(g.width), scratch, scratch, FFTW_BACKWARD, flags);
  fftw_free(scratch);
  if (!plans_->forward || !plans_->inverse) { throw Error("FFTW planning failed"); }
}

Fft2::~Fft2()
{
  std::lock_guard lock(planner_mutex);
  fftw_destroy_plan(plans_->forward);
  fftw_destroy_plan(plans_->inverse);
}

void Fft2::forward(Cx *data) const
{
  auto *p = reinterpret_cast<fftw_complex *>(data);
  fftw_execute_dft(plans_->forward, p, p);
  for (Index i = 0; i < grid_.size(); i++) { data[i] *= scale_; }
}

void Fft2::inverse(Cx *data) const
{
  auto *p = reinterpret_cast<fftw_complex *>(data);
  fftw_execute_dft(plans_->inverse, p, p);
  for (Index i = 0; i < grid_.size(); i++) { data[i] *= scale_; }
}

} // namespace pnp
