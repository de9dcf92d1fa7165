#pragma once

#include "core.hpp"

#include <memory>

namespace pnp {

/*
 * Unitary 2-D FFT (1/sqrt(n) in both directions) on a row-major width x height
 * complex image, unshifted (DC at index 0). Plans are created once; execution
 * is thread-safe on distinct buffers.
 */
class Fft2
{
public:
  explicit Fft2(Grid g);
  ~Fft2();
  Fft2(Fft2 const &) = delete;
  Fft2 &operator=(Fft2 const &) = delete;

  Grid grid() const { return grid_; }
  void forward(Cx *data) const;
  void inverse(Cx *data) const;

private:
  struct Plans;
  Grid grid_;
  double scale_;
  std::unique_ptr<Plans> plans_;
};

} // namespace pnp
