#pragma once

#include <complex>
#include <vector>

#include "handoff/geometry.hpp"
#include "handoff/image.hpp"

namespace handoff::cf {

// Translation-only kernelized correlation filter on grayscale intensity.
//
// The search window is the target box grown by `padding` times its size on
// top of itself (1 + padding overall), resampled to a square
// template so FFT sizes stay fixed whatever the target size. Ridge regression
// over all circular shifts is solved in closed form in the Fourier domain with
// a Gaussian kernel.

struct FilterParams {
  int template_size = 64;
  double padding = 1.5;
  double kernel_sigma = 0.5;
  double regularization_lambda = 1e-4;
  double output_sigma_factor = 0.1;

  double window_scale() const { return 1.0 + padding; }
  void validate() const;
};

struct FilterModel {
  FilterParams params;
  double target_w = 0.0;
  double target_h = 0.0;
  std::vector<double> window;                      // raised-cosine taper, N*N
  std::vector<double> template_features;           // windowed, mean-subtracted patch
  std::vector<std::complex<double>> template_hat;  // FFT of template_features
  std::vector<std::complex<double>> alpha_hat;     // dual coefficients
  std::vector<double> target_response;             // Gaussian labels, peak at index 0
  double last_cx = 0.0;
  double last_cy = 0.0;
  double baseline_peak = 0.0;

  int size() const { return params.template_size; }
  BBox box() const { return BBox::from_center(last_cx, last_cy, target_w, target_h); }
};

struct UpdateResult {
  BBox box;
  double peak = 0.0;
};

// Throws std::invalid_argument for a zero-area box or one entirely outside the frame.
FilterModel cf_init(const Image& frame, const BBox& box, const FilterParams& params = {});

// Locates the target in `frame` around the last center. The model's filter is
// not adapted; only last_cx/last_cy move.
UpdateResult cf_update(FilterModel& model, const Image& frame);

// Correlation response of the patch around the current center, re-ordered so
// the zero-shift element sits at (N/2, N/2). Row-major, N*N.
std::vector<double> response_map(const FilterModel& model, const Image& frame);

// RMS of (K + lambda I) alpha - y on the training patch: the residual of the
// ridge-regression normal equation the closed form is meant to solve.
double training_residual_rms(const FilterModel& model);

// Grayscale, mean-subtracted, windowed N*N patch centered at (cx, cy) covering
// win_w x win_h pixels; out-of-frame samples replicate the border.
std::vector<double> extract_features(const Image& frame, double cx, double cy, double win_w, double win_h,
                                     const std::vector<double>& window, int n);

}  // namespace handoff::cf
