#include "handoff/cftracker.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace handoff::cf {

namespace {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

// FFTW plans are created once per size under a lock (the planner is not
// thread-safe); the new-array execute calls are.
class Fft2d {
 public:
  static const Fft2d& get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Fft2d>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) slot.reset(new Fft2d(n));
    return *slot;
  }

  Spectrum forward(const std::vector<double>& real) const {
    Spectrum in(real.begin(), real.end());
    Spectrum out(in.size());
    fftw_execute_dft(fwd_, as_fftw(in), as_fftw(out));
    return out;
  }

  std::vector<double> inverse_real(const Spectrum& spec) const {
    Spectrum in = spec;
    Spectrum out(in.size());
    fftw_execute_dft(inv_, as_fftw(in), as_fftw(out));
    std::vector<double> real(out.size());
    const double scale = 1.0 / static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) real[i] = out[i].real() * scale;
    return real;
  }

  ~Fft2d() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

 private:
  explicit Fft2d(int n) {
    Spectrum a(static_cast<std::size_t>(n) * n), b(a.size());
    constexpr unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_2d(n, n, as_fftw(a), as_fftw(b), FFTW_FORWARD, flags);
    inv_ = fftw_plan_dft_2d(n, n, as_fftw(a), as_fftw(b), FFTW_BACKWARD, flags);
  }
  static fftw_complex* as_fftw(Spectrum& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

std::vector<double> hann_window(int n) {
  std::vector<double> w1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w1[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
  std::vector<double> w(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) w[static_cast<std::size_t>(r) * n + c] = w1[r] * w1[c];
  return w;
}

// Gaussian regression target with its peak wrapped to index (0,0).
std::vector<double> gaussian_labels(int n, double sigma) {
  std::vector<double> y(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    const int dr = r <= n / 2 ? r : r - n;
    for (int c = 0; c < n; ++c) {
      const int dc = c <= n / 2 ? c : c - n;
      y[static_cast<std::size_t>(r) * n + c] = std::exp(-0.5 * (dr * dr + dc * dc) / (sigma * sigma));
    }
  }
  return y;
}

double squared_norm(const Spectrum& xf) {
  double s = 0.0;
  for (const auto& v : xf) s += std::norm(v);
  return s / static_cast<double>(xf.size());  // Parseval
}

// Gaussian kernel between z and every cyclic shift of x, returned in the Fourier domain.
Spectrum gaussian_correlation(const Fft2d& fft, const Spectrum& zf, const Spectrum& xf, double sigma) {
  Spectrum cross(zf.size());
  for (std::size_t i = 0; i < zf.size(); ++i) cross[i] = zf[i] * std::conj(xf[i]);
  const std::vector<double> xz = fft.inverse_real(cross);
  const double zz = squared_norm(zf);
  const double xx = squared_norm(xf);
  const double numel = static_cast<double>(zf.size());
  std::vector<double> k(xz.size());
  for (std::size_t i = 0; i < xz.size(); ++i)
    k[i] = std::exp(-std::max(0.0, (zz + xx - 2.0 * xz[i]) / numel) / (sigma * sigma));
  return fft.forward(k);
}

std::vector<double> raw_response(const FilterModel& m, const std::vector<double>& features) {
  const auto& fft = Fft2d::get(m.size());
  const Spectrum zf = fft.forward(features);
  Spectrum kzf = gaussian_correlation(fft, zf, m.template_hat, m.params.kernel_sigma);
  for (std::size_t i = 0; i < kzf.size(); ++i) kzf[i] *= m.alpha_hat[i];
  return fft.inverse_real(kzf);
}

double luminance(Rgb c) { return (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0; }

// 1-D vertex offset of a parabola through (-1, a), (0, b), (1, c), limited to half a sample.
double parabolic_offset(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (!(std::abs(denom) > 1e-12)) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

}  // namespace

void FilterParams::validate() const {
  if (template_size < 16) throw std::invalid_argument("template_size must be at least 16");
  if (!(padding > 1.0)) throw std::invalid_argument("padding must exceed 1");
  if (!(regularization_lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(kernel_sigma > 0.0)) throw std::invalid_argument("kernel_sigma must be positive");
  if (!(output_sigma_factor > 0.0)) throw std::invalid_argument("output_sigma_factor must be positive");
}

std::vector<double> extract_features(const Image& frame, double cx, double cy, double win_w, double win_h,
                                     const std::vector<double>& window, int n) {
  std::vector<double> f(static_cast<std::size_t>(n) * n);
  const int fw = frame.width();
  const int fh = frame.height();
  const double sx = win_w / n;
  const double sy = win_h / n;
  const auto sample = [&](int x, int y) { return luminance(frame.at(std::clamp(x, 0, fw - 1), std::clamp(y, 0, fh - 1))); };
  double mean = 0.0;
  for (int r = 0; r < n; ++r) {
    // Continuous image coordinate of the template pixel center, shifted to pixel-index space.
    const double v = cy + (r + 0.5 - 0.5 * n) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(v));
    const double ty = v - y0;
    for (int c = 0; c < n; ++c) {
      const double u = cx + (c + 0.5 - 0.5 * n) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const double tx = u - x0;
      const double top = (1.0 - tx) * sample(x0, y0) + tx * sample(x0 + 1, y0);
      const double bot = (1.0 - tx) * sample(x0, y0 + 1) + tx * sample(x0 + 1, y0 + 1);
      const double val = (1.0 - ty) * top + ty * bot;
      f[static_cast<std::size_t>(r) * n + c] = val;
      mean += val;
    }
  }
  mean /= static_cast<double>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = (f[i] - mean) * window[i];
  return f;
}

FilterModel cf_init(const Image& frame, const BBox& box, const FilterParams& params) {
  params.validate();
  if (!box.valid() || box.empty()) throw std::invalid_argument("tracker box has zero area");
  if (frame.empty()) throw std::invalid_argument("tracker frame is empty");
  if (clip_to(box, frame.width(), frame.height()).empty())
    throw std::invalid_argument("tracker box lies outside the frame");

  FilterModel m;
  m.params = params;
  const int n = params.template_size;
  m.target_w = box.w;
  m.target_h = box.h;
  m.last_cx = box.cx();
  m.last_cy = box.cy();
  m.window = hann_window(n);
  m.target_response = gaussian_labels(n, params.output_sigma_factor * n);
  m.template_features = extract_features(frame, m.last_cx, m.last_cy, box.w * params.window_scale(),
                                         box.h * params.window_scale(), m.window, n);

  const auto& fft = Fft2d::get(n);
  m.template_hat = fft.forward(m.template_features);
  const Spectrum kf = gaussian_correlation(fft, m.template_hat, m.template_hat, params.kernel_sigma);
  const Spectrum yf = fft.forward(m.target_response);
  m.alpha_hat.resize(kf.size());
  for (std::size_t i = 0; i < kf.size(); ++i) m.alpha_hat[i] = yf[i] / (kf[i] + params.regularization_lambda);

  const auto self = raw_response(m, m.template_features);
  m.baseline_peak = *std::max_element(self.begin(), self.end());
  return m;
}

UpdateResult cf_update(FilterModel& m, const Image& frame) {
  const int n = m.size();
  const double win_w = m.target_w * m.params.window_scale();
  const double win_h = m.target_h * m.params.window_scale();
  m.last_cx = std::clamp(m.last_cx, 0.0, static_cast<double>(frame.width()));
  m.last_cy = std::clamp(m.last_cy, 0.0, static_cast<double>(frame.height()));
  const auto features = extract_features(frame, m.last_cx, m.last_cy, win_w, win_h, m.window, n);
  const auto resp = raw_response(m, features);

  // First maximum in row-major order.
  std::size_t best = 0;
  for (std::size_t i = 1; i < resp.size(); ++i)
    if (resp[i] > resp[best]) best = i;
  const int pr = static_cast<int>(best) / n;
  const int pc = static_cast<int>(best) % n;
  const auto at = [&](int r, int c) {
    return resp[static_cast<std::size_t>((r + n) % n) * n + static_cast<std::size_t>((c + n) % n)];
  };
  const double peak = resp[best];
  const double dr = parabolic_offset(at(pr - 1, pc), peak, at(pr + 1, pc));
  const double dc = parabolic_offset(at(pr, pc - 1), peak, at(pr, pc + 1));
  const double shift_r = (pr > n / 2 ? pr - n : pr) + dr;
  const double shift_c = (pc > n / 2 ? pc - n : pc) + dc;

  m.last_cx += shift_c * win_w / n;
  m.last_cy += shift_r * win_h / n;
  return {m.box(), peak};
}

std::vector<double> response_map(const FilterModel& m, const Image& frame) {
  const int n = m.size();
  const auto features = extract_features(frame, m.last_cx, m.last_cy, m.target_w * m.params.window_scale(),
                                         m.target_h * m.params.window_scale(), m.window, n);
  const auto resp = raw_response(m, features);
  std::vector<double> shifted(resp.size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      shifted[static_cast<std::size_t>((r + n / 2) % n) * n + static_cast<std::size_t>((c + n / 2) % n)] =
          resp[static_cast<std::size_t>(r) * n + c];
  return shifted;
}

double training_residual_rms(const FilterModel& m) {
  const auto& fft = Fft2d::get(m.size());
  const Spectrum kf = gaussian_correlation(fft, m.template_hat, m.template_hat, m.params.kernel_sigma);
  Spectrum kalpha(kf.size());
  for (std::size_t i = 0; i < kf.size(); ++i) kalpha[i] = kf[i] * m.alpha_hat[i];
  const auto k_alpha = fft.inverse_real(kalpha);
  const auto alpha = fft.inverse_real(m.alpha_hat);
  double sq = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double r = k_alpha[i] + m.params.regularization_lambda * alpha[i] - m.target_response[i];
    sq += r * r;
  }
  return std::sqrt(sq / static_cast<double>(alpha.size()));
}

}  // namespace handoff::cf
