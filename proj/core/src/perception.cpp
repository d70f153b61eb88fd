#include "handoff/perception.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace handoff {

double AppearanceVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

AppearanceVector AppearanceVector::normalized(std::vector<double> raw) {
  double s = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("embedding has non-finite entries");
    s += v * v;
  }
  if (!(s > 0.0)) throw std::invalid_argument("embedding has zero norm");
  const double inv = 1.0 / std::sqrt(s);
  for (double& v : raw) v *= inv;
  return AppearanceVector{std::move(raw)};
}

double similarity(const AppearanceVector& a, const AppearanceVector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("embedding dimensions differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::optional<std::size_t> perform_reid(std::span<const AppearanceVector> candidates,
                                        const AppearanceVector& target, double s_min) {
  std::optional<std::size_t> best;
  double best_sim = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = similarity(candidates[i], target);
    if (!best || s > best_sim) {
      best = i;
      best_sim = s;
    }
  }
  if (!best || best_sim < s_min) return std::nullopt;
  return best;
}

std::vector<Detection> filter_persons(std::span<const Detection> dets) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [](const Detection& d) { return d.class_id == kPersonClass; });
  return out;
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view camera, long frame, std::uint64_t salt) {
  // FNV-1a over the camera id, then mixed with the numeric parts (splitmix64 finalizer).
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : camera) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  h = mix(h ^ seed);
  h = mix(h ^ static_cast<std::uint64_t>(frame));
  return mix(h ^ salt);
}

// ---------------------------------------------------------------------------

void OracleDetectorParams::validate() const {
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(dropout_prob) || !prob(min_visible_fraction))
    throw std::invalid_argument("oracle detector probabilities must lie in [0,1]");
  if (!(jitter_sigma >= 0.0) || !(false_positive_rate >= 0.0))
    throw std::invalid_argument("oracle detector noise parameters must be non-negative");
}

OracleDetector::OracleDetector(std::shared_ptr<const sim::Scenario> scenario, OracleDetectorParams params)
    : scenario_(std::move(scenario)), params_(params) {
  params_.validate();
}

std::vector<Detection> OracleDetector::detect(const Frame& frame) const {
  const auto& cam = scenario_->camera(frame.camera_id);
  const double fw = cam.width;
  const double fh = cam.height;
  std::mt19937_64 rng(stream_key(params_.seed, frame.camera_id, frame.index, 0xde7ec7ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);

  std::vector<Detection> out;
  for (const auto& gt : sim::ground_truth(*scenario_, frame.camera_id, frame.index)) {
    // Fixed number of draws per entry keeps streams aligned across parameter settings.
    const double u_drop = unit(rng);
    const double n[4] = {jitter(rng), jitter(rng), jitter(rng), jitter(rng)};
    const double conf = 0.7 + 0.29 * unit(rng);
    if (gt.visible_fraction < params_.min_visible_fraction) continue;
    if (u_drop < params_.dropout_prob) continue;
    const double s = params_.jitter_sigma;
    BBox b{gt.bbox.x + s * n[0], gt.bbox.y + s * n[1], std::max(1.0, gt.bbox.w + s * n[2]),
           std::max(1.0, gt.bbox.h + s * n[3])};
    b = clip_to(b, fw, fh);
    if (b.empty()) continue;
    out.push_back({b, kPersonClass, conf});
  }

  if (params_.false_positive_rate > 0.0) {
    std::poisson_distribution<int> count(params_.false_positive_rate);
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      const double w = std::min(fw, 20.0 + 60.0 * unit(rng));
      const double h = std::min(fh, 40.0 + 80.0 * unit(rng));
      const double x = (fw - w) * unit(rng);
      const double y = (fh - h) * unit(rng);
      const double conf = 0.3 + 0.3 * unit(rng);
      out.push_back({BBox{x, y, w, h}, kPersonClass, conf});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

FileDetector::Table FileDetector::parse(std::string_view text) {
  Table table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      std::string field(line.substr(start, comma - start));
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw std::invalid_argument("detection file line " + std::to_string(line_no) + ": bad field '" + field + "'");
      }
      start = comma + 1;
    }
    if (fields.size() != 7)
      throw std::invalid_argument("detection file line " + std::to_string(line_no) + ": expected 7 fields");
    Detection d{BBox{fields[2], fields[3], fields[4], fields[5]}, static_cast<int>(fields[1]), fields[6]};
    if (!d.bbox.valid() || d.confidence < 0.0 || d.confidence > 1.0)
      throw std::invalid_argument("detection file line " + std::to_string(line_no) + ": invalid detection");
    table[static_cast<long>(fields[0])].push_back(d);
  }
  return table;
}

FileDetector::Table FileDetector::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open detection file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<Detection> FileDetector::detect(const Frame& frame) const {
  auto it = tables_.find(frame.camera_id);
  if (it == tables_.end()) it = tables_.find("*");
  if (it == tables_.end()) return {};
  const auto row = it->second.find(frame.index);
  if (row == it->second.end()) return {};
  return row->second;
}

// ---------------------------------------------------------------------------

AppearanceVector HistogramEmbedder::embed(const Frame& frame, const BBox& box) const {
  if (!frame.image) throw std::invalid_argument("frame has no pixels");
  const Image crop = frame.image->crop(box);
  if (crop.empty()) throw std::invalid_argument("embedding crop is empty");
  std::vector<double> hist(512, 0.0);
  const auto bytes = crop.bytes();
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const int bin = (bytes[i] >> 5) * 64 + (bytes[i + 1] >> 5) * 8 + (bytes[i + 2] >> 5);
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  return AppearanceVector::normalized(std::move(hist));
}

OracleEmbedder::OracleEmbedder(std::shared_ptr<const sim::Scenario> scenario, OracleEmbedderParams params)
    : scenario_(std::move(scenario)), params_(params) {
  if (params_.dim < 2) throw std::invalid_argument("oracle embedding needs at least 2 dimensions");
  if (!(params_.noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
}

AppearanceVector OracleEmbedder::embed(const Frame& frame, const BBox& box) const {
  const auto& cam = scenario_->camera(frame.camera_id);
  if (!box.valid() || clip_to(box, cam.width, cam.height).empty())
    throw std::invalid_argument("embedding crop is empty");
  const auto owner = sim::dominant_agent(*scenario_, frame.camera_id, frame.index, box, params_.min_share);
  std::vector<double> v(static_cast<std::size_t>(params_.dim), 0.0);
  v[static_cast<std::size_t>(owner ? basis_index(*owner) : params_.dim - 1)] = 1.0;
  if (params_.noise_sigma > 0.0) {
    std::uint64_t salt = 0;
    for (double c : {box.x, box.y, box.w, box.h}) salt = salt * 31 + std::bit_cast<std::uint64_t>(c);
    std::mt19937_64 rng(stream_key(params_.seed, frame.camera_id, frame.index, salt));
    std::normal_distribution<double> noise(0.0, params_.noise_sigma);
    for (double& x : v) x += noise(rng);
  }
  return AppearanceVector::normalized(std::move(v));
}

}  // namespace handoff
