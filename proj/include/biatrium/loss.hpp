#pragma once

// Asymmetric focal loss for one binary target:
//
//   L = -y (1-p)^g+ log p - (1-y) pm^g- log(1-pm),   pm = max(p - m, 0)
//
// with p clamped to [eps, 1-eps] and 0^0 taken as 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"

namespace biatrium {

struct AsymLossParams {
  double gamma_pos = 1.0;
  double gamma_neg = 4.0;
  double margin = 0.05;
  double eps = 1e-7;

  void validate() const {
    if (!(gamma_pos >= 0.0) || !(gamma_neg >= 0.0))
      throw Error(Errc::invalid_argument, "focusing parameters must be >= 0");
    if (!(margin >= 0.0 && margin < 1.0)) throw Error(Errc::invalid_argument, "margin must lie in [0, 1)");
    if (!(eps > 0.0 && eps < 0.5)) throw Error(Errc::invalid_argument, "eps must lie in (0, 0.5)");
  }
};

namespace detail {

inline void require_binary(int y) {
  if (y != 0 && y != 1) throw Error(Errc::invalid_argument, "target must be 0 or 1, got " + std::to_string(y));
}

inline double clamp_probability(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace detail

inline double asym_loss(int y, double p, const AsymLossParams& params = {}) {
  detail::require_binary(y);
  p = detail::clamp_probability(p, params.eps);
  if (y == 1) return -std::pow(1.0 - p, params.gamma_pos) * std::log(p);
  const double pm = std::max(p - params.margin, 0.0);
  return -std::pow(pm, params.gamma_neg) * std::log1p(-pm);
}

// dL/dp of the formula, evaluated at the clamped probability.
inline double asym_loss_grad(int y, double p, const AsymLossParams& params = {}) {
  detail::require_binary(y);
  p = detail::clamp_probability(p, params.eps);
  if (y == 1) {
    const double g = params.gamma_pos;
    const double q = 1.0 - p;
    double d = -std::pow(q, g) / p;
    if (g != 0.0) d += g * std::pow(q, g - 1.0) * std::log(p);
    return d;
  }
  if (p <= params.margin) return 0.0;
  const double g = params.gamma_neg;
  const double pm = p - params.margin;
  double d = std::pow(pm, g) / (1.0 - pm);
  if (g != 0.0) d -= g * std::pow(pm, g - 1.0) * std::log1p(-pm);
  return d;
}

// One-vs-rest mean over every (class, voxel) pair, summed class-major in
// voxel order. A single probability volume is the binary foreground channel
// (target = label != 0); otherwise probs[c] scores class code c.
inline double volume_loss(std::span<const Volume> probs, const LabelMap& gt, const AsymLossParams& params = {}) {
  params.validate();
  if (probs.empty()) throw Error(Errc::invalid_argument, "no probability volumes");
  const bool binary = probs.size() == 1;
  for (const auto& pv : probs)
    if (pv.shape() != gt.shape())
      throw Error(Errc::shape_mismatch, "probability volume " + to_string(pv.shape()) + " vs labels " +
                                            to_string(gt.shape()));
  if (!binary)
    for (std::uint8_t v : gt.data())
      if (v >= probs.size())
        throw Error(Errc::invalid_argument, "label " + std::to_string(v) + " has no probability channel (" +
                                                std::to_string(probs.size()) + " given)");

  double sum = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const auto p = probs[c].data();
    const auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pi = p[i];
      if (!(pi >= 0.0 && pi <= 1.0)) throw Error(Errc::invalid_argument, "probabilities must lie in [0, 1]");
      const int y = binary ? (g[i] != 0) : (g[i] == c);
      sum += asym_loss(y, pi, params);
    }
  }
  return sum / (static_cast<double>(probs.size()) * static_cast<double>(gt.size()));
}

struct GradCheckResult {
  std::size_t samples = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
};

// Analytic gradient vs central differences at random (y, p, params) away
// from the margin kink (|p - m| > 1e-3).
inline GradCheckResult grad_check(std::size_t samples = 1000, std::uint64_t seed = 7, double h = 1e-6,
                                  double tolerance = 1e-5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradCheckResult res;
  while (res.samples < samples) {
    AsymLossParams prm;
    prm.gamma_pos = 5.0 * unit(rng);
    prm.gamma_neg = 5.0 * unit(rng);
    prm.margin = 0.2 * unit(rng);
    const int y = unit(rng) < 0.5 ? 0 : 1;
    const double p = 1e-3 + (1.0 - 2e-3) * unit(rng);
    if (std::fabs(p - prm.margin) <= 1e-3) continue;
    ++res.samples;
    const double analytic = asym_loss_grad(y, p, prm);
    const double numeric = (asym_loss(y, p + h, prm) - asym_loss(y, p - h, prm)) / (2.0 * h);
    const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
    const double rel = scale == 0.0 ? 0.0 : std::fabs(analytic - numeric) / scale;
    res.max_rel_error = std::max(res.max_rel_error, rel);
    if (!(rel < tolerance)) ++res.failures;
  }
  return res;
}

}  // namespace biatrium
