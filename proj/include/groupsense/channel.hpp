#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace groupsense {

// mt19937_64 with distribution code kept here so traces do not depend on the
// standard library's (implementation-defined) distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_open_closed() { return 1.0 - uniform(); }

  // Integer in [1, max] (max >= 1).
  std::int64_t uniform_int_1(std::int64_t max) {
    return 1 + static_cast<std::int64_t>(uniform() * static_cast<double>(max));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open_closed();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Log-distance path loss in ED units with per-packet Gaussian shadowing and a
// logistic loss ramp towards the edge of radio range.
//
// With the defaults the expected reading is 8 at 20 m and 5 at 30 m, which
// anchors the estimator thresholds to the 20 m / 30 m classes.
struct ChannelModel {
  double ref_ed = 8.0;
  double d0_m = 20.0;
  double exponent = 1.7036;  // 8 at 20 m, 5 at 30 m
  double shadow_sigma = 1.0;
  double calibration_offset = 0.0;
  double comm_range_m = 55.0;
  double min_distance_m = 0.1;
  int ed_max = 84;  // AT86RF231 ED register ceiling

  double loss_floor = 0.22;
  bool distance_loss = true;
  double loss_mid_m = 48.0;
  double loss_width_m = 2.5;

  void validate() const {
    if (!(d0_m > 0.0)) throw std::invalid_argument("channel.d0_m must be positive");
    if (!(exponent > 0.0)) throw std::invalid_argument("channel.exponent must be positive");
    if (shadow_sigma < 0.0) throw std::invalid_argument("channel.shadow_sigma must be >= 0");
    if (!(comm_range_m > 0.0)) throw std::invalid_argument("channel.comm_range_m must be positive");
    if (loss_floor < 0.0 || loss_floor > 1.0) throw std::invalid_argument("channel.loss_floor must be in [0, 1]");
    if (!(loss_width_m > 0.0)) throw std::invalid_argument("channel.loss_width_m must be positive");
  }

  static ChannelModel lossless() {
    ChannelModel c;
    c.loss_floor = 0.0;
    c.distance_loss = false;
    return c;
  }

  bool in_range(double d) const { return d <= comm_range_m; }

  double expected_ed(double d) const {
    const double dd = std::max(d, min_distance_m);
    return ref_ed + calibration_offset - 10.0 * exponent * std::log10(dd / d0_m);
  }

  double loss_probability(double d, double extra = 0.0) const {
    double p = loss_floor;
    if (distance_loss) {
      const double ramp = 1.0 / (1.0 + std::exp(-(d - loss_mid_m) / loss_width_m));
      p += (1.0 - loss_floor) * ramp;
    }
    return std::clamp(p + extra, 0.0, 1.0);
  }

  int sample_ed(double d, Rng& rng) const {
    const double v = expected_ed(d) + shadow_sigma * rng.normal();
    return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(ed_max)));
  }
};

}  // namespace groupsense
