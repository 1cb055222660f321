#pragma once

// Flat "key=value" run settings. Scenario files, config files and command
// line overrides all use the same keys and are applied in that order.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "groupsense/metrics.hpp"
#include "groupsense/netsim.hpp"

namespace groupsense {

struct RunConfig {
  SimConfig sim;
  MetricsConfig metrics;
};

class SettingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw SettingError("setting '" + key + "': expected a number, got '" + v + "'");
  }
}

inline std::int64_t parse_int64(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw SettingError("setting '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw SettingError("setting '" + key + "': expected true/false, got '" + v + "'");
}

// Milliseconds with up to microsecond precision.
inline Duration parse_ms_setting(const std::string& key, const std::string& v) {
  const double ms = parse_double(key, v);
  return Duration(static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5)));
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SettingSlot {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, SettingSlot, std::less<>>& setting_table() {
  using S = SettingSlot;
  auto dbl = [](auto ref) {
    return S{[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_double(k, v); },
             [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
  };
  auto integer = [](auto ref) {
    return S{[ref](RunConfig& c, const std::string& k, const std::string& v) {
               ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_int64(k, v));
             },
             [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
  };
  auto boolean = [](auto ref) {
    return S{[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_bool(k, v); },
             [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
  };
  auto ms = [](auto ref) {
    return S{[ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_ms_setting(k, v); },
             [ref](const RunConfig& c) { return format_ms(ref(const_cast<RunConfig&>(c))); }};
  };
  static const std::map<std::string, SettingSlot, std::less<>> table = {
      {"backoff_T_ms", ms([](RunConfig& c) -> Duration& { return c.sim.backoff_T; })},
      {"epoch_period_ms", ms([](RunConfig& c) -> Duration& { return c.sim.epoch_period; })},
      {"airtime_ms", ms([](RunConfig& c) -> Duration& { return c.sim.airtime; })},
      {"payload_loss_extra", dbl([](RunConfig& c) -> double& { return c.sim.payload_loss_extra; })},
      {"channel.ref_ed", dbl([](RunConfig& c) -> double& { return c.sim.channel.ref_ed; })},
      {"channel.d0_m", dbl([](RunConfig& c) -> double& { return c.sim.channel.d0_m; })},
      {"channel.exponent", dbl([](RunConfig& c) -> double& { return c.sim.channel.exponent; })},
      {"channel.shadow_sigma", dbl([](RunConfig& c) -> double& { return c.sim.channel.shadow_sigma; })},
      {"channel.calibration_offset", dbl([](RunConfig& c) -> double& { return c.sim.channel.calibration_offset; })},
      {"channel.comm_range_m", dbl([](RunConfig& c) -> double& { return c.sim.channel.comm_range_m; })},
      {"channel.loss_floor", dbl([](RunConfig& c) -> double& { return c.sim.channel.loss_floor; })},
      {"channel.distance_loss", boolean([](RunConfig& c) -> bool& { return c.sim.channel.distance_loss; })},
      {"channel.loss_mid_m", dbl([](RunConfig& c) -> double& { return c.sim.channel.loss_mid_m; })},
      {"channel.loss_width_m", dbl([](RunConfig& c) -> double& { return c.sim.channel.loss_width_m; })},
      {"estimator.W1", integer([](RunConfig& c) -> int& { return c.sim.estimator.short_window; })},
      {"estimator.W2", integer([](RunConfig& c) -> int& { return c.sim.estimator.long_window; })},
      {"estimator.dt1_ms", ms([](RunConfig& c) -> Duration& { return c.sim.estimator.short_period; })},
      {"estimator.dt2_ms", ms([](RunConfig& c) -> Duration& { return c.sim.estimator.long_period; })},
      {"estimator.th20", dbl([](RunConfig& c) -> double& { return c.sim.estimator.th20; })},
      {"estimator.th30", dbl([](RunConfig& c) -> double& { return c.sim.estimator.th30; })},
      {"estimator.expiry_ms", ms([](RunConfig& c) -> Duration& { return c.sim.estimator.expiry; })},
      {"consensus.max_level", integer([](RunConfig& c) -> int& { return c.sim.scale.max_level; })},
      {"consensus.mate_threshold", integer([](RunConfig& c) -> int& { return c.sim.scale.mate_threshold; })},
      {"metrics.warmup_ms", ms([](RunConfig& c) -> Duration& { return c.metrics.warmup; })},
      {"metrics.min_hold_ms", ms([](RunConfig& c) -> Duration& { return c.metrics.min_hold; })},
      {"metrics.epsilon", dbl([](RunConfig& c) -> double& { return c.metrics.epsilon; })},
  };
  return table;
}

}  // namespace detail

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = detail::setting_table();
  const auto it = table.find(key);
  if (it == table.end()) throw SettingError("unknown setting '" + key + "'");
  it->second.set(cfg, key, value);
  // The estimator quantizes onto the consensus scale.
  if (key == "consensus.max_level") cfg.sim.estimator.max_level = cfg.sim.scale.max_level;
}

inline void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings) {
  for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
}

// "key=value" as given on the command line.
inline std::pair<std::string, std::string> split_assignment(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw SettingError("expected key=value, got '" + std::string(kv) + "'");
  }
  return {std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1))};
}

// Every setting with its resolved value; used for manifests and hashing.
inline std::map<std::string, std::string> resolved_settings(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, slot] : detail::setting_table()) out[k] = slot.get(cfg);
  return out;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace groupsense
