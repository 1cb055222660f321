#pragma once

// Per-neighbour link quality estimation from energy-detection (ED) readings.
//
// Raw readings are averaged twice: a short average over the last W1 samples,
// refreshed every dt1, and a long average over the last W2 short averages,
// refreshed every dt2. The smaller of the two is quantized against two
// thresholds (th20 for the "within 20 m" class, th30 for "within 30 m").

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "groupsense/consensus.hpp"

namespace groupsense {

using Duration = std::chrono::microseconds;

struct EstimatorConfig {
  int short_window = 10;  // W1, raw samples
  int long_window = 5;    // W2, short averages
  Duration short_period = std::chrono::seconds(1);  // dt1
  Duration long_period = std::chrono::seconds(1);   // dt2
  double th20 = 8.0;
  double th30 = 5.0;
  Duration expiry = std::chrono::seconds(3);
  int max_level = 3;

  void validate() const {
    if (short_window < 1 || long_window < 1) throw std::invalid_argument("estimator windows must be >= 1");
    if (!(th20 > th30 && th30 > 0.0)) throw std::invalid_argument("estimator thresholds must satisfy th20 > th30 > 0");
    if (short_period.count() <= 0 || long_period.count() <= 0) {
      throw std::invalid_argument("estimator refresh periods must be positive");
    }
    if (expiry.count() <= 0) throw std::invalid_argument("estimator expiry must be positive");
    if (max_level < 1) throw std::invalid_argument("estimator max_level must be >= 1");
  }

  Duration refresh_step() const { return std::min(short_period, long_period); }
};

struct LinkSample {
  NodeId neighbor = 0;
  int ed = 0;
  Duration timestamp{0};
};

// Fixed-capacity FIFO of the most recent values.
template <typename T>
class RecentWindow {
 public:
  explicit RecentWindow(std::size_t capacity = 1) : buf_(std::max<std::size_t>(capacity, 1)) {}

  void push(T value) {
    buf_[head_] = value;
    head_ = (head_ + 1) % buf_.size();
    count_ = std::min(count_ + 1, buf_.size());
  }

  void clear() {
    head_ = 0;
    count_ = 0;
  }

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return buf_.size(); }
  bool empty() const { return count_ == 0; }

  // Oldest first.
  std::vector<T> values() const {
    std::vector<T> out;
    out.reserve(count_);
    const std::size_t start = (head_ + buf_.size() - count_) % buf_.size();
    for (std::size_t i = 0; i < count_; ++i) out.push_back(buf_[(start + i) % buf_.size()]);
    return out;
  }

  double mean() const {
    if (count_ == 0) return 0.0;
    double sum = 0.0;
    for (const T& v : values()) sum += static_cast<double>(v);
    return sum / static_cast<double>(count_);
  }

 private:
  std::vector<T> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

struct NeighborLink {
  RecentWindow<int> raw;
  RecentWindow<double> shorts;
  std::optional<double> short_avg;
  std::optional<double> long_avg;
  std::optional<Duration> last_heard;
  int level = 0;
};

struct LevelChange {
  NodeId neighbor = 0;
  int from = 0;
  int to = 0;
};

// Pure quantizer: level from the combined statistic.
inline int quantize_level(std::optional<double> combined, bool heard_recently, const EstimatorConfig& cfg) {
  if (!heard_recently) return 0;
  const int top = cfg.max_level;
  const int mid = std::max(top - 1, 1);
  if (combined && *combined >= cfg.th20) return top;
  if (combined && *combined >= cfg.th30) return mid;
  return std::min(1, top);
}

class LinkEstimator {
 public:
  LinkEstimator(std::size_t n_neighbors, EstimatorConfig cfg, Duration first_refresh = Duration{0})
      : cfg_(cfg),
        links_(n_neighbors),
        next_short_(first_refresh),
        next_long_(first_refresh) {
    cfg_.validate();
    for (auto& l : links_) {
      l.raw = RecentWindow<int>(static_cast<std::size_t>(cfg_.short_window));
      l.shorts = RecentWindow<double>(static_cast<std::size_t>(cfg_.long_window));
    }
  }

  const EstimatorConfig& config() const { return cfg_; }
  std::size_t size() const { return links_.size(); }

  void ingest_sample(const LinkSample& s) {
    NeighborLink& link = links_.at(s.neighbor);
    link.raw.push(s.ed);
    link.last_heard = s.timestamp;
  }

  // Instant at which refresh() next has work to do.
  Duration next_refresh() const { return std::min(next_short_, next_long_); }

  std::vector<LevelChange> refresh(Duration now) {
    bool short_due = false;
    bool long_due = false;
    while (next_short_ <= now) {
      short_due = true;
      next_short_ += cfg_.short_period;
    }
    while (next_long_ <= now) {
      long_due = true;
      next_long_ += cfg_.long_period;
    }
    std::vector<LevelChange> changes;
    if (!short_due && !long_due) return changes;

    for (std::size_t i = 0; i < links_.size(); ++i) {
      NeighborLink& link = links_[i];
      const bool heard = link.last_heard && now - *link.last_heard < cfg_.expiry;
      if (!heard) {
        // Silent neighbours start from scratch when they come back.
        link.raw.clear();
        link.shorts.clear();
        link.short_avg.reset();
        link.long_avg.reset();
      } else {
        if (short_due && !link.raw.empty()) {
          link.short_avg = link.raw.mean();
          link.shorts.push(*link.short_avg);
        }
        if (long_due && !link.shorts.empty()) {
          link.long_avg = link.shorts.mean();
        }
      }
      const int level = quantize_level(combined(link), heard, cfg_);
      if (level != link.level) {
        changes.push_back({static_cast<NodeId>(i), link.level, level});
        link.level = level;
      }
    }
    return changes;
  }

  int proxim(NodeId neighbor) const {
    if (neighbor >= links_.size()) return 0;
    return links_[neighbor].level;
  }

  const NeighborLink& link(NodeId neighbor) const { return links_.at(neighbor); }

  static std::optional<double> combined(const NeighborLink& link) {
    if (link.short_avg && link.long_avg) return std::min(*link.short_avg, *link.long_avg);
    if (link.short_avg) return link.short_avg;
    return link.long_avg;
  }

 private:
  EstimatorConfig cfg_;
  std::vector<NeighborLink> links_;
  Duration next_short_;
  Duration next_long_;
};

}  // namespace groupsense
