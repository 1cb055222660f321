#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "groupsense/link_estimator.hpp"

using namespace groupsense;
using namespace std::chrono_literals;

namespace {

Duration ms(std::int64_t v) { return std::chrono::milliseconds(v); }

// Direct evaluation of the smoothing rule over an explicit sample history.
class ReferenceSmoother {
 public:
  explicit ReferenceSmoother(EstimatorConfig cfg) : cfg_(cfg) {}

  void sample(int ed) {
    raw_.push_back(ed);
    if (raw_.size() > static_cast<std::size_t>(cfg_.short_window)) raw_.pop_front();
  }

  // dt1 == dt2: both averages refresh together.
  int refresh() {
    if (raw_.empty()) return 0;
    double s = 0;
    for (int x : raw_) s += x;
    const double short_avg = s / static_cast<double>(raw_.size());
    shorts_.push_back(short_avg);
    if (shorts_.size() > static_cast<std::size_t>(cfg_.long_window)) shorts_.pop_front();
    double l = 0;
    for (double x : shorts_) l += x;
    const double combined = std::min(short_avg, l / static_cast<double>(shorts_.size()));
    if (combined >= cfg_.th20) return 3;
    if (combined >= cfg_.th30) return 2;
    return 1;
  }

 private:
  EstimatorConfig cfg_;
  std::deque<int> raw_;
  std::deque<double> shorts_;
};

}  // namespace

TEST(RecentWindow, KeepsNewestValues) {
  RecentWindow<int> w(3);
  EXPECT_TRUE(w.empty());
  for (int i = 1; i <= 5; ++i) w.push(i);
  EXPECT_EQ(w.values(), (std::vector<int>{3, 4, 5}));
  EXPECT_DOUBLE_EQ(w.mean(), 4.0);
  w.clear();
  EXPECT_EQ(w.size(), 0u);
}

TEST(Quantize, Thresholds) {
  const EstimatorConfig cfg;
  EXPECT_EQ(quantize_level(8.0, true, cfg), 3);
  EXPECT_EQ(quantize_level(7.99, true, cfg), 2);
  EXPECT_EQ(quantize_level(5.0, true, cfg), 2);
  EXPECT_EQ(quantize_level(4.99, true, cfg), 1);
  EXPECT_EQ(quantize_level(std::nullopt, true, cfg), 1);
  EXPECT_EQ(quantize_level(20.0, false, cfg), 0);
}

TEST(Config, Validation) {
  EstimatorConfig cfg;
  cfg.th30 = 9;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.short_window = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.th30 = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(LinkEstimator, NeverHeardIsZero) {
  LinkEstimator est(3, {});
  est.refresh(ms(0));
  est.refresh(ms(5000));
  EXPECT_EQ(est.proxim(1), 0);
  EXPECT_EQ(est.proxim(42), 0);
}

TEST(LinkEstimator, LevelsChangeOnlyAtRefresh) {
  LinkEstimator est(2, {}, ms(1000));
  for (int i = 0; i < 10; ++i) est.ingest_sample({1, 12, ms(100 + 50 * i)});
  EXPECT_EQ(est.proxim(1), 0);
  EXPECT_TRUE(est.refresh(ms(999)).empty());
  const auto changes = est.refresh(ms(1000));
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0].neighbor, 1u);
  EXPECT_EQ(changes[0].from, 0);
  EXPECT_EQ(changes[0].to, 3);
  EXPECT_EQ(est.proxim(1), 3);
  EXPECT_EQ(est.next_refresh(), ms(2000));
}

TEST(LinkEstimator, ExpiryDropsToZeroAndForgets) {
  LinkEstimator est(2, {}, ms(1000));
  for (int i = 0; i < 10; ++i) est.ingest_sample({1, 12, ms(100 * i)});
  est.refresh(ms(1000));
  EXPECT_EQ(est.proxim(1), 3);
  est.refresh(ms(2000));
  est.refresh(ms(3000));
  EXPECT_EQ(est.proxim(1), 3);  // last heard at 900 ms
  est.refresh(ms(4000));
  EXPECT_EQ(est.proxim(1), 0);
  EXPECT_TRUE(est.link(1).raw.empty());
  // Coming back, old high readings do not linger in the averages.
  est.ingest_sample({1, 2, ms(4500)});
  est.refresh(ms(5000));
  EXPECT_EQ(est.proxim(1), 1);
}

TEST(LinkEstimator, MinOfAveragesIgnoresTransientSpike) {
  LinkEstimator est(2, {}, ms(1000));
  std::int64_t t = 0;
  for (int sec = 1; sec <= 6; ++sec) {
    for (int i = 0; i < 10; ++i) est.ingest_sample({1, 6, ms(t += 90)});
    est.refresh(ms(sec * 1000));
  }
  EXPECT_EQ(est.proxim(1), 2);
  // Three loud readings lift the short average above th20, not the long one.
  for (int i = 0; i < 10; ++i) est.ingest_sample({1, i < 3 ? 20 : 6, ms(t += 90)});
  est.refresh(ms(7000));
  ASSERT_TRUE(est.link(1).short_avg.has_value());
  EXPECT_GE(*est.link(1).short_avg, 8.0);
  EXPECT_EQ(est.proxim(1), 2);
}

// A slow decreasing ramp walks through 3, 2, 1 without skipping or
// oscillating, and agrees with the reference at every refresh.
TEST(LinkEstimator, RampProducesOrderedLevels) {
  const EstimatorConfig cfg;
  LinkEstimator est(2, cfg, ms(1000));
  ReferenceSmoother ref(cfg);
  std::vector<int> seen;
  for (std::int64_t t = 0; t <= 40000; t += 75) {
    if (t > 0 && t % 1000 == 0) {
      est.refresh(ms(t));
      const int expect = ref.refresh();
      EXPECT_EQ(est.proxim(1), expect) << "t=" << t;
      if (seen.empty() || seen.back() != expect) seen.push_back(expect);
    }
    const int ed = static_cast<int>(std::lround(11.0 - 9.0 * static_cast<double>(t) / 40000.0));
    est.ingest_sample({1, ed, ms(t)});
    ref.sample(ed);
  }
  EXPECT_EQ(seen, (std::vector<int>{3, 2, 1}));
}

// Pointwise greater readings never produce a lower level.
TEST(LinkEstimator, QuantizerIsMonotoneInReadings) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const EstimatorConfig cfg;
    LinkEstimator lo(2, cfg, ms(1000));
    LinkEstimator hi(2, cfg, ms(1000));
    for (int sec = 1; sec <= 12; ++sec) {
      const int k = static_cast<int>(rng() % 16);
      for (int i = 0; i < k; ++i) {
        const int a = static_cast<int>(rng() % 14);
        const int b = a + static_cast<int>(rng() % 4);
        const std::int64_t t = (sec - 1) * 1000 + 60 * i;
        lo.ingest_sample({1, a, ms(t)});
        hi.ingest_sample({1, b, ms(t)});
      }
      lo.refresh(ms(sec * 1000));
      hi.refresh(ms(sec * 1000));
      EXPECT_GE(hi.proxim(1), lo.proxim(1));
      EXPECT_LE(hi.proxim(1), cfg.max_level);
    }
  }
}

TEST(LinkEstimator, MemoryIsBoundedByWindows) {
  LinkEstimator est(3, {}, ms(1000));
  for (std::int64_t t = 0; t < 600000; t += 10) {
    est.ingest_sample({2, 9, ms(t)});
    if (t % 1000 == 0 && t > 0) est.refresh(ms(t));
  }
  EXPECT_LE(est.link(2).raw.size(), 10u);
  EXPECT_LE(est.link(2).shorts.size(), 5u);
}
