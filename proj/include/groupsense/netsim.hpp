#pragma once

// Discrete-event broadcast channel driving consensus nodes.
//
// Every rider node repeatedly draws a backoff uniformly in (0, T], counts it
// down only while the channel is sensed idle, and broadcasts {k_v, B^v} when
// it expires. Sinks broadcast epoch beacons on a fixed period. Carrier
// sensing is ideal within radio range, so collisions only come from hidden
// terminals; there are no acknowledgements or retransmissions.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "groupsense/channel.hpp"
#include "groupsense/consensus.hpp"
#include "groupsense/link_estimator.hpp"
#include "groupsense/scenario.hpp"
#include "groupsense/trace.hpp"

namespace groupsense {

using namespace std::chrono_literals;

struct SimConfig {
  std::uint64_t seed = 1;
  Duration backoff_T = 70ms;
  Duration epoch_period = 400ms;
  Duration airtime = 4ms;
  double payload_loss_extra = 0.0;
  ChannelModel channel;
  EstimatorConfig estimator;
  ProximityScale scale;

  void validate() const {
    if (backoff_T.count() <= 0) throw std::invalid_argument("backoff_T must be positive");
    if (epoch_period <= backoff_T) throw std::invalid_argument("epoch_period must exceed backoff_T");
    if (airtime.count() <= 0) throw std::invalid_argument("airtime must be positive");
    if (payload_loss_extra < 0.0 || payload_loss_extra > 1.0) {
      throw std::invalid_argument("payload_loss_extra must be in [0, 1]");
    }
    channel.validate();
    estimator.validate();
    scale.validate();
    if (estimator.max_level != scale.max_level) {
      throw std::invalid_argument("estimator max_level must match consensus max_level");
    }
  }
};

// Epoch number a sink announces at time t: K = floor((t - phase) / period).
inline Epoch beacon_epoch_at(Duration t, Duration phase, Duration period) {
  if (t < phase) return 0;
  return static_cast<Epoch>((t - phase) / period);
}

struct LinkCounters {
  std::uint64_t pairs = 0;  // (transmission, in-range receiver)
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t collided = 0;

  double loss_rate() const {
    return pairs == 0 ? 0.0 : static_cast<double>(lost + collided) / static_cast<double>(pairs);
  }
};

struct SimStats {
  std::vector<std::uint64_t> data_tx;  // per node
  std::uint64_t beacon_tx = 0;
  LinkCounters data;
  LinkCounters beacon;
  std::uint64_t stale_packets = 0;
  std::uint64_t malformed_packets = 0;
  std::uint64_t epoch_changes = 0;
};

enum class EventKind : std::uint8_t {
  tx_end = 0,
  beacon_due = 1,
  estimator_refresh = 2,
  backoff_expiry = 3,
};

class Simulator {
 public:
  using Observer = std::function<void(const Simulator&, Duration now)>;

  Simulator(SimConfig cfg, const Scenario& scenario)
      : cfg_(std::move(cfg)),
        scenario_(scenario),
        n_(scenario.node_count()),
        mac_rng_(Rng::mix(cfg_.seed, 1)),
        channel_rng_(Rng::mix(cfg_.seed, 2)) {
    cfg_.validate();
    scenario_.validate();
    end_ = Duration(static_cast<std::int64_t>(scenario_.duration_s * 1e6 + 0.5));
    stations_.resize(n_ + scenario_.sinks.size());
    for (std::size_t s = 0; s < scenario_.sinks.size(); ++s) stations_[n_ + s].is_sink = true;
    for (std::size_t i = 0; i < n_; ++i) {
      states_.push_back(make_node_state(static_cast<NodeId>(i), n_, cfg_.scale));
      const auto step = cfg_.estimator.refresh_step().count();
      const Duration first(mac_rng_.uniform_int_1(step));
      estimators_.emplace_back(n_, cfg_.estimator, first);
    }
    stats_.data_tx.assign(n_, 0);
    trace_.meta.nodes = n_;
    trace_.meta.sinks = scenario_.sinks.size();
    trace_.meta.max_level = cfg_.scale.max_level;
    trace_.meta.mate_threshold = cfg_.scale.mate_threshold;
    trace_.meta.duration = end_;
  }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  SimTrace run() {
    for (std::size_t i = 0; i < n_; ++i) {
      start_backoff(i, Duration{0});
      push({estimators_[i].next_refresh(), EventKind::estimator_refresh, i, 0});
    }
    for (std::size_t s = 0; s < scenario_.sinks.size(); ++s) schedule_beacon(s, 1);

    while (!queue_.empty() && queue_.top().time <= end_) {
      const Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::tx_end: finish_tx(ev.aux); break;
        case EventKind::beacon_due: beacon_due(ev.station, ev.aux); break;
        case EventKind::estimator_refresh: refresh(ev.station); break;
        case EventKind::backoff_expiry:
          if (ev.aux == stations_[ev.station].generation) backoff_expired(ev.station);
          break;
      }
      if (observer_) observer_(*this, now_);
    }
    return std::move(trace_);
  }

  std::size_t node_count() const { return n_; }
  const NodeState& node_state(NodeId id) const { return states_.at(id); }
  const LinkEstimator& estimator(NodeId id) const { return estimators_.at(id); }
  const SimStats& stats() const { return stats_; }
  const SimConfig& config() const { return cfg_; }
  Duration now() const { return now_; }

  Position station_position(std::size_t station, Duration t) const {
    const double ts = static_cast<double>(t.count()) * 1e-6;
    if (station < n_) return scenario_.node_position(static_cast<NodeId>(station), ts);
    return scenario_.sink_position(station - n_, ts);
  }

 private:
  struct Event {
    Duration time;
    EventKind kind;
    std::size_t station;
    std::uint64_t aux;  // generation, tx id or beacon epoch

    auto key() const { return std::tuple(time, static_cast<int>(kind), station, aux); }
    bool operator>(const Event& o) const { return key() > o.key(); }
  };

  struct Station {
    bool is_sink = false;
    int busy = 0;  // in-flight transmissions sensed
    bool transmitting = false;
    bool backoff_active = false;
    bool running = false;
    Duration remaining{0};
    Duration resumed_at{0};
    std::uint64_t generation = 0;
    bool beacon_pending = false;
    Epoch pending_epoch = 0;
  };

  struct InFlight {
    std::size_t sender = 0;
    bool beacon = false;
    Epoch epoch = 0;
    std::int32_t payload = -1;
    std::vector<std::size_t> sensed;  // stations in range at start
    std::vector<double> dist;
    std::vector<char> corrupted;
  };

  void push(Event ev) { queue_.push(ev); }

  void start_backoff(std::size_t i, Duration now) {
    Station& st = stations_[i];
    st.backoff_active = true;
    st.remaining = Duration(mac_rng_.uniform_int_1(cfg_.backoff_T.count()));
    st.running = false;
    ++st.generation;
    if (st.busy == 0 && !st.transmitting) resume(i, now);
  }

  void resume(std::size_t i, Duration now) {
    Station& st = stations_[i];
    st.running = true;
    st.resumed_at = now;
    push({now + st.remaining, EventKind::backoff_expiry, i, st.generation});
  }

  void freeze(std::size_t i, Duration now) {
    Station& st = stations_[i];
    if (!st.running) return;
    st.remaining -= now - st.resumed_at;
    st.running = false;
    ++st.generation;
  }

  void backoff_expired(std::size_t i) {
    Station& st = stations_[i];
    st.backoff_active = false;
    st.running = false;
    const NodeState& state = states_[i];
    TraceRecord r;
    r.time = now_;
    r.kind = TraceKind::tx;
    r.node = static_cast<NodeId>(i);
    r.epoch = state.epoch;
    r.payload = static_cast<std::int32_t>(trace_.payloads.size());
    trace_.payloads.push_back(state.vector);
    trace_.records.push_back(r);
    ++stats_.data_tx[i];
    start_tx(i, false, state.epoch, r.payload);
  }

  void schedule_beacon(std::size_t sink, Epoch k) {
    const SinkDef& def = scenario_.sinks[sink];
    const auto phase = Duration(static_cast<std::int64_t>(def.phase_ms * 1000.0 + 0.5));
    const auto from = Duration(static_cast<std::int64_t>(def.active_from_s * 1e6 + 0.5));
    for (;; ++k) {
      const Duration t = phase + cfg_.epoch_period * static_cast<std::int64_t>(k);
      if (t > end_) return;
      if (def.active_until_s && t > Duration(static_cast<std::int64_t>(*def.active_until_s * 1e6 + 0.5))) return;
      if (t >= from) {
        push({t, EventKind::beacon_due, n_ + sink, k});
        return;
      }
    }
  }

  void beacon_due(std::size_t station, Epoch k) {
    Station& st = stations_[station];
    if (st.busy > 0 || st.transmitting) {
      st.beacon_pending = true;
      st.pending_epoch = k;
    } else {
      send_beacon(station, k);
    }
    schedule_beacon(station - n_, k + 1);
  }

  void send_beacon(std::size_t station, Epoch k) {
    stations_[station].beacon_pending = false;
    TraceRecord r;
    r.time = now_;
    r.kind = TraceKind::beacon_tx;
    r.node = static_cast<NodeId>(station);
    r.epoch = k;
    trace_.records.push_back(r);
    ++stats_.beacon_tx;
    start_tx(station, true, k, -1);
  }

  void start_tx(std::size_t sender, bool beacon, Epoch epoch, std::int32_t payload) {
    const std::uint64_t id = next_tx_id_++;
    InFlight tx;
    tx.sender = sender;
    tx.beacon = beacon;
    tx.epoch = epoch;
    tx.payload = payload;
    const Position from = station_position(sender, now_);
    for (std::size_t r = 0; r < stations_.size(); ++r) {
      if (r == sender) continue;
      const double d = distance(from, station_position(r, now_));
      if (!cfg_.channel.in_range(d)) continue;
      Station& st = stations_[r];
      char corrupted = (st.busy > 0 || st.transmitting) ? 1 : 0;
      if (st.busy > 0) {
        // Everything r already hears is now overlapped at r as well.
        for (auto& [other_id, other] : in_flight_) {
          for (std::size_t k = 0; k < other.sensed.size(); ++k) {
            if (other.sensed[k] == r) other.corrupted[k] = 1;
          }
        }
      }
      tx.sensed.push_back(r);
      tx.dist.push_back(d);
      tx.corrupted.push_back(corrupted);
      if (st.busy++ == 0) freeze(r, now_);
    }
    stations_[sender].transmitting = true;
    in_flight_.emplace(id, std::move(tx));
    push({now_ + cfg_.airtime, EventKind::tx_end, sender, id});
  }

  void finish_tx(std::uint64_t id) {
    auto it = in_flight_.find(id);
    InFlight tx = std::move(it->second);
    in_flight_.erase(it);
    const auto sender_id = static_cast<NodeId>(tx.sender);

    for (std::size_t k = 0; k < tx.sensed.size(); ++k) {
      const std::size_t r = tx.sensed[k];
      if (r >= n_) continue;  // sinks do not listen
      LinkCounters& counters = tx.beacon ? stats_.beacon : stats_.data;
      ++counters.pairs;
      TraceRecord rec;
      rec.time = now_;
      rec.node = static_cast<NodeId>(r);
      rec.peer = sender_id;
      rec.epoch = tx.epoch;
      if (tx.corrupted[k]) {
        ++counters.collided;
        rec.kind = TraceKind::collision;
        rec.crc_ok = false;
        trace_.records.push_back(rec);
        continue;
      }
      const double p_loss = cfg_.channel.loss_probability(tx.dist[k], cfg_.payload_loss_extra);
      if (channel_rng_.bernoulli(p_loss)) {
        ++counters.lost;
        rec.kind = TraceKind::loss;
        trace_.records.push_back(rec);
        continue;
      }
      ++counters.delivered;
      const int ed = cfg_.channel.sample_ed(tx.dist[k], channel_rng_);
      rec.ed = ed;
      rec.crc_ok = true;
      NodeState& state = states_[r];
      bool advanced = false;
      if (tx.beacon) {
        rec.kind = TraceKind::beacon_rx;
        trace_.records.push_back(rec);
        advanced = handle_beacon(state, BeaconPacket{tx.epoch}, cfg_.scale);
      } else {
        estimators_[r].ingest_sample({sender_id, ed, now_});
        const int proxim = estimators_[r].proxim(sender_id);
        rec.kind = TraceKind::rx;
        rec.level = proxim;
        rec.payload = tx.payload;
        trace_.records.push_back(rec);
        const DataPacket pkt{sender_id, tx.epoch, trace_.payloads[static_cast<std::size_t>(tx.payload)]};
        const HandleResult res = handle_data_packet(state, pkt, proxim, cfg_.scale);
        advanced = res.epoch_advanced;
        if (res.outcome == DataOutcome::stale) ++stats_.stale_packets;
        if (res.outcome == DataOutcome::malformed) ++stats_.malformed_packets;
      }
      if (advanced) {
        ++stats_.epoch_changes;
        TraceRecord ec;
        ec.time = now_;
        ec.kind = TraceKind::epoch_change;
        ec.node = static_cast<NodeId>(r);
        ec.epoch = state.epoch;
        trace_.records.push_back(ec);
      }
    }

    Station& sender = stations_[tx.sender];
    sender.transmitting = false;
    for (std::size_t r : tx.sensed) {
      Station& st = stations_[r];
      if (--st.busy == 0 && !st.transmitting) channel_idle(r);
    }
    if (sender.busy == 0) channel_idle(tx.sender);
    if (!sender.is_sink) start_backoff(tx.sender, now_);
  }

  void channel_idle(std::size_t station) {
    Station& st = stations_[station];
    if (st.is_sink) {
      if (st.beacon_pending) send_beacon(station, st.pending_epoch);
    } else if (st.backoff_active && !st.running) {
      resume(station, now_);
    }
  }

  void refresh(std::size_t i) {
    for (const LevelChange& c : estimators_[i].refresh(now_)) {
      TraceRecord r;
      r.time = now_;
      r.kind = TraceKind::level_change;
      r.node = static_cast<NodeId>(i);
      r.peer = c.neighbor;
      r.epoch = states_[i].epoch;
      r.level = c.to;
      trace_.records.push_back(r);
    }
    push({estimators_[i].next_refresh(), EventKind::estimator_refresh, i, 0});
  }

  SimConfig cfg_;
  Scenario scenario_;
  std::size_t n_;
  Duration end_{0};
  Duration now_{0};
  Rng mac_rng_;
  Rng channel_rng_;
  std::vector<Station> stations_;
  std::vector<NodeState> states_;
  std::vector<LinkEstimator> estimators_;
  std::map<std::uint64_t, InFlight> in_flight_;
  std::uint64_t next_tx_id_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  SimStats stats_;
  SimTrace trace_;
  Observer observer_;
};

struct SimResult {
  SimTrace trace;
  SimStats stats;
};

inline SimResult run(const SimConfig& cfg, const Scenario& scenario) {
  Simulator sim(cfg, scenario);
  SimResult out;
  out.trace = sim.run();
  out.stats = sim.stats();
  return out;
}

}  // namespace groupsense
